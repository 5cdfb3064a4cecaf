"""Sparse multivariate polynomials with exact rational coefficients.

Variable 0 is the hyperparameter ``a`` (alpha); variables 1..d are the
parameters ``w1..wd``. Text form is a sum of terms ``c * a^i * w1^j``
with rational ``c`` written as ``num/den``.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import cached_property
from numbers import Rational

import numpy as np

from .errors import InputError

Exponent = tuple


def as_fraction(x) -> Fraction:
    """Exact conversion of ints, Fractions, rational strings and floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational: {x!r}") from exc
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise InputError(f"cannot convert {type(x).__name__} to a rational")


def fraction_str(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def var_name(i: int) -> str:
    return "a" if i == 0 else f"w{i}"


class Polynomial:
    """Immutable sparse polynomial; ``terms`` maps exponent tuples to Fractions."""

    __slots__ = ("nvars", "_terms", "__dict__")

    def __init__(self, nvars: int, terms=None):
        if nvars < 1:
            raise InputError("polynomial needs at least one variable")
        self.nvars = nvars
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars or any(e < 0 for e in exps):
                raise InputError(f"bad exponent tuple {exps} for {nvars} variables")
            c = as_fraction(c)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if not clean[exps]:
                    del clean[exps]
        self._terms = clean

    # construction helpers
    @classmethod
    def constant(cls, nvars: int, c) -> Polynomial:
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int) -> Polynomial:
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def from_univariate(cls, coeffs, nvars: int = 1, var: int = 0) -> Polynomial:
        terms = {}
        for k, c in enumerate(coeffs):
            e = [0] * nvars
            e[var] = k
            terms[tuple(e)] = c
        return cls(nvars, terms)

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_value(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def degree(self, var: int | None = None) -> int:
        """Total degree, or degree in one variable. The zero polynomial has degree -1."""
        if not self._terms:
            return -1
        if var is None:
            return max(sum(e) for e in self._terms)
        return max(e[var] for e in self._terms)

    def variables(self) -> set:
        return {i for e in self._terms for i, k in enumerate(e) if k}

    # arithmetic
    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise InputError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        return Polynomial.constant(self.nvars, as_fraction(other))

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self._terms)
        for e, c in other._terms.items():
            t[e] = t.get(e, 0) + c
        return Polynomial(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = as_fraction(other)
            return Polynomial(self.nvars, {e: c * v for e, v in self._terms.items()})
        other = self._coerce(other)
        t: dict = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0) + c1 * c2
        return Polynomial(self.nvars, t)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise InputError("negative power")
        out = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._terms == other._terms
        try:
            return self == self._coerce(other)
        except InputError:
            return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    def __repr__(self):
        return f"Polynomial({self.nvars}, {str(self)!r})"

    # calculus and evaluation
    def partial(self, var: int) -> Polynomial:
        if not 0 <= var < self.nvars:
            raise InputError(f"variable index {var} out of range")
        t = {}
        for e, c in self._terms.items():
            if e[var]:
                e2 = list(e)
                e2[var] -= 1
                t[tuple(e2)] = c * e[var]
        return Polynomial(self.nvars, t)

    def eval(self, point):
        """Exact value for rational points, IEEE double otherwise."""
        if len(point) != self.nvars:
            raise InputError(f"point has {len(point)} coordinates, polynomial has {self.nvars} variables")
        exact = all(isinstance(x, (int, Fraction, np.integer)) and not isinstance(x, bool) for x in point)
        if exact:
            xs = [Fraction(int(x)) if isinstance(x, np.integer) else Fraction(x) for x in point]
            total = Fraction(0)
            for e, c in self._terms.items():
                v = c
                for x, k in zip(xs, e):
                    if k:
                        v *= x**k
                total += v
            return total
        xs = [float(x) for x in point]
        total = 0.0
        for e, c in self._terms.items():
            v = float(c)
            for x, k in zip(xs, e):
                if k:
                    v *= x**k
            total += v
        return total

    __call__ = eval

    def eval_array(self, *coords):
        """Vectorized float evaluation with numpy broadcasting over the coordinates."""
        if len(coords) != self.nvars:
            raise InputError("coordinate count does not match nvars")
        xs = [np.asarray(x, dtype=float) for x in coords]
        shape = np.broadcast_shapes(*(x.shape for x in xs))
        out = np.zeros(shape)
        powers: dict = {}
        for e, c in self._terms.items():
            v = np.full(shape, float(c))
            for i, k in enumerate(e):
                if k:
                    key = (i, k)
                    if key not in powers:
                        powers[key] = xs[i] ** k
                    v = v * powers[key]
            out = out + v
        return out

    def substitute(self, var: int, value) -> Polynomial:
        """Fix one variable at an exact value; the variable stays in the tuple with exponent 0."""
        value = as_fraction(value)
        t: dict = {}
        for e, c in self._terms.items():
            e2 = list(e)
            k = e2[var]
            e2[var] = 0
            e2 = tuple(e2)
            t[e2] = t.get(e2, 0) + c * value**k
        return Polynomial(self.nvars, t)

    def univariate_coeffs(self, var: int) -> list:
        """Coefficient list (low to high) when only ``var`` appears."""
        extra = self.variables() - {var}
        if extra:
            raise InputError(f"polynomial depends on variables {sorted(extra)} besides {var}")
        out = [Fraction(0)] * (self.degree(var) + 1 if self._terms else 0)
        for e, c in self._terms.items():
            out[e[var]] = c
        return out

    @cached_property
    def dense2(self) -> np.ndarray:
        """Float coefficient matrix C[i, j] of a^i w1^j; bivariate only."""
        if self.nvars != 2:
            raise InputError("dense2 needs a bivariate polynomial")
        da = max(self.degree(0), 0)
        dw = max(self.degree(1), 0)
        C = np.zeros((da + 1, dw + 1))
        for (i, j), c in self._terms.items():
            C[i, j] = float(c)
        return C

    def denominator_lcm(self) -> int:
        from math import lcm

        out = 1
        for c in self._terms.values():
            out = lcm(out, c.denominator)
        return out

    # text form
    def __str__(self):
        if not self._terms:
            return "0"
        keys = sorted(self._terms, key=lambda e: (-sum(e), tuple(-k for k in e)))
        parts = []
        for n, e in enumerate(keys):
            c = self._terms[e]
            sign = "-" if c < 0 else "+"
            factors = [fraction_str(abs(c))]
            for i, k in enumerate(e):
                if k == 1:
                    factors.append(var_name(i))
                elif k > 1:
                    factors.append(f"{var_name(i)}^{k}")
            body = " * ".join(factors)
            if n == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append(f"{sign} {body}")
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str, nvars: int, path: str | None = None) -> Polynomial:
        return _Parser(text, nvars, path).parse()


_TOKEN = re.compile(r"\s*(?:(\d+(?:/\d+)?)|(a|w\d*)|(\^)|(\*)|(\+)|(-)|(\()|(\)))")


class _Parser:
    """Recursive descent over sums, products, integer powers and parentheses."""

    def __init__(self, text, nvars, path):
        self.nvars = nvars
        self.path = path
        self.text = text
        self.toks = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise InputError(f"unexpected character at {pos} in {text!r}", path)
            kinds = ("num", "var", "^", "*", "+", "-", "(", ")")
            for kind, g in zip(kinds, m.groups()):
                if g is not None:
                    self.toks.append((kind, g))
                    break
            pos = m.end()
            while pos < len(text) and text[pos].isspace():
                pos += 1
        self.i = 0

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def take(self, kind=None):
        if self.i >= len(self.toks):
            raise InputError(f"unexpected end of {self.text!r}", self.path)
        tok = self.toks[self.i]
        if kind and tok[0] != kind:
            raise InputError(f"expected {kind!r}, got {tok[1]!r} in {self.text!r}", self.path)
        self.i += 1
        return tok

    def parse(self):
        if not self.toks:
            raise InputError("empty polynomial", self.path)
        p = self.expr()
        if self.i != len(self.toks):
            raise InputError(f"trailing tokens in {self.text!r}", self.path)
        return p

    def expr(self):
        sign = 1
        if self.peek() in ("+", "-"):
            sign = -1 if self.take()[0] == "-" else 1
        p = self.term() * sign
        while self.peek() in ("+", "-"):
            op = self.take()[0]
            t = self.term()
            p = p + t if op == "+" else p - t
        return p

    def term(self):
        p = self.power()
        while self.peek() == "*":
            self.take()
            p = p * self.power()
        return p

    def power(self):
        base = self.atom()
        if self.peek() == "^":
            self.take()
            k = self.take("num")[1]
            if "/" in k:
                raise InputError("exponents must be integers", self.path)
            base = base ** int(k)
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return Polynomial.constant(self.nvars, Fraction(val))
        if kind == "var":
            if val == "a":
                return Polynomial.variable(self.nvars, 0)
            idx = int(val[1:]) if len(val) > 1 else 1
            if not 1 <= idx < self.nvars:
                raise InputError(f"variable {val} outside w1..w{self.nvars - 1}", self.path)
            return Polynomial.variable(self.nvars, idx)
        if kind == "(":
            p = self.expr()
            self.take(")")
            return p
        if kind == "-":
            return -self.atom()
        raise InputError(f"unexpected token {val!r} in {self.text!r}", self.path)


def A(nvars: int = 2) -> Polynomial:
    """Shorthand for the hyperparameter variable."""
    return Polynomial.variable(nvars, 0)


def W(i: int = 1, nvars: int = 2) -> Polynomial:
    """Shorthand for parameter variable ``w_i``."""
    return Polynomial.variable(nvars, i)
