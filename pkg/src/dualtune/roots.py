"""Exact univariate polynomial algebra over Q and certified real-root isolation.

Polynomials here are plain coefficient lists, lowest degree first.
Root isolation runs Sturm counting on each square-free factor, then
sign-change bisection down to the requested width.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from .errors import DegenerateError, InputError
from .poly import Polynomial, as_fraction


def strip(c: list) -> list:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return c


def deg(c) -> int:
    return len(c) - 1


def u_add(a, b):
    n = max(len(a), len(b))
    return strip([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def u_sub(a, b):
    n = max(len(a), len(b))
    return strip([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)])


def u_scale(a, s):
    return strip([x * s for x in a])


def u_mul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return strip(out)


def u_divmod(a, b):
    b = strip(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    r = [Fraction(x) for x in strip(a)]
    q = [Fraction(0)] * max(len(r) - len(b) + 1, 0)
    lb = Fraction(b[-1])
    while len(r) >= len(b) and r:
        k = len(r) - len(b)
        f = r[-1] / lb
        q[k] = f
        for i, y in enumerate(b):
            r[i + k] -= f * y
        r = strip(r)
    return strip(q), r


def u_monic(a):
    a = strip(a)
    if not a:
        return []
    lc = Fraction(a[-1])
    return [Fraction(x) / lc for x in a]


def u_gcd(a, b):
    a, b = strip(a), strip(b)
    while b:
        a, b = b, u_divmod(a, b)[1]
    return u_monic(a)


def u_deriv(a):
    return strip([k * a[k] for k in range(1, len(a))])


def u_eval(a, x):
    v = 0
    for c in reversed(a):
        v = v * x + c
    return v


def u_compose_linear(a, s, t):
    """Coefficients of a(s*x + t)."""
    out: list = []
    for c in reversed(a):
        out = u_add(u_mul(out, [t, s]) if out else [], [c])
    return out


def u_squarefree_decomposition(a):
    """Yun's algorithm: list of (factor, multiplicity) with monic square-free factors."""
    a = u_monic(a)
    if deg(a) < 1:
        return []
    out = []
    b = u_deriv(a)
    c = u_gcd(a, b)
    w = u_divmod(a, c)[0]
    y = u_divmod(b, c)[0]
    z = u_sub(y, u_deriv(w))
    i = 1
    while deg(w) > 0:
        g = u_gcd(w, z)
        if deg(g) > 0:
            out.append((g, i))
        w = u_divmod(w, g)[0]
        y = u_divmod(z, g)[0]
        z = u_sub(y, u_deriv(w))
        i += 1
    return out


def u_squarefree_part(a):
    a = strip(a)
    if deg(a) < 1:
        return u_monic(a)
    return u_monic(u_divmod(a, u_gcd(a, u_deriv(a)))[0])


# integer-coefficient helpers used for fast exact sign evaluation

def to_primitive_int(a) -> list:
    a = [as_fraction(x) for x in strip(a)]
    if not a:
        return []
    den = 1
    for x in a:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in a]
    g = 0
    for x in ints:
        g = gcd(g, x)
    return [x // g for x in ints]


def sign_at(p: list, x: Fraction) -> int:
    """Sign of integer polynomial p at rational x, using integer Horner."""
    n, d = x.numerator, x.denominator
    v = 0
    dp = 1
    # accumulates sum p_i n^i d^(k-i)
    for c in reversed(p):
        v = v * n + c * dp
        dp *= d
    return (v > 0) - (v < 0)


def _primitive(p):
    g = 0
    for x in p:
        g = gcd(g, x)
    return [x // g for x in p] if g > 1 else list(p)


def sturm_chain(p: list) -> list:
    """Sturm sequence of a square-free integer polynomial, scaled by positive constants."""
    chain = [p, _primitive(strip([k * p[k] for k in range(1, len(p))]))]
    while len(chain[-1]) > 1:
        a, b = chain[-2], chain[-1]
        # remainder with an exact multiplier lc(b)^e; fix the sign so -rem keeps Sturm's property
        r = list(a)
        lb = b[-1]
        db = len(b) - 1
        mult_sign = 1
        while r and len(r) - 1 >= db:
            lr = r[-1]
            k = len(r) - 1 - db
            r = [x * lb for x in r]
            if lb < 0:
                mult_sign = -mult_sign
            for i, y in enumerate(b):
                r[i + k] -= lr * y
            r = strip(r)
        if not r:
            break
        r = [-mult_sign * x for x in r]
        chain.append(_primitive(r))
    return chain


def _variations(chain, x: Fraction) -> int:
    prev = 0
    v = 0
    for q in chain:
        s = sign_at(q, x)
        if s:
            if prev and s != prev:
                v += 1
            prev = s
    return v


@dataclass(frozen=True)
class RealRoot:
    """A real root certified by an isolating interval [lo, hi] of rationals."""

    lo: Fraction
    hi: Fraction
    value: float
    multiplicity: int = 1

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo


def _deflate(a_int, r: Fraction):
    q, rem = u_divmod([Fraction(x) for x in a_int], [-r, Fraction(1)])
    assert not rem
    return to_primitive_int(q)


def _isolate_squarefree(p_int: list, lo: Fraction, hi: Fraction, tol: Fraction):
    roots = []
    work = list(p_int)
    for e in (lo, hi):
        if len(work) > 1 and sign_at(work, e) == 0:
            roots.append((e, e))
            work = _deflate(work, e)
    if len(work) <= 1 or lo == hi:
        return sorted(roots)
    chain = sturm_chain(work)
    stack = [(lo, hi, _variations(chain, lo) - _variations(chain, hi))]
    isolated = []
    while stack:
        l, r, n = stack.pop()
        if n <= 0:
            continue
        if n == 1:
            isolated.append((l, r))
            continue
        m = (l + r) / 2
        if sign_at(work, m) == 0:
            roots.append((m, m))
            work = _deflate(work, m)
            chain = sturm_chain(work)
            n -= 1
        vm = _variations(chain, m)
        vl = _variations(chain, l)
        vr = _variations(chain, r)
        stack.append((l, m, vl - vm))
        stack.append((m, r, vm - vr))
    for l, r in isolated:
        sl = sign_at(work, l)
        while r - l > tol:
            m = (l + r) / 2
            sm = sign_at(work, m)
            if sm == 0:
                l = r = m
                break
            if sm == sl:
                l = m
            else:
                r = m
        roots.append((l, r))
    return sorted(roots)


def real_roots_univariate(p, lo, hi, tol=1e-12) -> list:
    """All distinct real roots of ``p`` in [lo, hi] with certified isolating intervals.

    ``p`` is a coefficient list or a Polynomial that depends on one variable.
    Raises DegenerateError for the zero polynomial.
    """
    if isinstance(p, Polynomial):
        vs = p.variables()
        if len(vs) > 1:
            raise InputError("real_roots_univariate needs a polynomial in one variable")
        var = vs.pop() if vs else 0
        coeffs = p.univariate_coeffs(var)
    else:
        coeffs = [as_fraction(c) for c in p]
    coeffs = strip(coeffs)
    if not coeffs:
        raise DegenerateError("identically zero polynomial (plateau)")
    lo, hi = as_fraction(lo), as_fraction(hi)
    if lo > hi:
        raise InputError("empty interval")
    if len(coeffs) == 1:
        return []
    tol = as_fraction(tol)
    out = []
    for factor, mult in u_squarefree_decomposition(coeffs):
        for l, r in _isolate_squarefree(to_primitive_int(factor), lo, hi, tol):
            out.append(RealRoot(l, r, float((l + r) / 2), mult))
    out.sort(key=lambda z: z.lo)
    return out


def count_real_roots(p, lo, hi) -> int:
    """Number of distinct real roots in [lo, hi] without refinement."""
    coeffs = strip([as_fraction(c) for c in p])
    if not coeffs:
        raise DegenerateError("identically zero polynomial (plateau)")
    if len(coeffs) == 1:
        return 0
    lo, hi = as_fraction(lo), as_fraction(hi)
    sq = to_primitive_int(u_squarefree_part(coeffs))
    n = 0
    for e in (lo, hi):
        if len(sq) > 1 and sign_at(sq, e) == 0:
            n += 1
            sq = _deflate(sq, e)
    if len(sq) <= 1:
        return n
    chain = sturm_chain(sq)
    return n + _variations(chain, lo) - _variations(chain, hi)
