"""Bivariate algebra in (a, w): gcd, exact division, resultants, system solving.

Internally a bivariate polynomial is held recursively as a list indexed by
the power of w whose entries are coefficient lists in a over Q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InputError, SolveError
from .poly import Polynomial, as_fraction
from .roots import (
    real_roots_univariate,
    strip,
    u_add,
    u_divmod,
    u_gcd,
    u_monic,
    u_mul,
    u_sub,
)

RESIDUAL_TOL = 1e-9


def to_rec(p: Polynomial) -> list:
    if p.nvars != 2:
        raise InputError("bivariate routine called with nvars != 2")
    dw = p.degree(1)
    if dw < 0:
        return []
    da = p.degree(0)
    out = [[Fraction(0)] * (da + 1) for _ in range(dw + 1)]
    for (i, j), c in p.items():
        out[j][i] = c
    return [strip(c) for c in out]


def from_rec(r: list) -> Polynomial:
    terms = {}
    for j, coeffs in enumerate(r):
        for i, c in enumerate(coeffs):
            if c:
                terms[(i, j)] = c
    return Polynomial(2, terms)


def _rstrip(r):
    r = [strip(c) for c in r]
    while r and not r[-1]:
        r.pop()
    return r


def rec_content(r) -> list:
    g: list = []
    for c in r:
        if c:
            g = u_gcd(g, c) if g else u_monic(c)
            if len(g) == 1:
                break
    return g


def _rec_div_coeff(r, c):
    out = []
    for x in r:
        q, rem = u_divmod(x, c)
        if rem:
            raise ArithmeticError("content does not divide coefficient")
        out.append(q)
    return out


def rec_primitive(r):
    r = _rstrip(r)
    if not r:
        return []
    return _rec_div_coeff(r, rec_content(r))


def rec_prem(a, b):
    """Pseudo-remainder of a by b as polynomials in w over Q[a]."""
    r = _rstrip(a)
    b = _rstrip(b)
    db = len(b) - 1
    lb = b[-1]
    while r and len(r) - 1 >= db:
        lr = r[-1]
        k = len(r) - 1 - db
        r = [u_mul(x, lb) for x in r]
        for i, y in enumerate(b):
            r[i + k] = u_sub(r[i + k], u_mul(lr, y))
        r = _rstrip(r)
    return r


def _normalize(r):
    """Scale so the leading coefficient's leading coefficient is 1."""
    r = _rstrip(r)
    if not r:
        return r
    lc = r[-1][-1]
    return [[x / lc for x in c] for c in r]


def rec_gcd(a, b):
    a, b = _rstrip(a), _rstrip(b)
    if not a:
        return _normalize(b)
    if not b:
        return _normalize(a)
    ca, cb = rec_content(a), rec_content(b)
    c = u_gcd(ca, cb)
    p, q = rec_primitive(a), rec_primitive(b)
    if len(p) < len(q):
        p, q = q, p
    while q and len(q) > 1:
        r = rec_prem(p, q)
        p, q = q, rec_primitive(r) if r else []
    if q:  # nonzero constant in w: primitive parts are coprime
        g = [[Fraction(1)]]
    else:
        g = rec_primitive(p)
    return _normalize([u_mul(x, c) for x in g])


def rec_divexact(a, b):
    """Quotient a / b; raises ArithmeticError when b does not divide a."""
    r = _rstrip(a)
    b = _rstrip(b)
    if not b:
        raise ZeroDivisionError("division by zero polynomial")
    db = len(b) - 1
    q = [[] for _ in range(max(len(r) - db, 0))]
    while r and len(r) - 1 >= db:
        k = len(r) - 1 - db
        f, rem = u_divmod(r[-1], b[-1])
        if rem:
            raise ArithmeticError("not divisible")
        q[k] = f
        for i, y in enumerate(b):
            r[i + k] = u_sub(r[i + k], u_mul(f, y))
        r = _rstrip(r)
    if r:
        raise ArithmeticError("not divisible")
    return _rstrip(q)


def poly_gcd(p: Polynomial, q: Polynomial) -> Polynomial:
    """Greatest common divisor of two bivariate polynomials, up to a scalar; 1 when coprime."""
    if p.nvars != 2 or q.nvars != 2:
        raise InputError("poly_gcd expects bivariate polynomials")
    g = from_rec(rec_gcd(to_rec(p), to_rec(q)))
    if g.is_constant() and not g.is_zero():
        return Polynomial.constant(2, 1)
    return g


def exact_div(p: Polynomial, q: Polynomial) -> Polynomial:
    return from_rec(rec_divexact(to_rec(p), to_rec(q)))


def divides(q: Polynomial, p: Polynomial) -> bool:
    try:
        rec_divexact(to_rec(p), to_rec(q))
        return True
    except ArithmeticError:
        return False


def content_in_alpha(p: Polynomial) -> list:
    """Content of p viewed as a polynomial in w (a monic polynomial in a)."""
    return rec_content(to_rec(p))


def primitive_part(p: Polynomial) -> Polynomial:
    return from_rec(_normalize(rec_primitive(to_rec(p))))


def squarefree_w(p: Polynomial) -> Polynomial:
    """Square-free part of the primitive part of p (factors involving w only)."""
    pp = primitive_part(p)
    if pp.degree(1) <= 0:
        return pp
    g = poly_gcd(pp, pp.partial(1))
    return from_rec(_normalize(to_rec(exact_div(pp, g))))


def _int_scaled_rec(p: Polynomial):
    den = p.denominator_lcm()
    r = to_rec(p * den)
    return [[int(x) for x in c] for c in r]


def _bareiss_det(M):
    n = len(M)
    M = [row[:] for row in M]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def _sylvester_at(P, Q, x: int):
    """Sylvester matrix in w of integer recursive polys P, Q with a = x."""
    pc = [sum(c * x**i for i, c in enumerate(col)) for col in P]
    qc = [sum(c * x**i for i, c in enumerate(col)) for col in Q]
    n, m = len(pc) - 1, len(qc) - 1
    size = n + m
    rows = []
    for i in range(m):
        row = [0] * size
        for k, c in enumerate(reversed(pc)):
            row[i + k] = c
        rows.append(row)
    for i in range(n):
        row = [0] * size
        for k, c in enumerate(reversed(qc)):
            row[i + k] = c
        rows.append(row)
    return rows


def _interpolate(xs, ys):
    """Newton divided differences, returned as a coefficient list."""
    n = len(xs)
    coef = [Fraction(y) for y in ys]
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    out: list = []
    for i in range(n - 1, -1, -1):
        out = u_add(u_mul(out, [Fraction(-xs[i]), Fraction(1)]) if out else [], [coef[i]])
    return strip(out)


def resultant_w(p: Polynomial, q: Polynomial) -> list:
    """Resultant with respect to w, as a coefficient list in a (up to a nonzero constant)."""
    P, Q = _int_scaled_rec(p), _int_scaled_rec(q)
    if not P or not Q:
        return []
    n, m = len(P) - 1, len(Q) - 1
    if n == 0 and m == 0:
        return [Fraction(1)]
    if n == 0:
        base = [Fraction(c) for c in P[0]]
        out = [Fraction(1)]
        for _ in range(m):
            out = u_mul(out, base)
        return out
    if m == 0:
        base = [Fraction(c) for c in Q[0]]
        out = [Fraction(1)]
        for _ in range(n):
            out = u_mul(out, base)
        return out
    dap = max(len(c) for c in P) - 1
    daq = max(len(c) for c in Q) - 1
    bound = min(m * dap + n * daq, p.degree() * q.degree())
    xs = list(range(bound + 1))
    ys = [_bareiss_det(_sylvester_at(P, Q, x)) for x in xs]
    return _interpolate(xs, ys)


@dataclass
class Box:
    alpha: tuple
    w: tuple


@dataclass
class BivariateSolution:
    """Isolated common zeros; ``shared_curve`` flags a common nonconstant factor."""

    points: list
    shared_curve: bool = False
    common_factor: Polynomial | None = None
    residual: float = 0.0
    alpha_roots: list = field(default_factory=list)


def eval_dense(C, a, w):
    """Evaluate sum C[i,j] a^i w^j at scalar or array (a, w)."""
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.zeros(np.broadcast_shapes(a.shape, w.shape))
    for i in range(C.shape[0] - 1, -1, -1):
        row = np.zeros_like(out)
        for j in range(C.shape[1] - 1, -1, -1):
            row = row * w + C[i, j]
        out = out * a + row
    return out


def univariate_real_roots_float(coeffs_low_high, lo, hi, imag_tol=1e-7, margin=1e-9):
    c = np.trim_zeros(np.asarray(coeffs_low_high, dtype=float), "b")
    if c.size <= 1:
        return np.array([])
    z = np.roots(c[::-1])
    keep = np.abs(z.imag) <= imag_tol * np.maximum(1.0, np.abs(z))
    r = z.real[keep]
    return np.sort(r[(r >= lo - margin) & (r <= hi + margin)])


def _newton2(P, Q, Pa, Pw, Qa, Qw, a, w, iters=60):
    for _ in range(iters):
        f = np.array([eval_dense(P, a, w), eval_dense(Q, a, w)], dtype=float)
        if max(abs(f)) <= 1e-15:
            break
        J = np.array(
            [[eval_dense(Pa, a, w), eval_dense(Pw, a, w)], [eval_dense(Qa, a, w), eval_dense(Qw, a, w)]],
            dtype=float,
        )
        step = np.linalg.lstsq(J, f, rcond=None)[0]
        a, w = a - step[0], w - step[1]
        if max(abs(step)) < 1e-16 * (1 + abs(a) + abs(w)):
            break
    res = max(abs(float(eval_dense(P, a, w))), abs(float(eval_dense(Q, a, w))))
    return float(a), float(w), res


def _dedupe(points, tol=1e-8):
    out = []
    for p in sorted(points):
        if not any(abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol for q in out):
            out.append(p)
    return out


def _subdivide(p, q, box, n=96):
    """Dense sign-change search in the box, polished by Newton."""
    P, Q = p.dense2, q.dense2
    Pa, Pw, Qa, Qw = (x.dense2 for x in (p.partial(0), p.partial(1), q.partial(0), q.partial(1)))
    a = np.linspace(box.alpha[0], box.alpha[1], n + 1)
    w = np.linspace(box.w[0], box.w[1], n + 1)
    AA, WW = np.meshgrid(a, w, indexing="ij")
    sp = np.sign(eval_dense(P, AA, WW))
    sq = np.sign(eval_dense(Q, AA, WW))

    def changes(s):
        c = np.stack([s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]])
        return (c.max(0) > 0) & (c.min(0) < 0) | (c == 0).any(0)

    cells = np.argwhere(changes(sp) & changes(sq))
    pts = []
    for i, j in cells:
        a0 = 0.5 * (a[i] + a[i + 1])
        w0 = 0.5 * (w[j] + w[j + 1])
        aa, ww, res = _newton2(P, Q, Pa, Pw, Qa, Qw, a0, w0)
        if res <= RESIDUAL_TOL and _in_box(aa, ww, box):
            pts.append((aa, ww))
    return _dedupe(pts)


def _in_box(a, w, box, tol=1e-9):
    return box.alpha[0] - tol <= a <= box.alpha[1] + tol and box.w[0] - tol <= w <= box.w[1] + tol


def _as_box(box) -> Box:
    if isinstance(box, Box):
        return box
    (a0, a1), (w0, w1) = box
    return Box((float(a0), float(a1)), (float(w0), float(w1)))


def solve_bivariate(p: Polynomial, q: Polynomial, box) -> BivariateSolution:
    """All isolated real common zeros of p and q in the box.

    Elimination by the resultant in w, then back-substitution with Newton
    polish. A nonconstant common factor is split off and flagged.
    """
    if p.is_zero() or q.is_zero():
        raise InputError("solve_bivariate needs nonzero polynomials")
    box = _as_box(box)
    g = poly_gcd(p, q)
    if not g.is_constant():
        sub = solve_bivariate(exact_div(p, g), exact_div(q, g), box)
        sub.shared_curve = True
        sub.common_factor = g
        return sub
    if p.is_constant() or q.is_constant():
        return BivariateSolution([])
    dwp, dwq = p.degree(1), q.degree(1)
    if dwp <= 0 and dwq <= 0:
        return BivariateSolution([])
    if dwp <= 0 or dwq <= 0:
        line, other = (p, q) if dwp <= 0 else (q, p)
        pts = []
        for r in real_roots_univariate(line.univariate_coeffs(0), *box.alpha):
            c = [float(x) for x in _coeffs_w_at(other, r.value)]
            for w in univariate_real_roots_float(c, *box.w):
                pts.append((r.value, float(w)))
        return BivariateSolution(_dedupe(pts))
    R = resultant_w(p, q)
    if not R:
        pts = _subdivide(p, q, box)
        return BivariateSolution(pts)
    P, Q = p.dense2, q.dense2
    Pa, Pw, Qa, Qw = (x.dense2 for x in (p.partial(0), p.partial(1), q.partial(0), q.partial(1)))
    alphas = real_roots_univariate(R, *box.alpha) if len(R) > 1 else []
    pts = []
    worst = 0.0
    failed = False
    for r in alphas:
        a0 = r.value
        cands = list(univariate_real_roots_float(_coeffs_w_at(p, a0), box.w[0] - 1e-6, box.w[1] + 1e-6, imag_tol=1e-4))
        cands += list(univariate_real_roots_float(_coeffs_w_at(q, a0), box.w[0] - 1e-6, box.w[1] + 1e-6, imag_tol=1e-4))
        scale = 1.0 + np.abs(P).sum() + np.abs(Q).sum()
        for w0 in cands:
            rough = max(abs(float(eval_dense(P, a0, w0))), abs(float(eval_dense(Q, a0, w0))))
            if rough > 1e-3 * scale:
                continue
            aa, ww, res = _newton2(P, Q, Pa, Pw, Qa, Qw, a0, float(w0))
            if res <= RESIDUAL_TOL:
                if abs(aa - a0) <= 1e-6 * (1 + abs(a0)) and _in_box(aa, ww, box):
                    pts.append((aa, ww))
            elif rough <= 1e-6 * scale:
                failed = True
                worst = max(worst, res)
    if failed:
        extra = _subdivide(p, q, box)
        pts += extra
        if not extra:
            raise SolveError("back-substitution did not converge", residual=worst)
    return BivariateSolution(_dedupe(pts), alpha_roots=[r.value for r in alphas])


def _coeffs_w_at(p: Polynomial, a0: float):
    C = p.dense2
    apow = a0 ** np.arange(C.shape[0])
    return apow @ C
