from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualtune.bivariate import divides, poly_gcd, resultant_w, solve_bivariate
from dualtune.errors import DegenerateError, InputError
from dualtune.poly import Polynomial, as_fraction
from dualtune.roots import count_real_roots, real_roots_univariate


def P(s, n=2):
    return Polynomial.parse(s, n)


def test_eval_examples():
    assert P("a*w").eval([2, 3]) == 6
    assert Polynomial.constant(2, 0).eval([Fraction(7, 3), -1]) == 0
    assert P("a^2 + w^2 - 1").eval([0, 1]) == 0


def test_eval_exact_on_rationals():
    v = P("1/3*a*w - w^3").eval([Fraction(1, 2), Fraction(2, 3)])
    assert v == Fraction(1, 9) - Fraction(8, 27)


def test_partial_examples():
    assert P("a^2*w^3").partial(1) == P("3*a^2*w^2")
    assert Polynomial.constant(2, 5).partial(0).is_zero()
    assert P("a*w - 1/3*w^3").partial(1) == P("a - w^2")


@settings(max_examples=50, deadline=None)
@given(
    st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), st.integers(-5, 5), max_size=6),
    st.fractions(-2, 2, max_denominator=7),
    st.fractions(-2, 2, max_denominator=7),
)
def test_arithmetic_matches_pointwise(terms, x, y):
    p = Polynomial(2, terms)
    q = P("a - 2*w + 1")
    pt = [x, y]
    assert (p * q).eval(pt) == p.eval(pt) * q.eval(pt)
    assert (p + q).eval(pt) == p.eval(pt) + q.eval(pt)
    assert (p - q).eval(pt) == p.eval(pt) - q.eval(pt)
    assert (q**3).eval(pt) == q.eval(pt) ** 3


def test_eval_array_matches_exact():
    p = P("3*a^2*w - 1/2*w^3 + a")
    rng = np.random.default_rng(0)
    A, Wv = rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50)
    exact = np.array([float(p.eval([Fraction(x), Fraction(y)])) for x, y in zip(A, Wv)])
    assert np.max(np.abs(p.eval_array(A, Wv) - exact)) < 1e-13


def test_parse_errors():
    with pytest.raises(InputError):
        P("a +* w")
    with pytest.raises(InputError):
        as_fraction("1/0")


def _roots(p, lo, hi):
    return [r.value for r in real_roots_univariate(P(p, 1) if isinstance(p, str) else p, lo, hi)]


def test_real_roots_examples():
    assert np.allclose(_roots(P("w^2 - 1"), -2, 2), [-1, 1], atol=1e-12)
    assert _roots(P("w^2 + 1"), -2, 2) == []
    assert np.allclose(_roots(P("w*(w-1)*(w-2)"), Fraction(1, 2), 3), [1, 2], atol=1e-12)


def test_real_roots_certified_intervals():
    roots = real_roots_univariate([-2, 0, 1], 0, 2)  # w^2 - 2
    (r,) = roots
    assert r.lo <= r.hi and r.width <= Fraction(1, 10**12)
    assert r.lo**2 <= 2 <= r.hi**2


def test_real_roots_multiplicity_and_zero():
    (r,) = real_roots_univariate([1, -2, 1], -5, 5)  # (w-1)^2
    assert r.multiplicity == 2 and abs(r.value - 1) < 1e-12
    with pytest.raises(DegenerateError):
        real_roots_univariate([0, 0], 0, 1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.fractions(-3, 3, max_denominator=5), min_size=1, max_size=5, unique=True))
def test_real_roots_recover_planted(rs):
    c = [Fraction(1)]
    for r in rs:
        c = [(c[i - 1] if i else 0) - r * (c[i] if i < len(c) else 0) for i in range(len(c) + 1)]
    got = real_roots_univariate(c, -4, 4)
    assert len(got) == len(rs) == count_real_roots(c, -4, 4)
    for g, r in zip(got, sorted(rs)):
        assert g.lo <= r <= g.hi


def test_solve_bivariate_examples():
    box = ((-2, 2), (-2, 2))
    assert solve_bivariate(P("w - a"), Polynomial.constant(2, 1), box).points == []
    pts = sorted(solve_bivariate(P("a^2 + w^2 - 1"), P("2*w"), box).points)
    assert np.allclose(pts, [(-1, 0), (1, 0)], atol=1e-10)
    pts = solve_bivariate(P("a - w^2"), P("-2*w"), box).points
    assert np.allclose(pts, [(0, 0)], atol=1e-10)


def test_solve_bivariate_flags_shared_curve():
    res = solve_bivariate(P("(w - a)*(w + 1)"), P("(w - a)*(a + 2)"), ((-1, 1), (-1, 1)))
    assert res.shared_curve


def _same_up_to_scalar(p, q):
    return divides(p, q) and divides(q, p)


def test_gcd_examples():
    assert _same_up_to_scalar(poly_gcd(P("w^2"), P("w^3")), P("w^2"))
    assert poly_gcd(P("w - a"), P("w + a")).is_constant()
    assert _same_up_to_scalar(poly_gcd(P("(w-a)*(w+1)"), P("(w-a)*(a+2)")), P("w - a"))


def test_resultant_vanishes_at_common_alpha():
    # w - a and w^2 - 1/4 share a root exactly when a = +-1/2
    r = resultant_w(P("w - a"), P("w^2 - 1/4"))
    vals = [sum(Fraction(c) * x**i for i, c in enumerate(r)) for x in (Fraction(1, 2), Fraction(-1, 2), Fraction(0))]
    assert vals[0] == 0 and vals[1] == 0 and vals[2] != 0
