import json
from fractions import Fraction

import numpy as np
import pytest

from dualtune.envelope import trace_envelope, trace_envelope_1d
from dualtune.families import random_constant_landscape, random_single_piece
from dualtune.landscape import make_landscape, single_piece
from dualtune.oscillation import count_oscillations, pdim_upper, sample_oscillations, verify_lemma32
from dualtune.poly import Polynomial

QUARTIC = "a*(a - 1)*(a - 2)*(a - 3) - w^2"


def brute_oscillations(v, n_z=10_000):
    """Dense threshold sweep: max over z of sign changes of 1{v >= z}."""
    zs = np.linspace(v.min(), v.max(), n_z)
    ind = v[None, :] >= zs[:, None]
    return int(np.max(np.sum(ind[:, 1:] != ind[:, :-1], axis=1)))


@pytest.fixture
def quartic():
    return single_piece(Polynomial.parse(QUARTIC, 2), alpha=(Fraction(-1, 2), Fraction(7, 2)), w=((-1, 1),))


def test_brute_oracle_on_quartic_samples():
    a = np.linspace(-0.5, 3.5, 20001)
    v = a * (a - 1) * (a - 2) * (a - 3)
    assert brute_oscillations(v) == 4
    assert sample_oscillations(v)[0] == 4


def test_constant_zero_oscillations():
    assert count_oscillations(np.full(50, 2.0)).oscillations == 0
    l = make_landscape((0, 1), ((-1, 1),), "constant", [], [((), Fraction(1))])
    assert count_oscillations(trace_envelope(l)).oscillations == 0


def test_quartic_profile(quartic):
    p = trace_envelope_1d(quartic)
    rep = count_oscillations(p)
    assert rep.oscillations == 4
    assert (rep.B1, rep.B2) == (0, 1)
    assert rep.osc_bound == 4
    ok, cert = verify_lemma32(p)
    assert ok


def test_step_function():
    v = np.repeat([0.0, 1.0, 0.0, 1.0], 25)
    rep = count_oscillations(v)
    assert rep.B1 == 3
    assert rep.oscillations == 3
    assert 0 < rep.z <= 1


def test_step_profile_from_constant_landscape():
    # vertical strips a < 1/4, 1/4..1/2, 1/2..3/4, > 3/4 with values 0, 1, 0, 1
    a = Polynomial.variable(2, 0)
    cuts = [a - Fraction(k, 4) for k in (1, 2, 3)]
    regions = [
        (["le", "free", "free"], Fraction(0)),
        (["ge", "le", "free"], Fraction(1)),
        (["ge", "ge", "le"], Fraction(0)),
        (["ge", "ge", "ge"], Fraction(1)),
    ]
    l = make_landscape((0, 1), ((-1, 1),), "constant", cuts, regions)
    p = trace_envelope(l)
    rep = count_oscillations(p)
    assert (rep.B1, rep.oscillations) == (3, 3)
    assert rep.oscillations <= rep.B1


def test_pdim_upper_examples():
    assert pdim_upper(0, c=2) == 2
    assert pdim_upper(2, c=2) == 4
    assert pdim_upper(14, c=2) == 8


def test_constant_verify_lemma32():
    l = make_landscape((0, 1), ((-1, 1),), "constant", [], [((), Fraction(0))])
    ok, cert = verify_lemma32(trace_envelope(l))
    assert ok


@pytest.mark.parametrize("delta", [2, 3, 4, 5])
def test_exact_count_matches_dense_samples(delta):
    for seed in range(15):
        p = trace_envelope_1d(random_single_piece(delta, seed))
        dense = p.evaluate(np.linspace(0, 1, 20001))
        assert count_oscillations(p).oscillations == sample_oscillations(dense)[0]
        assert verify_lemma32(p)[0]


def test_piecewise_constant_profiles_obey_jump_count():
    for seed in range(15):
        p = trace_envelope(random_constant_landscape(seed))
        rep = count_oscillations(p)
        assert rep.oscillations <= rep.B1
        assert verify_lemma32(p)[0]


def test_report_json(tmp_path, quartic):
    rep = count_oscillations(trace_envelope_1d(quartic))
    rep.to_json(tmp_path / "o.json")
    doc = json.loads((tmp_path / "o.json").read_text())
    assert doc["oscillations"] == 4 and doc["B2"] == 1
