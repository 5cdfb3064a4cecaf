import itertools
from fractions import Fraction

import numpy as np
import pytest

from dualtune.datadriven import (
    EnvelopeBank,
    InstanceDistribution,
    erm_tune,
    fit_slope,
    gap_curve,
    shattering_lower_bound,
    shattering_search,
)
from dualtune.envelope import single_piece_envelope, trace_envelope
from dualtune.errors import InputError
from dualtune.families import Degree3Family, random_constant_landscape
from dualtune.landscape import single_piece
from dualtune.poly import Polynomial


def P(s):
    return Polynomial.parse(s, 2)


def constant_dist(l):
    return InstanceDistribution(lambda rng: l, (0.0, 1.0), name="fixed")


def alternating_dist(ls):
    it = itertools.cycle(ls)
    return InstanceDistribution(lambda rng: next(it), (0.0, 1.0), name="alternating")


def test_bank_fast_path_matches_single_envelope():
    insts = InstanceDistribution.from_family(Degree3Family()).draw(6, 3)
    bank = EnvelopeBank(insts)
    a = np.linspace(0, 1, 301)
    V = bank.values(a)
    for i, l in enumerate(insts):
        assert np.max(np.abs(V[i] - single_piece_envelope(l, a)[0])) < 1e-12
        assert np.max(np.abs(V[i] - trace_envelope(l).evaluate(a))) < 1e-8


def test_bank_traces_constant_landscapes():
    insts = [random_constant_landscape(s) for s in range(3)]
    bank = EnvelopeBank(insts)
    a = np.linspace(0, 1, 51)
    for i, l in enumerate(insts):
        assert np.array_equal(bank.values(a)[i], trace_envelope(l).evaluate(a))


def test_identical_instances_recover_single_argmax(cubic):
    # single argmax of max(1/3 - a, 2/3 a^1.5) on [0, 1] is a = 1
    for mode in ("grid", "exact"):
        rep = erm_tune(constant_dist(cubic), 5, seed=0, alpha_eval=mode)
        assert rep.alpha_hat == pytest.approx(1.0, abs=1e-9)
        assert abs(rep.gap) <= 1e-12


def test_single_cubic_instance(cubic):
    rep = erm_tune(constant_dist(cubic), 1, seed=4)
    assert rep.alpha_hat == pytest.approx(1.0, abs=1e-9)
    assert rep.train_value == pytest.approx(2 / 3, abs=1e-12)


def test_symmetric_mixture_ties_to_smallest_alpha():
    up, down = single_piece(P("a - w^2")), single_piece(P("1 - a - w^2"))
    for mode in ("grid", "exact"):
        rep = erm_tune(alternating_dist([up, down]), 2, seed=0, alpha_eval=mode, heldout=EnvelopeBank([up, down]))
        assert rep.alpha_hat == 0.0
        assert rep.train_value == pytest.approx(0.5, abs=1e-12)


def test_erm_optimal_on_training_sample():
    dist = InstanceDistribution.from_family(Degree3Family())
    rep = erm_tune(dist, 8, seed=2)
    bank = EnvelopeBank(dist.draw(8, [2, 0]))
    assert rep.train_value >= bank.mean(np.linspace(0, 1, 2001)).max() - 1e-12


def test_deterministic_distribution_has_zero_gap(cubic):
    gc = gap_curve(constant_dist(cubic), [2, 4, 8], trials=10, seed=0, grid=401)
    assert all(abs(g) <= 1e-12 for g in gc.mean_gap)


def test_gap_curve_reproducible():
    dist = InstanceDistribution.from_family(Degree3Family())
    a = gap_curve(dist, [4, 16], trials=10, seed=5, grid=401)
    b = gap_curve(dist, [4, 16], trials=10, seed=5, grid=401)
    assert a.mean_gap == b.mean_gap and a.std_gap == b.std_gap
    assert [r.alpha_hat for r in a.reports] == [r.alpha_hat for r in b.reports]


def test_gap_curve_rejects_few_trials(cubic):
    with pytest.raises(InputError):
        gap_curve(constant_dist(cubic), [4], trials=9)


def test_fit_slope_on_power_law():
    ms = [4, 16, 64, 256]
    assert fit_slope(ms, [m**-0.5 for m in ms]) == pytest.approx(-0.5)
    assert np.isnan(fit_slope([4], [0.1]))


def brute_pdim(U, k):
    """Is any k-subset shattered with some choice of per-row thresholds from the row values?"""
    n = U.shape[0]
    for subset in itertools.combinations(range(n), k):
        cands = [np.unique(U[i]) for i in subset]
        for th in itertools.product(*cands):
            pats = {tuple(U[i, j] >= t for i, t in zip(subset, th)) for j in range(U.shape[1])}
            if len(pats) == 2**k:
                return True
    return False


def test_constant_in_x_class_has_pdim_one():
    a = np.linspace(0, 1, 41)
    U = np.tile(a, (6, 1))
    assert not brute_pdim(U, 2)
    res = shattering_search(U, 3)
    assert res.size == 1 and res.exhaustive


def test_threshold_class_has_pdim_one():
    xs = np.linspace(0.05, 0.95, 8)
    a = np.linspace(0, 1, 101)
    U = (xs[:, None] >= a[None, :]).astype(float)
    assert not brute_pdim(U, 2)
    assert shattering_lower_bound(U, 3) == 1


def test_two_independent_bits_shatter():
    # rows that realize all four patterns across the columns
    U = np.array([[0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 1.0]])
    assert brute_pdim(U, 2)
    assert shattering_lower_bound(U, 2) == 2


def test_shattering_empty_pool_and_budget():
    assert shattering_lower_bound(np.zeros((0, 5)), 3) == 0
    rng = np.random.default_rng(0)
    res = shattering_search(rng.uniform(size=(12, 64)), 4, budget=3)
    assert not res.exhaustive
    with pytest.raises(InputError):
        shattering_search(np.zeros((2, 5)), 3)
