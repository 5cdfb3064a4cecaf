import json
import math
from fractions import Fraction

import numpy as np
import pytest

from dualtune.bounds import (
    gcn_component_bound,
    lemma51_bounds,
    sauer_shelah_factor,
    theorem55_bounds,
    warren_components,
    warren_partition_bound,
)
from dualtune.errors import InputError
from dualtune.landscape import (
    evaluate_landscape,
    flatness_surrogate,
    load_landscape,
    perturb_landscape,
    region_components_probe,
    save_landscape,
    single_piece,
)
from dualtune.poly import Polynomial

SINGLE = {
    "version": 1,
    "domain": {"alpha": [0, 1], "w": [[-1, 1]]},
    "kind": "polynomial",
    "regions": [{"signs": [], "piece": "-(w - a)^2"}],
}
CIRCLE = {
    "version": 1,
    "domain": {"alpha": [0, 1], "w": [[-1, 1]]},
    "kind": "constant",
    "boundaries": ["(a - 1/2)^2 + w^2 - 1/4"],
    "regions": [{"signs": ["le"], "piece": 1}, {"signs": ["ge"], "piece": 0}],
}


def P(s, n=2):
    return Polynomial.parse(s, n)


def test_load_single_piece():
    l = load_landscape(SINGLE)
    assert (l.N, l.M, l.delta_p) == (1, 0, 2)


def test_load_circle():
    l = load_landscape(CIRCLE)
    assert (l.N, l.M, l.delta_b) == (2, 1, 2)


def test_unknown_boundary_rejected():
    doc = json.loads(json.dumps(CIRCLE))
    doc["regions"][0]["signs"] = ["le", "ge"]
    with pytest.raises(InputError, match="unknown boundary"):
        load_landscape(doc)


def test_malformed_json_rejected():
    with pytest.raises(InputError):
        load_landscape("{not json")


def test_coverage_gap_rejected():
    doc = json.loads(json.dumps(CIRCLE))
    doc["regions"] = doc["regions"][:1]
    with pytest.raises(InputError):
        load_landscape(doc)


def test_evaluate_examples():
    assert evaluate_landscape(load_landscape(SINGLE), Fraction(1, 2), [Fraction(1, 2)]) == 0
    c = load_landscape(CIRCLE)
    assert evaluate_landscape(c, Fraction(1, 2), [0]) == 1
    assert evaluate_landscape(c, Fraction(99, 100), [Fraction(2, 5)]) == 0


def test_round_trip():
    for doc in (SINGLE, CIRCLE):
        l = load_landscape(doc)
        l2 = load_landscape(save_landscape(l))
        assert l2.boundaries == l.boundaries
        assert [r.piece for r in l2.regions] == [r.piece for r in l.regions]
        assert [r.signs for r in l2.regions] == [r.signs for r in l.regions]


def test_evaluate_array_matches_exact():
    l = load_landscape(CIRCLE)
    rng = np.random.default_rng(1)
    A, Wv = rng.uniform(0, 1, 200), rng.uniform(-1, 1, 200)
    exact = [float(evaluate_landscape(l, Fraction(x), [Fraction(y)])) for x, y in zip(A, Wv)]
    assert np.array_equal(l.evaluate_array(A, Wv), exact)


def test_perturb_examples():
    zero = single_piece(Polynomial.constant(2, 0))
    pl, bound = perturb_landscape(zero, Fraction(1, 10))
    assert pl.pieces[0] == P("1/10*a + 1/10*w")
    assert bound == Fraction(2, 5)
    with pytest.raises(InputError):
        perturb_landscape(zero, 0)


def test_flatness_examples():
    s = flatness_surrogate(single_piece(P("-w^2")), Fraction(1, 2))
    assert s.pieces[0] == P("-w^2 - 2")
    lin = single_piece(P("3*a*w - w + a^2"))
    assert flatness_surrogate(lin, 5).pieces[0] == lin.pieces[0]
    q = flatness_surrogate(single_piece(P("-w^4")), 1)
    assert q.pieces[0] == P("-145*w^4")
    assert q.pieces[0].eval([0, 1]) == -145


def test_region_components_probe(circle):
    # radius 1/4: inside and outside are both connected
    assert region_components_probe(circle) == [1, 1]
    # radius 1/2 touches a = 0 and a = 1, cutting the outside into a top and a bottom part
    assert region_components_probe(load_landscape(CIRCLE)) == [1, 2]


def test_warren_examples():
    assert warren_components(2, 2) == 8
    assert warren_components(1, 1) == 2
    assert warren_components(3, 2) == 18
    assert warren_partition_bound(4, 2, 2) == 16
    assert warren_partition_bound(2, 1, 2) == 1
    with pytest.raises(InputError):
        warren_partition_bound(1, 5, 2)


def test_lemma51_examples():
    b = lemma51_bounds(2)
    assert (b.discontinuity_bound, b.local_max_bound) == (8, 8)
    b = lemma51_bounds(1)
    assert (b.discontinuity_bound, b.local_max_bound) == (4, 3)
    assert lemma51_bounds(4).discontinuity_bound == 22
    assert b.oscillation_bound == 2 * 3 + 3 * 4 + 2
    with pytest.raises(InputError):
        lemma51_bounds(0)


def test_theorem55_m0_convention():
    b = theorem55_bounds(1, 0, 1, 2)
    assert b.discontinuity_bound == 64
    assert sauer_shelah_factor(0, 1) == 1.0
    assert sauer_shelah_factor(3, 1) == pytest.approx((math.e * 3 / 2) ** 2)


@pytest.mark.parametrize("delta", range(2, 9))
def test_theorem55_dominates_lemma51(delta):
    t, l = theorem55_bounds(1, 0, 1, delta), lemma51_bounds(delta)
    assert t.discontinuity_bound >= l.discontinuity_bound
    assert t.local_max_bound >= l.local_max_bound


def test_gcn_component_bound_positive_and_monotone():
    b1 = gcn_component_bound(2, 2, 1, 1, 1)
    b2 = gcn_component_bound(4, 2, 1, 1, 1)
    assert 0 < b1 < b2


def test_theorem55_linear_piece_unit_constants():
    # with every hidden constant at 1 the general formula drops below the 1-D count for linear pieces
    assert theorem55_bounds(1, 0, 1, 1).discontinuity_bound == 1
    assert lemma51_bounds(1).discontinuity_bound == 4
