from fractions import Fraction

import numpy as np
import pytest

from dualtune.apps import (
    ActivationSpec,
    PiecewisePoly,
    activation_loss,
    build_activation_landscape,
    dual_loss_activation,
    gcn_classification_loss,
    gcn_dual_loss,
    gcn_forward,
    gcn_regression_loss,
    normalized_adjacency,
    random_gcn_instance,
)
from dualtune.apps.activation import activation_blackbox, random_activation_spec
from dualtune.apps.gcn import GcnInstance
from dualtune.envelope import trace_envelope_1d
from dualtune.errors import InputError
from dualtune.poly import Polynomial

RELU, IDENT = PiecewisePoly.named("relu"), PiecewisePoly.named("identity")


def P(s):
    return Polynomial.parse(s, 2)


def test_piecewise_poly_rejects_discontinuity():
    with pytest.raises(InputError):
        PiecewisePoly((0,), ((1,), (0, 1)))


def test_named_activations():
    z = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    assert np.array_equal(RELU(z), np.maximum(z, 0))
    assert np.array_equal(IDENT(z), z)
    assert np.array_equal(PiecewisePoly.named("hardtanh")(z), np.clip(z, -1, 1))


def test_single_point_exact_fit():
    spec = ActivationSpec(RELU, IDENT, (1,), ((1, 0),))
    l = build_activation_landscape(spec)
    H = Fraction(l.meta["H"])
    assert l.boundaries == (P("w"),)
    ge = next(r for r in l.regions if r.signs == ("ge",))
    le = next(r for r in l.regions if r.signs == ("le",))
    assert ge.piece == H - P("w^2")
    assert le.piece == H - P("(1 - a)^2 * w^2")
    p = trace_envelope_1d(l)
    assert np.allclose(p.evaluate(np.linspace(0, 1, 101)), float(H), atol=1e-12)


def test_alpha_zero_is_second_activation():
    spec = random_activation_spec(np.random.default_rng(3), T=3)
    z = np.linspace(-3, 3, 61)
    assert np.array_equal(spec.sigma(0.0, z), IDENT(z))
    assert np.array_equal(spec.sigma(1.0, z), RELU(z))


def test_landscape_matches_forward_pass():
    spec = ActivationSpec(RELU, IDENT, (1,), ((1, 1), (-1, 1)))
    l = build_activation_landscape(spec)
    H = float(Fraction(l.meta["H"]))
    rng = np.random.default_rng(0)
    A, Wv = rng.uniform(0, 1, 1000), rng.uniform(-2, 2, 1000)
    assert np.max(np.abs((H - activation_loss(spec, A, Wv[:, None])) - l.evaluate_array(A, Wv))) <= 1e-10


def test_two_point_dual_loss_at_one():
    spec = ActivationSpec(RELU, IDENT, (1,), ((1, 1), (-1, 1)))
    v, tag = dual_loss_activation(spec, [1.0])
    assert tag == "exact"
    assert abs(v[0] - 0.5) <= 1e-3


def test_wider_network_uses_numeric_tracer():
    spec = ActivationSpec(RELU, IDENT, (2, 1), ((1, 1), (-1, 1)))
    assert spec.n_params == 4
    with pytest.raises(InputError):
        build_activation_landscape(spec)
    v, tag = dual_loss_activation(spec, [0.0, 1.0])
    assert tag == "estimated"
    # two ReLU units summed fit both points exactly at a = 1
    assert v[1] <= 1e-6
    bb = activation_blackbox(spec)
    assert bb.H - bb.fn(1.0, np.array([[1.0, -1.0, 1.0, 1.0]]))[0] == pytest.approx(0.0, abs=1e-12)


def test_spec_round_trip():
    spec = random_activation_spec(np.random.default_rng(1), T=4, o1="leaky", o2="hardtanh")
    assert ActivationSpec.from_dict(spec.to_dict()) == spec


def two_node():
    return GcnInstance([[1], [-1]], [[0, 1], [1, 0]], (0, 1), (1, 0), Delta=1)


def test_adjacency_example():
    Ah = normalized_adjacency(two_node(), 1.0)
    assert np.allclose(Ah, 0.5)
    assert np.allclose(Ah.sum(axis=1), 1.0)


def test_forward_examples():
    inst = two_node()
    rng = np.random.default_rng(0)
    for _ in range(5):
        Z = gcn_forward(inst, 1.0, rng.normal(size=(1, 1)), rng.normal(size=(1, 2)))
        assert np.allclose(Z, 0)
    g = random_gcn_instance(2)
    assert np.allclose(gcn_forward(g, 0.7, np.zeros((1, 1)), rng.normal(size=(1, 2))), 0)


def test_zero_scores_predict_first_class():
    # ties go to class index 0, so labels (1, 0) give loss 1/2
    assert gcn_classification_loss(two_node(), 1.0, [[0.3]], [[1.0, -2.0]]) == 0.5


def test_planted_separable_instance():
    # zero distances make the kernel tiny off the diagonal, so each node mostly sees itself.
    # Scores are nonnegative after ReLU and smoothing, so two classes need two hidden units:
    # one fires on positive smoothed features, the other on negative ones.
    inst = GcnInstance([[2], [-2], [2]], np.zeros((3, 3)), (0, 1, 2), (1, 0, 1), Delta=1, d0=2)
    a = 0.01
    assert np.all(np.diag(normalized_adjacency(inst, a)) > 0.5)
    W0, W1 = [[1.0, -1.0]], [[0.0, 1.0], [1.0, 0.0]]
    assert gcn_classification_loss(inst, a, W0, W1) == 0.0
    # a 5-point axis contains the planted weights
    assert gcn_dual_loss(inst, [a], method="grid", res=5)[0][0] == 0.0


def test_symmetric_instance_dual_loss_constant():
    inst = two_node()
    a = np.linspace(0.01, 5, 200)
    v, tag = gcn_dual_loss(inst, a)
    assert tag == "sign-pattern"
    assert np.all(v == 0.5)
    g, _ = gcn_dual_loss(inst, a[::40], method="grid", res=11)
    assert np.all(g == 0.5)


def test_single_labeled_vertex():
    for s in range(10):
        g = random_gcn_instance(s)
        one = GcnInstance(g.X, g.delta, g.labeled[:1], g.labels[:1], g.Delta)
        v, _ = gcn_dual_loss(one, np.linspace(0.01, 5, 50))
        assert set(np.unique(v)) <= {0.0, 1.0}


def test_sign_pattern_matches_weight_grid():
    a = np.array([0.05, 0.5, 1.7, 4.0])
    for s in range(15):
        g = random_gcn_instance(s)
        exact, _ = gcn_dual_loss(g, a, method="sign-pattern")
        grid, _ = gcn_dual_loss(g, a, method="grid", res=41)
        assert np.array_equal(exact, grid), s


def test_regression_losses():
    inst = GcnInstance([[1], [-1]], [[0, 1], [1, 0]], (0, 1), (0.5, -2.0), Delta=1, task="regression")
    rng = np.random.default_rng(1)
    W0, W1 = rng.normal(size=(1, 1)), rng.normal(size=(1, 1))
    assert gcn_regression_loss(inst, 0.8, W0, W1) == pytest.approx((0.25 + 4.0) / 2)
    zero_y = GcnInstance(inst.X, inst.delta, (0, 1), (0.0, 0.0), task="regression")
    assert gcn_regression_loss(zero_y, 0.3, np.zeros((1, 1)), W1) == 0.0


def test_gcn_round_trip():
    g = random_gcn_instance(7)
    g2 = GcnInstance.from_dict(g.to_dict())
    assert np.array_equal(g.X, g2.X) and g.labels == g2.labels and g.Delta == g2.Delta


def test_gcn_rejects_bad_instances():
    with pytest.raises(InputError):
        GcnInstance([[1], [2]], [[0, 1], [2, 0]], (0,), (1,))
    with pytest.raises(InputError):
        GcnInstance([[1], [2]], [[0, 1], [1, 0]], (0,), (3,))
    with pytest.raises(InputError):
        normalized_adjacency(two_node(), 0.0)


def test_angular_witness_reproduces_loss():
    from dualtune.apps.gcn import _angular_dual

    a = np.linspace(0.01, 5, 5)
    for s in range(20):
        g = random_gcn_instance(s, d0=2)
        best, wit = _angular_dual(g, a, witness=True)
        for al, e, (c0, c1) in zip(a, best, wit):
            W1 = [[c0 / 2, -c0 / 2], [c1 / 2, -c1 / 2]]
            assert gcn_classification_loss(g, al, [[1.0, -1.0]], W1) == e


def test_angular_never_beaten_by_weight_search():
    rng = np.random.default_rng(0)
    a = np.array([0.05, 1.3, 4.2])
    for s in range(8):
        g = random_gcn_instance(s, d0=2)
        exact, tag = gcn_dual_loss(g, a)
        assert tag == "angular"
        grid, _ = gcn_dual_loss(g, a, method="grid", res=7)
        assert np.all(exact <= grid)
        W = rng.uniform(-1, 1, size=(3000, g.n_weights))
        for al, e in zip(a, exact):
            assert min(gcn_classification_loss(g, al, *g.unpack(w)) for w in W[:300]) >= e


def test_exact_ties_not_split_by_rounding():
    # both hidden units carry the same channel with equal output weights: every score ties
    g = random_gcn_instance(5, d0=2)
    W0, W1 = [[-1.0, -1.0]], [[-0.25, -0.75], [0.5, 1.0]]
    Z = gcn_forward(g, 0.01, W0, W1)
    assert np.allclose(Z[:, 0], Z[:, 1])
    assert gcn_classification_loss(g, 0.01, W0, W1) == np.mean(np.array(g.labels) != 0)
