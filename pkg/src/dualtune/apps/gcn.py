"""Two-layer GCN with a polynomial distance kernel A_ij = (delta_ij + a)^Delta."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from ..envelope import BlackBox
from ..errors import InputError


@dataclass
class GcnInstance:
    X: np.ndarray  # n x d features
    delta: np.ndarray  # n x n distances
    labeled: tuple
    labels: tuple
    Delta: int = 1
    d0: int = 1
    F: int = 2
    box: tuple = (-1.0, 1.0)
    task: str = "classification"
    alpha_range: tuple = (0.01, 5.0)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.delta = np.asarray(self.delta, dtype=float)
        n = self.X.shape[0]
        if self.delta.shape != (n, n):
            raise InputError(f"distance matrix must be {n}x{n}")
        if np.any(self.delta < 0) or not np.allclose(self.delta, self.delta.T):
            raise InputError("distances must be symmetric and nonnegative")
        self.labeled = tuple(int(i) for i in self.labeled)
        if not self.labeled:
            raise InputError("need at least one labeled vertex")
        if len(self.labels) != len(self.labeled):
            raise InputError("one label per labeled vertex")
        if self.task == "classification":
            self.labels = tuple(int(y) for y in self.labels)
            if any(not 0 <= y < self.F for y in self.labels):
                raise InputError(f"labels must lie in 0..{self.F - 1}")
        elif self.task == "regression":
            self.labels = tuple(float(y) for y in self.labels)
        else:
            raise InputError(f"unknown task {self.task!r}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def out_dim(self) -> int:
        return self.F if self.task == "classification" else 1

    @property
    def n_weights(self) -> int:
        return self.d * self.d0 + self.d0 * self.out_dim

    def unpack(self, w):
        w = np.asarray(w, dtype=float)
        k = self.d * self.d0
        W0 = w[..., :k].reshape(w.shape[:-1] + (self.d, self.d0))
        W1 = w[..., k:].reshape(w.shape[:-1] + (self.d0, self.out_dim))
        return W0, W1

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "X": self.X.tolist(),
            "delta": self.delta.tolist(),
            "labeled": list(self.labeled),
            "labels": list(self.labels),
            "Delta": self.Delta,
            "widths": {"d0": self.d0, "F": self.F},
            "box": list(self.box),
            "task": self.task,
            "alpha_range": list(self.alpha_range),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "GcnInstance":
        try:
            widths = doc.get("widths", {})
            return cls(
                doc["X"],
                doc["delta"],
                tuple(doc["labeled"]),
                tuple(doc["labels"]),
                int(doc.get("Delta", 1)),
                int(widths.get("d0", 1)),
                int(widths.get("F", 2)),
                tuple(doc.get("box", (-1.0, 1.0))),
                doc.get("task", "classification"),
                tuple(doc.get("alpha_range", (0.01, 5.0))),
            )
        except KeyError as exc:
            raise InputError(f"GCN instance is missing {exc}") from None

    # dual utility for the tuner: u = 1 - dual 0-1 loss
    def ustar(self, alphas):
        return 1.0 - gcn_dual_loss(self, alphas)[0]

    def breakpoints(self):
        a = np.linspace(*self.alpha_range, 2001)
        v = self.ustar(a)
        jumps = np.flatnonzero(np.diff(v) != 0)
        return [float(0.5 * (a[i] + a[i + 1])) for i in jumps]


def normalized_adjacency(inst: GcnInstance, alpha) -> np.ndarray:
    """Row-normalized D^-1 (A + I) for one alpha or an array of alphas (leading axis)."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise InputError("alpha must be positive")
    A = (inst.delta[None, :, :] + alpha.reshape(-1, 1, 1)) ** inst.Delta
    At = A + np.eye(inst.n)[None]
    rows = At.sum(axis=2, keepdims=True)
    assert np.all(rows > 0), "row sums vanish"
    Ah = At / rows
    return Ah[0] if alpha.ndim == 0 else Ah


def gcn_forward(inst: GcnInstance, alpha, W0, W1) -> np.ndarray:
    """Z = Ah ReLU(Ah X W0) W1."""
    Ah = normalized_adjacency(inst, alpha)
    H = np.maximum(Ah @ inst.X @ np.asarray(W0, dtype=float), 0.0)
    return Ah @ H @ np.asarray(W1, dtype=float)


def predict(Z) -> np.ndarray:
    """Row argmax; ties go to the lowest class index.

    Scores within rounding of the row max count as tied, so exact ties in real
    arithmetic are not split by float noise.
    """
    Z = np.asarray(Z, dtype=float)
    top = Z.max(axis=-1, keepdims=True)
    return np.argmax(Z >= top - 1e-12 * (1.0 + np.abs(top)), axis=-1)


def gcn_classification_loss(inst: GcnInstance, alpha, W0, W1) -> float:
    Z = gcn_forward(inst, alpha, W0, W1)
    yhat = predict(Z)[list(inst.labeled)]
    return float(np.mean(yhat != np.array(inst.labels)))


def gcn_regression_loss(inst: GcnInstance, alpha, W0, W1) -> float:
    Z = gcn_forward(inst, alpha, W0, W1)[:, 0]
    return float(np.mean((Z[list(inst.labeled)] - np.array(inst.labels)) ** 2))


def _sign_pattern_dual(inst: GcnInstance, alphas) -> np.ndarray:
    """Exact min of the 0-1 loss for d = d0 = 1, F = 2.

    Positive scaling of w0 or of u0 - u1 never changes a prediction, so the
    loss only depends on sign(w0) and sign(u0 - u1): nine cases.
    """
    Ah = normalized_adjacency(inst, np.atleast_1d(alphas))
    x = inst.X[:, 0]
    ax = Ah @ x  # (A, n)
    lab = np.array(inst.labeled)
    y = np.array(inst.labels)
    best = np.full(ax.shape[0], np.inf)
    for sw in (1.0, 0.0, -1.0):
        s = np.maximum(sw * ax, 0.0)
        r = np.einsum("aij,aj->ai", Ah, s)  # class-0 score minus class-1 score per unit (u0 - u1)
        for su in (1.0, 0.0, -1.0):
            margin = r * su
            yhat = np.where(margin >= 0, 0, 1)  # a tie goes to class 0
            loss = np.mean(yhat[:, lab] != y[None, :], axis=1)
            best = np.minimum(best, loss)
    return best


def _angular_dual(inst: GcnInstance, alphas, witness: bool = False):
    """Exact min of the 0-1 loss for d = 1, d0 >= 2, F = 2.

    Every hidden unit is a positive multiple of relu(Ah x) or relu(-Ah x) (or zero),
    so the class-0 minus class-1 score is c . g_i with g_i the two smoothed
    channels at node i and c free in the plane. Predictions only change where c
    turns perpendicular to some g_i. All g_i lie in the closed first quadrant, so
    no two are antiparallel and a tie never gives a labeling that a nearby generic
    direction misses: the midpoints between critical angles plus c = 0 suffice.
    """
    lab = np.array(inst.labeled)
    y = np.array(inst.labels)
    zero_loss = float(np.mean(y != 0))  # c = 0: every score ties, class 0
    best = np.empty(len(alphas))
    wit = []
    for t, a in enumerate(alphas):
        Ah = normalized_adjacency(inst, a)
        ax = Ah @ inst.X[:, 0]
        G = np.stack([Ah @ np.maximum(ax, 0.0), Ah @ np.maximum(-ax, 0.0)], axis=1)[lab]  # (L, 2)
        phi = np.arctan2(G[:, 1], G[:, 0])
        crit = np.unique(np.mod(np.concatenate([phi + np.pi / 2, phi - np.pi / 2]), 2 * np.pi))
        th = 0.5 * (crit + np.roll(crit, -1))
        th[-1] += np.pi  # wrap-around gap
        C = np.stack([np.cos(th), np.sin(th)], axis=1)
        yhat = np.where(C @ G.T >= 0, 0, 1)
        loss = np.mean(yhat != y[None, :], axis=1)
        k = int(np.argmin(loss))
        if loss[k] < zero_loss:
            best[t] = loss[k]
            wit.append((float(C[k, 0]), float(C[k, 1])))
        else:
            best[t] = zero_loss
            wit.append((0.0, 0.0))
    return (best, wit) if witness else best


def _grid_dual(inst: GcnInstance, alphas, res: int, cap: int = 2_000_000, seed: int = 0):
    k = inst.n_weights
    lo, hi = inst.box
    if res**k <= cap:
        axis = np.linspace(lo, hi, res)
        Wg = np.array(list(itertools.product(axis, repeat=k)))
        method = "grid"
    else:
        Wg = np.random.default_rng(seed).uniform(lo, hi, size=(cap // 10, k))
        method = "sampled"
    W0, W1 = inst.unpack(Wg)  # (G, d, d0), (G, d0, F)
    lab = list(inst.labeled)
    y = np.array(inst.labels)
    out = np.empty(len(alphas))
    for t, a in enumerate(alphas):
        Ah = normalized_adjacency(inst, a)
        AX = Ah @ inst.X  # n x d
        H = np.maximum(np.einsum("nd,gde->gne", AX, W0), 0.0)
        Z = np.einsum("mn,gne,gef->gmf", Ah, H, W1)
        if inst.task == "classification":
            out[t] = np.mean(predict(Z)[:, lab] != y[None, :], axis=1).min()
        else:
            out[t] = np.mean((Z[:, lab, 0] - y[None, :]) ** 2, axis=1).min()
    return out, method


def gcn_dual_loss(inst: GcnInstance, alphas, method: str = "auto", res: int = 41):
    """min over the weight box of the loss for each alpha, with a method tag.

    "auto" uses an exact reduction when d = 1 and F = 2 (sign patterns for
    d0 = 1, an angular sweep for d0 >= 2), otherwise a weight grid of res
    points per axis (random samples past a cap).
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    tiny = inst.task == "classification" and inst.d == 1 and inst.F == 2 and inst.box[0] < 0 < inst.box[1]
    if method == "auto":
        method = ("sign-pattern" if inst.d0 == 1 else "angular") if tiny else "grid"
    if method in ("sign-pattern", "angular"):
        if not tiny:
            raise InputError("exact reductions need d = 1, F = 2 and a weight box with 0 inside")
        if method == "sign-pattern":
            if inst.d0 != 1:
                raise InputError("sign-pattern reduction needs d0 = 1")
            return _sign_pattern_dual(inst, alphas), "sign-pattern"
        if inst.d0 < 2:
            raise InputError("angular reduction needs d0 >= 2")
        return _angular_dual(inst, alphas), "angular"
    if method == "grid":
        return _grid_dual(inst, alphas, res)
    raise InputError(f"unknown method {method!r}")


def gcn_regression_blackbox(inst: GcnInstance, H: float | None = None) -> BlackBox:
    """u = H - squared loss over the flattened weights, for the numeric tracer."""
    if inst.task != "regression":
        raise InputError("regression black box needs a regression instance")
    y = np.array(inst.labels)
    if H is None:
        # Ah is row-stochastic, so |z| <= |X|max * d * d0 * box^2
        zmax = float(np.abs(inst.X).max()) * inst.d * inst.d0 * max(abs(b) for b in inst.box) ** 2
        H = 1.0 + float(np.max((np.abs(y) + zmax) ** 2))
    lab = list(inst.labeled)

    def fn(alpha, Wm):
        W0, W1 = inst.unpack(np.atleast_2d(Wm))
        Ah = normalized_adjacency(inst, alpha)
        Hh = np.maximum(np.einsum("nd,gde->gne", Ah @ inst.X, W0), 0.0)
        Z = np.einsum("mn,gne,gef->gmf", Ah, Hh, W1)[:, lab, 0]
        return H - np.mean((Z - y[None, :]) ** 2, axis=1)

    box = [tuple(map(float, inst.box))] * inst.n_weights
    bb = BlackBox(inst.alpha_range, box, fn, name="gcn regression")
    bb.H = H
    return bb


def random_gcn_instance(seed, n: int | None = None, Delta: int | None = None, task: str = "classification", d0: int = 1) -> GcnInstance:
    """Tiny instance: n <= 4 nodes, scalar features, F = 2."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5)) if n is None else n
    Delta = int(rng.integers(1, 4)) if Delta is None else Delta
    X = rng.integers(-3, 4, size=(n, 1)).astype(float)
    D = rng.integers(1, 5, size=(n, n)).astype(float)
    D = np.triu(D, 1)
    D = D + D.T
    L = int(rng.integers(1, n + 1))
    labeled = tuple(sorted(rng.choice(n, size=L, replace=False).tolist()))
    if task == "classification":
        labels = tuple(int(v) for v in rng.integers(0, 2, size=L))
    else:
        labels = tuple(float(v) for v in rng.integers(-2, 3, size=L))
    return GcnInstance(X, D, labeled, labels, Delta, d0, 2, task=task)


class GcnFamily:
    """Tiny classification instances; with d0 = 1 every dual loss is constant in alpha."""

    name = "gcn"

    def __init__(self, d0: int = 2):
        self.d0 = d0

    def sample(self, rng):
        return random_gcn_instance(int(rng.integers(0, 2**31)), d0=self.d0)
