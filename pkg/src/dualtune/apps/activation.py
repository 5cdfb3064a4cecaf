"""Interpolated piecewise-polynomial activations: sigma = a*o1 + (1 - a)*o2."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..envelope import BlackBox, trace_envelope_1d, trace_envelope_numeric
from ..errors import InputError
from ..landscape import Landscape, make_landscape
from ..poly import Polynomial, as_fraction, fraction_str


def _upoly_eval(coeffs, z):
    out = np.zeros_like(np.asarray(z, dtype=float))
    for c in reversed(coeffs):
        out = out * z + float(c)
    return out


@dataclass(frozen=True)
class PiecewisePoly:
    """Continuous piecewise polynomial in one variable; pieces[k] holds coefficients low degree first."""

    breakpoints: tuple
    pieces: tuple

    def __post_init__(self):
        bps = tuple(as_fraction(b) for b in self.breakpoints)
        pcs = tuple(tuple(as_fraction(c) for c in p) for p in self.pieces)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pcs)
        if len(pcs) != len(bps) + 1:
            raise InputError(f"{len(bps)} breakpoints need {len(bps) + 1} pieces, got {len(pcs)}")
        if any(b1 >= b2 for b1, b2 in zip(bps, bps[1:])):
            raise InputError("activation breakpoints must be strictly increasing")
        for k, t in enumerate(bps):
            left = sum(c * t**i for i, c in enumerate(pcs[k]))
            right = sum(c * t**i for i, c in enumerate(pcs[k + 1]))
            if left != right:
                raise InputError(f"activation is not continuous at {t}: {left} vs {right}")

    @property
    def degree(self) -> int:
        return max(len(p) - 1 for p in self.pieces)

    def index(self, z):
        return np.searchsorted(np.array([float(b) for b in self.breakpoints]), z, side="right")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        idx = self.index(z)
        out = np.zeros(z.shape)
        for k, p in enumerate(self.pieces):
            sel = idx == k
            if sel.any():
                out[sel] = _upoly_eval(p, z[sel])
        return out

    def piece_at(self, z: Fraction) -> tuple:
        k = sum(1 for b in self.breakpoints if z >= b)
        return self.pieces[k]

    def to_dict(self) -> dict:
        return {
            "breakpoints": [fraction_str(b) for b in self.breakpoints],
            "pieces": [[fraction_str(c) for c in p] for p in self.pieces],
        }

    @classmethod
    def from_dict(cls, doc) -> "PiecewisePoly":
        if isinstance(doc, str):
            return cls.named(doc)
        try:
            return cls(tuple(doc.get("breakpoints", ())), tuple(tuple(p) for p in doc["pieces"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"bad activation table: {exc}") from None

    @classmethod
    def named(cls, name: str) -> "PiecewisePoly":
        table = {
            "relu": ((0,), ((0,), (0, 1))),
            "identity": ((), ((0, 1),)),
            "leaky": ((0,), ((0, Fraction(1, 10)), (0, 1))),
            "hardtanh": ((-1, 1), ((-1,), (0, 1), (1,))),
            "zero": ((), ((0,),)),
        }
        if name not in table:
            raise InputError(f"unknown activation {name!r}; known: {sorted(table)}")
        bps, pcs = table[name]
        return cls(bps, pcs)


@dataclass(frozen=True)
class ActivationSpec:
    o1: PiecewisePoly
    o2: PiecewisePoly
    widths: tuple
    data: tuple  # (x, y) pairs
    w_box: tuple = (Fraction(-2), Fraction(2))
    alpha: tuple = (Fraction(0), Fraction(1))

    def __post_init__(self):
        object.__setattr__(self, "data", tuple((as_fraction(x), as_fraction(y)) for x, y in self.data))
        object.__setattr__(self, "widths", tuple(int(k) for k in self.widths))
        object.__setattr__(self, "w_box", tuple(as_fraction(b) for b in self.w_box))
        object.__setattr__(self, "alpha", tuple(as_fraction(b) for b in self.alpha))
        if not self.data:
            raise InputError("activation dataset needs T >= 1")
        if not self.widths or min(self.widths) < 1:
            raise InputError("layer widths must be positive")

    @property
    def T(self) -> int:
        return len(self.data)

    @property
    def n_params(self) -> int:
        dims = (1,) + self.widths
        return sum(a * b for a, b in zip(dims[:-1], dims[1:]))

    @property
    def max_breakpoints(self) -> int:
        return max(len(self.o1.breakpoints), len(self.o2.breakpoints))

    def sigma(self, alpha, z):
        alpha = np.asarray(alpha, dtype=float)
        return alpha * self.o1(z) + (1 - alpha) * self.o2(z)

    def to_dict(self) -> dict:
        return {
            "o1": self.o1.to_dict(),
            "o2": self.o2.to_dict(),
            "widths": list(self.widths),
            "data": [[fraction_str(x), fraction_str(y)] for x, y in self.data],
            "w_box": [fraction_str(b) for b in self.w_box],
            "alpha": [fraction_str(b) for b in self.alpha],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ActivationSpec":
        try:
            return cls(
                PiecewisePoly.from_dict(doc["o1"]),
                PiecewisePoly.from_dict(doc["o2"]),
                tuple(doc.get("widths", (1,))),
                tuple(tuple(p) for p in doc["data"]),
                tuple(doc.get("w_box", (-2, 2))),
                tuple(doc.get("alpha", (0, 1))),
            )
        except KeyError as exc:
            raise InputError(f"activation spec is missing {exc}") from None


def forward(spec: ActivationSpec, alpha, w):
    """Network outputs for every data point; w has the parameters on its last axis.

    Scalar input, no biases, the output is the sum of last-layer units.
    """
    w = np.asarray(w, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if w.shape[-1] != spec.n_params:
        raise InputError(f"expected {spec.n_params} parameters, got {w.shape[-1]}")
    dims = (1,) + spec.widths
    outs = []
    for x, _ in spec.data:
        h = np.full(w.shape[:-1] + (1,), float(x))
        pos = 0
        for a_in, a_out in zip(dims[:-1], dims[1:]):
            Wl = w[..., pos : pos + a_in * a_out].reshape(w.shape[:-1] + (a_out, a_in))
            pos += a_in * a_out
            z = np.einsum("...oi,...i->...o", Wl, h)
            h = spec.sigma(alpha[..., None] if alpha.ndim else alpha, z)
        outs.append(h.sum(axis=-1))
    return np.stack(outs, axis=-1)


def activation_loss(spec: ActivationSpec, alpha, w):
    """Mean squared loss of the network, straight from the forward pass."""
    g = forward(spec, alpha, w)
    y = np.array([float(y) for _, y in spec.data])
    return np.mean((g - y) ** 2, axis=-1)


def _probe_max_loss(spec: ActivationSpec) -> float:
    rng = np.random.default_rng(0)
    lo, hi = float(spec.w_box[0]), float(spec.w_box[1])
    a = np.linspace(float(spec.alpha[0]), float(spec.alpha[1]), 21)
    if spec.n_params == 1:
        A, Wg = np.meshgrid(a, np.linspace(lo, hi, 401), indexing="ij")
        return float(activation_loss(spec, A, Wg[..., None]).max())
    Wr = rng.uniform(lo, hi, size=(2000, spec.n_params))
    return float(max(activation_loss(spec, np.full(2000, x), Wr).max() for x in a))


def utility_offset(spec: ActivationSpec) -> Fraction:
    """H = 1 + probe-grid max loss, rounded up to a multiple of 1/8 so it stays rational."""
    return 1 + Fraction(math.ceil(_probe_max_loss(spec) * 8), 8)


def build_activation_landscape(spec: ActivationSpec, H=None) -> Landscape:
    """Exact landscape u = H - loss for a single neuron on scalar inputs."""
    if spec.n_params != 1:
        raise InputError("the explicit landscape needs W = 1; use activation_blackbox")
    H = utility_offset(spec) if H is None else as_fraction(H)
    lo, hi = spec.w_box
    kinks = sorted(set(spec.o1.breakpoints) | set(spec.o2.breakpoints))
    # x w - t = 0 scaled by 1/x, kept only where it cuts the open w-range
    cuts = sorted({t / x for x, _ in spec.data if x != 0 for t in kinks if lo < t / x < hi})
    a, w = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    boundaries = [w - c for c in cuts]
    edges = [lo] + cuts + [hi]
    regions = []
    M = len(cuts)
    for k in range(M + 1):
        mid = (edges[k] + edges[k + 1]) / 2
        loss = Polynomial.constant(2, 0)
        for x, y in spec.data:
            z = x * w
            p1 = spec.o1.piece_at(x * mid)
            p2 = spec.o2.piece_at(x * mid)
            g1 = sum((c * z**i for i, c in enumerate(p1)), Polynomial.constant(2, 0))
            g2 = sum((c * z**i for i, c in enumerate(p2)), Polynomial.constant(2, 0))
            g = a * g1 + (1 - a) * g2
            loss = loss + (g - y) ** 2
        loss = loss * Fraction(1, spec.T)
        regions.append((["ge"] * k + ["le"] * (M - k), H - loss))
    meta = {"family": "activation", "H": str(H), "T": spec.T}
    return make_landscape(spec.alpha, (spec.w_box,), "polynomial", boundaries, regions, meta=meta)


def activation_blackbox(spec: ActivationSpec, H=None) -> BlackBox:
    H = float(utility_offset(spec) if H is None else as_fraction(H))
    box = [(float(spec.w_box[0]), float(spec.w_box[1]))] * spec.n_params

    def fn(alpha, Wm):
        Wm = np.atleast_2d(Wm)
        return H - activation_loss(spec, np.full(Wm.shape[0], alpha), Wm)

    bb = BlackBox((float(spec.alpha[0]), float(spec.alpha[1])), box, fn, name="activation network")
    bb.H = H
    return bb


def dual_loss_activation(spec: ActivationSpec, alphas, tol=None):
    """min over w of the loss at each alpha: exact for W = 1, estimated otherwise."""
    alphas = np.asarray(alphas, dtype=float)
    if spec.n_params == 1:
        l = build_activation_landscape(spec)
        H = float(Fraction(l.meta["H"]))
        prof = trace_envelope_1d(l, tol)
        return H - prof.evaluate(alphas), "exact"
    bb = activation_blackbox(spec)
    H = bb.H
    prof = trace_envelope_numeric(bb, tol, grid=max(alphas.size, 2))
    return H - np.interp(alphas, prof.samples_alpha, prof.samples_value), "estimated"


def random_activation_spec(rng, T: int = 4, o1="relu", o2="identity") -> ActivationSpec:
    xs = [Fraction(int(v), 4) for v in rng.integers(-6, 7, size=T)]
    ys = [Fraction(int(v), 4) for v in rng.integers(-4, 5, size=T)]
    return ActivationSpec(PiecewisePoly.named(o1), PiecewisePoly.named(o2), (1,), tuple(zip(xs, ys)))


class ActivationFamily:
    """Single-neuron activation-interpolation instances with random small datasets."""

    name = "activation"

    def __init__(self, T: int = 4, o1="relu", o2="identity", H=17):
        self.T, self.o1, self.o2, self.H = T, o1, o2, H

    def sample(self, rng) -> Landscape:
        # |x| <= 3/2, |w| <= 2 and |y| <= 1 keep the loss below 16, so a fixed H = 17 works for all
        return build_activation_landscape(random_activation_spec(rng, self.T, self.o1, self.o2), H=self.H)
