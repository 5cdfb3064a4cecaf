"""Discontinuities, strict local maxima and threshold oscillations of 1-D functions."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .envelope import EnvelopeProfile, sample_strict_maxima
from .errors import InputError


@dataclass
class OscillationReport:
    B1: int
    B2: int
    oscillations: int
    osc_bound: int
    pdim_upper_order: float
    z: float
    method: str = "exact"
    piecewise_constant: bool = False

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, np.floating) else v) for k, v in asdict(self).items()}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _thresholds(values) -> np.ndarray:
    v = np.unique(np.asarray(values, dtype=float))
    span = float(v[-1] - v[0]) if v.size else 0.0
    eps = 1e-9 * span if span > 0 else 1e-9
    mids = 0.5 * (v[1:] + v[:-1])
    return np.unique(np.concatenate([v - eps, v + eps, mids]))


def _profile_oscillations(profile: EnvelopeProfile):
    """Exact count: the profile is continuous and monotone between consecutive knots."""
    knots = profile.knots
    L = np.array([k.left for k in knots])
    U = np.array([k.value for k in knots])
    R = np.array([k.right for k in knots])
    # one-sided limits within the jump threshold are the same value
    thr = 1e-7 * profile.scale
    L = np.where(np.abs(L - U) <= thr, U, L)
    R = np.where(np.abs(R - U) <= thr, U, R)
    Z = _thresholds(np.concatenate([L, U, R]))
    IL = L[None, :] >= Z[:, None]
    IU = U[None, :] >= Z[:, None]
    IR = R[None, :] >= Z[:, None]
    n = len(knots)
    point = np.zeros((Z.size, n), dtype=bool)
    if n > 2:
        point[:, 1:-1] = (IL[:, 1:-1] != IU[:, 1:-1]) | (IU[:, 1:-1] != IR[:, 1:-1])
    point[:, 0] = IU[:, 0] != IR[:, 0]
    point[:, -1] = IU[:, -1] != IL[:, -1]
    between = IR[:, :-1] != IL[:, 1:]
    counts = point.sum(axis=1) + between.sum(axis=1)
    k = int(np.argmax(counts))
    return int(counts[k]), float(Z[k])


def sample_oscillations(values):
    """Max over z of the number of indicator changes along a sampled sequence, with the maximizing z."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InputError("need at least 2 samples")
    lo = np.minimum(v[:-1], v[1:])
    hi = np.maximum(v[:-1], v[1:])
    keep = lo < hi
    lo, hi = np.sort(lo[keep]), np.sort(hi[keep])
    if not lo.size:
        return 0, float(v[0])
    # a change between neighbours happens iff lo < z <= hi; the max is attained at some hi
    z = np.unique(hi)
    counts = np.searchsorted(lo, z, side="left") - np.searchsorted(hi, z, side="left")
    k = int(np.argmax(counts))
    return int(counts[k]), float(z[k])


def _sample_counts(values):
    v = np.asarray(values, dtype=float)
    scale = max(1.0, float(np.max(np.abs(v))))
    dv = np.abs(np.diff(v))
    thr = max(50 * float(np.median(dv)), 1e-7 * scale)
    B1 = int(np.sum(dv > thr))
    B2 = len(sample_strict_maxima(v, 1e-12 * scale))
    return B1, B2


def count_oscillations(source, z_strategy: str = "auto") -> OscillationReport:
    """Oscillation report for an EnvelopeProfile or a dense sample of values.

    ``z_strategy`` "auto" uses the exact knot sweep for exact profiles and the
    sample sweep otherwise; "samples" forces the sample sweep.
    """
    if z_strategy not in ("auto", "samples", "exact"):
        raise InputError(f"unknown z strategy {z_strategy!r}")
    if isinstance(source, EnvelopeProfile):
        const = source.piecewise_constant
        if source.method == "exact" and z_strategy != "samples":
            osc, z = _profile_oscillations(source)
            B1, B2 = source.B1, source.B2
            method = "exact"
        else:
            if z_strategy == "exact":
                raise InputError("exact sweep needs an exact profile")
            osc, z = sample_oscillations(source.samples_value)
            B1, B2 = source.B1, source.B2
            method = "samples"
    else:
        if z_strategy == "exact":
            raise InputError("exact sweep needs an exact profile")
        values = np.asarray(source[1] if isinstance(source, tuple) else source, dtype=float)
        osc, z = sample_oscillations(values)
        B1, B2 = _sample_counts(values)
        const = False
        method = "samples"
    bound = 2 * B2 + 3 * B1 + 2
    return OscillationReport(B1, B2, osc, bound, math.log2(osc + 2), z, method, const)


def pdim_upper(report, c: float = 2.0) -> float:
    """c * log2(oscillations + 2); c = 2 is a convention for the unspecified constant."""
    osc = report.oscillations if isinstance(report, OscillationReport) else report
    if osc < 0:
        raise InputError("oscillation count must be nonnegative")
    return c * math.log2(osc + 2)


def verify_lemma32(profile: EnvelopeProfile):
    """Checks oscillations <= 2 B2 + 3 B1 + 2 (and <= B1 for piecewise-constant profiles)."""
    rep = count_oscillations(profile)
    ok = rep.oscillations <= rep.osc_bound
    cert = {
        "oscillations": rep.oscillations,
        "bound": rep.osc_bound,
        "B1": rep.B1,
        "B2": rep.B2,
        "z": rep.z,
    }
    if rep.piecewise_constant:
        cert["constant_bound"] = rep.B1
        ok = ok and rep.oscillations <= rep.B1
    return ok, cert
