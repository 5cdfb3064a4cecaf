"""Closed-form ceilings on discontinuities, local maxima and pieces.

All hidden constants are 1 unless the caller passes another value.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import InputError


@dataclass(frozen=True)
class BoundFigures:
    discontinuity_bound: float
    local_max_bound: float
    oscillation_bound: float
    pdim_bound_order: float
    formula_id: str

    def to_dict(self) -> dict:
        return asdict(self)


def _compose(disc, lmax, formula_id) -> BoundFigures:
    osc = 2 * lmax + 3 * disc + 2
    return BoundFigures(float(disc), float(lmax), float(osc), math.log2(osc), formula_id)


def _check_int(name, v, lo):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise InputError(f"{name} must be an integer >= {lo}, got {v!r}")


def warren_components(degree: int, nvars: int) -> int:
    """Components of the zero set of one degree-d polynomial in n variables: 2 d^n."""
    _check_int("degree", degree, 1)
    _check_int("nvars", nvars, 1)
    return 2 * degree**nvars


def warren_partition_bound(N: int, delta: int, n: int, c: float = 1.0) -> float:
    """Cells cut out by N degree-delta polynomials in n variables: c (N delta / n)^n."""
    _check_int("n", n, 1)
    _check_int("N", N, 1)
    _check_int("delta", delta, 1)
    if N < n:
        raise InputError(f"need N >= n, got N={N}, n={n}")
    return c * (N * delta / n) ** n


def sauer_shelah_factor(M: int, d: int) -> float:
    """(e M / (d+1))^(d+1), with the value 1 when there are no boundaries."""
    if M == 0:
        return 1.0
    return (math.e * M / (d + 1)) ** (d + 1)


def theorem55_bounds(N: int, M: int, d: int, delta: int) -> BoundFigures:
    _check_int("N", N, 1)
    _check_int("M", M, 0)
    _check_int("d", d, 1)
    _check_int("delta", delta, 1)
    E = sauer_shelah_factor(M, d)
    disc = N * delta ** (4 * d + 2) * E + N * M * (2 * delta) ** (2 * d + 2) * E
    lmax = N * delta ** (4 * d + 3) * E
    return _compose(disc, lmax, "theorem55")


def lemma51_bounds(delta_p: int) -> BoundFigures:
    _check_int("delta_p", delta_p, 1)
    ext = (delta_p - 1) * (delta_p - 2)
    disc = ext + 4 * delta_p
    lmax = delta_p**2 + ext + 2 * delta_p
    return _compose(disc, lmax, "lemma51")


def gcn_component_bound(n: int, F: int, delta: int, d: int, d0: int) -> float:
    """Cells of the (alpha, weight) space for the polynomial-kernel GCN 0-1 loss."""
    k = 1 + d * d0 + d0 * F
    return ((n * F**2) * (2 * delta + 6) / k) ** k * (delta + 1) ** (n * d0)


def activation_partition_bound(T: int, k1: int, p: int, W1: int) -> float:
    """2 (4 e T k1 p / W1)^W1 cells for the first-layer boundary arrangement."""
    return 2 * (4 * math.e * T * k1 * p / W1) ** W1
