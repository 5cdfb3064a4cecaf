"""Tolerance profiles. ``DUALTUNE_TOL_PROFILE`` picks the default profile."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

ENV_VAR = "DUALTUNE_TOL_PROFILE"


@dataclass(frozen=True)
class Tolerances:
    isolation: float = 1e-12  # root isolating interval width
    merge: float = 1e-10  # breakpoints closer than this collapse
    jump_rel: float = 1e-7  # discontinuity threshold relative to the value scale
    tie_rel: float = 1e-11  # candidates this close count as tied
    residual: float = 1e-8  # stationarity residual accepted for local maxima
    samples: int = 2001  # dense trace points
    switch_samples: int = 40  # per-interval probes for arc switches
    multistarts: int = 32
    numeric_grid: int = 201
    grid_memory_cap: int = 50_000_000  # max points held by the grid oracle at once


PROFILES = {
    "default": Tolerances(),
    "strict": Tolerances(isolation=1e-14, merge=1e-12, switch_samples=96, multistarts=64),
    "fast": Tolerances(samples=501, switch_samples=24, multistarts=12, numeric_grid=101),
}


def default_tolerances() -> Tolerances:
    name = os.environ.get(ENV_VAR, "default")
    if name not in PROFILES:
        raise ValueError(f"{ENV_VAR}={name!r} is not one of {sorted(PROFILES)}")
    return PROFILES[name]


def with_overrides(tol: Tolerances | None = None, **kw) -> Tolerances:
    return replace(tol or default_tolerances(), **kw)
