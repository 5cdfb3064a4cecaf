"""Exact and numeric envelopes of parameterized dual utilities, with tuning helpers."""

from .errors import DegenerateError, DualtuneError, InputError, SolveError
from .poly import Polynomial
from .landscape import (
    DomainBox,
    Landscape,
    Region,
    evaluate_landscape,
    flatness_surrogate,
    load_landscape,
    make_landscape,
    perturb_landscape,
    save_landscape,
    single_piece,
)
from .bounds import lemma51_bounds, theorem55_bounds
from .config import Tolerances, default_tolerances

__version__ = "0.1.0"
