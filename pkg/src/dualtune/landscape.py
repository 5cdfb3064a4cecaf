"""Piecewise landscapes f(a, w) over a box: data model, JSON I/O, transforms."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import InputError
from .poly import Polynomial, as_fraction, fraction_str

SIGNS = ("le", "ge", "free")
COVERAGE_RES = 101


@dataclass(frozen=True)
class DomainBox:
    alpha: tuple
    w: tuple

    def __post_init__(self):
        if len(self.w) < 1:
            raise InputError("domain needs at least one parameter coordinate", "domain.w")
        for name, (lo, hi) in [("alpha", self.alpha)] + [(f"w[{i}]", r) for i, r in enumerate(self.w)]:
            if not lo < hi:
                raise InputError(f"interval must satisfy lo < hi, got [{lo}, {hi}]", f"domain.{name}")

    @property
    def d(self) -> int:
        return len(self.w)

    def contains(self, alpha, w, tol=0.0) -> bool:
        if not self.alpha[0] - tol <= alpha <= self.alpha[1] + tol:
            return False
        return all(lo - tol <= x <= hi + tol for x, (lo, hi) in zip(w, self.w))

    def max_abs_endpoint(self) -> Fraction:
        vals = [abs(x) for x in self.alpha] + [abs(x) for r in self.w for x in r]
        return max(vals)

    def float_alpha(self):
        return float(self.alpha[0]), float(self.alpha[1])

    def float_w(self):
        return [(float(lo), float(hi)) for lo, hi in self.w]


@dataclass(frozen=True)
class Region:
    signs: tuple
    piece: object  # Polynomial for polynomial kind, Fraction for constant kind


@dataclass(frozen=True)
class Landscape:
    domain: DomainBox
    kind: str
    boundaries: tuple
    regions: tuple
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def nvars(self) -> int:
        return self.domain.d + 1

    @property
    def N(self) -> int:
        return len(self.regions)

    @property
    def M(self) -> int:
        return len(self.boundaries)

    @property
    def delta_p(self) -> int:
        if self.kind == "constant":
            return 0
        return max(max(r.piece.degree(), 0) for r in self.regions)

    @property
    def delta_b(self) -> int:
        return max((b.degree() for b in self.boundaries), default=0)

    @cached_property
    def pieces(self) -> list:
        """Region pieces as Polynomials regardless of kind."""
        if self.kind == "constant":
            return [Polynomial.constant(self.nvars, r.piece) for r in self.regions]
        return [r.piece for r in self.regions]

    def region_mask(self, signs_values, k) -> np.ndarray:
        """Boolean mask of points satisfying region k, given boundary values."""
        mask = None
        for j, s in enumerate(self.regions[k].signs):
            if s == "free":
                continue
            m = signs_values[j] <= 0 if s == "le" else signs_values[j] >= 0
            mask = m if mask is None else mask & m
        return mask

    def region_index(self, alpha, *w) -> np.ndarray:
        """First-match region index on arrays (broadcast); -1 where nothing matches."""
        alpha = np.asarray(alpha, dtype=float)
        ws = [np.asarray(x, dtype=float) for x in w]
        shape = np.broadcast_shapes(alpha.shape, *(x.shape for x in ws))
        hv = [b.eval_array(alpha, *ws) for b in self.boundaries]
        idx = np.full(shape, -1, dtype=int)
        for k in range(self.N):
            m = self.region_mask(hv, k)
            m = np.ones(shape, dtype=bool) if m is None else np.broadcast_to(m, shape)
            idx = np.where((idx < 0) & m, k, idx)
        return idx

    def evaluate_array(self, alpha, *w) -> np.ndarray:
        """Float values on broadcast arrays; NaN where no region matches."""
        alpha = np.asarray(alpha, dtype=float)
        ws = [np.asarray(x, dtype=float) for x in w]
        shape = np.broadcast_shapes(alpha.shape, *(x.shape for x in ws))
        idx = self.region_index(alpha, *ws)
        out = np.full(shape, np.nan)
        for k in range(self.N):
            sel = idx == k
            if not sel.any():
                continue
            if self.kind == "constant":
                out[sel] = float(self.regions[k].piece)
            else:
                a_b = np.broadcast_to(alpha, shape)[sel]
                w_b = [np.broadcast_to(x, shape)[sel] for x in ws]
                out[sel] = self.regions[k].piece.eval_array(a_b, *w_b)
        return out


def evaluate_landscape(l: Landscape, alpha, w):
    """Value of the first matching region's piece at (alpha, w)."""
    w = list(w) if np.ndim(w) else [w]
    if len(w) != l.d:
        raise InputError(f"expected {l.d} parameter coordinates, got {len(w)}")
    exact = all(isinstance(x, (int, Fraction)) for x in [alpha, *w])
    fa = [float(alpha)] + [float(x) for x in w]
    if not l.domain.contains(fa[0], fa[1:]):
        raise InputError(f"point {tuple(fa)} outside the domain box")
    point = [alpha, *w] if exact else fa
    for region in l.regions:
        ok = True
        for b, s in zip(l.boundaries, region.signs):
            if s == "free":
                continue
            v = b.eval(point)
            if (s == "le" and v > 0) or (s == "ge" and v < 0):
                ok = False
                break
        if ok:
            if l.kind == "constant":
                return region.piece if exact else float(region.piece)
            return region.piece.eval(point)
    raise InputError(f"no region covers point {tuple(fa)}")


# JSON schema handling

def _rational_field(x, path) -> Fraction:
    if isinstance(x, bool) or isinstance(x, float):
        raise InputError("floats are not allowed; write rationals as 'num/den' strings", path)
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError(f"not a rational: {x!r}", path) from None
    raise InputError(f"expected a rational, got {type(x).__name__}", path)


def _interval(x, path):
    if not isinstance(x, list) or len(x) != 2:
        raise InputError("expected [lo, hi]", path)
    return (_rational_field(x[0], f"{path}[0]"), _rational_field(x[1], f"{path}[1]"))


def landscape_from_dict(doc: dict, check_coverage: bool = True) -> Landscape:
    if not isinstance(doc, dict):
        raise InputError("landscape document must be a JSON object")
    if doc.get("version") != 1:
        raise InputError(f"unsupported version {doc.get('version')!r}", "version")
    dom = doc.get("domain")
    if not isinstance(dom, dict):
        raise InputError("missing domain object", "domain")
    alpha = _interval(dom.get("alpha"), "domain.alpha")
    ws = dom.get("w")
    if not isinstance(ws, list) or not ws:
        raise InputError("expected a nonempty list of intervals", "domain.w")
    domain = DomainBox(alpha, tuple(_interval(r, f"domain.w[{i}]") for i, r in enumerate(ws)))
    kind = doc.get("kind")
    if kind not in ("polynomial", "constant"):
        raise InputError("kind must be 'polynomial' or 'constant'", "kind")
    nvars = domain.d + 1
    raw_b = doc.get("boundaries", [])
    if not isinstance(raw_b, list):
        raise InputError("expected a list", "boundaries")
    boundaries = []
    for j, s in enumerate(raw_b):
        if not isinstance(s, str):
            raise InputError("boundary must be a polynomial string", f"boundaries[{j}]")
        b = Polynomial.parse(s, nvars, f"boundaries[{j}]")
        if b.is_zero():
            raise InputError("boundary polynomial is identically zero", f"boundaries[{j}]")
        boundaries.append(b)
    raw_r = doc.get("regions")
    if not isinstance(raw_r, list) or not raw_r:
        raise InputError("expected a nonempty list of regions", "regions")
    regions = []
    for k, r in enumerate(raw_r):
        path = f"regions[{k}]"
        if not isinstance(r, dict):
            raise InputError("region must be an object", path)
        signs = r.get("signs", [])
        if not isinstance(signs, list):
            raise InputError("signs must be a list", f"{path}.signs")
        if len(signs) > len(boundaries):
            raise InputError(f"unknown boundary {len(boundaries)}: only {len(boundaries)} boundaries declared", f"{path}.signs[{len(boundaries)}]")
        for i, s in enumerate(signs):
            if s not in SIGNS:
                raise InputError(f"sign must be one of {SIGNS}, got {s!r}", f"{path}.signs[{i}]")
        signs = tuple(signs) + ("free",) * (len(boundaries) - len(signs))
        piece = r.get("piece")
        if kind == "constant":
            piece = _rational_field(piece, f"{path}.piece")
        else:
            if not isinstance(piece, str):
                raise InputError("piece must be a polynomial string", f"{path}.piece")
            piece = Polynomial.parse(piece, nvars, f"{path}.piece")
        regions.append(Region(signs, piece))
    l = Landscape(domain, kind, tuple(boundaries), tuple(regions), meta=dict(doc.get("meta", {})))
    degs = doc.get("degrees")
    if degs is not None:
        if degs.get("piece") is not None and degs["piece"] != l.delta_p:
            raise InputError(f"declared piece degree {degs['piece']} but actual is {l.delta_p}", "degrees.piece")
        if degs.get("boundary") is not None and degs["boundary"] != l.delta_b:
            raise InputError(f"declared boundary degree {degs['boundary']} but actual is {l.delta_b}", "degrees.boundary")
    if check_coverage:
        check_coverage_grid(l)
    return l


def grid_axes(domain: DomainBox, res: int):
    a = np.linspace(*domain.float_alpha(), res)
    ws = [np.linspace(lo, hi, res) for lo, hi in domain.float_w()]
    return a, ws


def check_coverage_grid(l: Landscape, res: int = COVERAGE_RES, chunk: int = 2_000_000):
    """Every probe point of a res^(d+1) grid must match some region."""
    a, ws = grid_axes(l.domain, res)
    axes = [a, *ws]
    total = res ** len(axes)
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        idx = np.unravel_index(flat, (res,) * len(axes))
        coords = [ax[i] for ax, i in zip(axes, idx)]
        reg = l.region_index(*coords)
        bad = np.flatnonzero(reg < 0)
        if bad.size:
            pt = tuple(float(c[bad[0]]) for c in coords)
            raise InputError(f"coverage check failed: no region matches probe point {pt}", "regions")


def load_landscape(document, check_coverage: bool = True) -> Landscape:
    """Parse a landscape from JSON text, a dict, or a path-like object."""
    if isinstance(document, dict):
        return landscape_from_dict(document, check_coverage)
    if hasattr(document, "read_text"):
        document = document.read_text()
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from None
    return landscape_from_dict(doc, check_coverage)


def landscape_to_dict(l: Landscape) -> dict:
    out = {
        "version": 1,
        "domain": {
            "alpha": [fraction_str(l.domain.alpha[0]), fraction_str(l.domain.alpha[1])],
            "w": [[fraction_str(lo), fraction_str(hi)] for lo, hi in l.domain.w],
        },
        "kind": l.kind,
        "boundaries": [str(b) for b in l.boundaries],
        "regions": [
            {
                "signs": list(r.signs),
                "piece": fraction_str(r.piece) if l.kind == "constant" else str(r.piece),
            }
            for r in l.regions
        ],
    }
    if l.meta:
        out["meta"] = l.meta
    return out


def save_landscape(l: Landscape) -> str:
    return json.dumps(landscape_to_dict(l), indent=2)


def make_landscape(alpha, w, kind, boundaries, regions, meta=None, check_coverage=False) -> Landscape:
    """Programmatic constructor; ``regions`` is a list of (signs, piece)."""
    domain = DomainBox(
        (as_fraction(alpha[0]), as_fraction(alpha[1])),
        tuple((as_fraction(lo), as_fraction(hi)) for lo, hi in w),
    )
    nvars = domain.d + 1
    bs = []
    for b in boundaries:
        bs.append(Polynomial.parse(b, nvars) if isinstance(b, str) else b)
    regs = []
    for signs, piece in regions:
        if kind == "constant":
            piece = as_fraction(piece)
        elif isinstance(piece, str):
            piece = Polynomial.parse(piece, nvars)
        elif not isinstance(piece, Polynomial):
            piece = Polynomial.constant(nvars, piece)
        signs = tuple(signs) + ("free",) * (len(bs) - len(signs))
        regs.append(Region(signs, piece))
    l = Landscape(domain, kind, tuple(bs), tuple(regs), meta=dict(meta or {}))
    if check_coverage:
        check_coverage_grid(l)
    return l


def single_piece(piece, alpha=(0, 1), w=((-1, 1),)) -> Landscape:
    return make_landscape(alpha, w, "polynomial", [], [((), piece)])


# transforms

def perturb_landscape(l: Landscape, tau):
    """Add tau*a + tau*sum(w) to every piece; returns (landscape, sup-norm drift bound 2*tau*C)."""
    tau = as_fraction(tau)
    if tau <= 0:
        raise InputError("tau must be positive")
    if l.kind != "polynomial":
        raise InputError("perturbation needs a polynomial landscape")
    n = l.nvars
    shift = Polynomial(n, {tuple(1 if k == i else 0 for k in range(n)): tau for i in range(n)})
    regions = tuple(Region(r.signs, r.piece + shift) for r in l.regions)
    C = l.d + 1
    bound = 2 * tau * C * l.domain.max_abs_endpoint()
    return Landscape(l.domain, l.kind, l.boundaries, regions, meta=dict(l.meta)), bound


def flatness_surrogate(l: Landscape, eta) -> Landscape:
    """Replace each piece by f - eta * ||Hess_w f||_F^2."""
    eta = as_fraction(eta)
    if eta <= 0:
        raise InputError("eta must be positive")
    if l.kind != "polynomial":
        raise InputError("surrogate needs a polynomial landscape")
    regions = []
    for r in l.regions:
        f = r.piece
        pen = Polynomial.constant(l.nvars, 0)
        for s in range(1, l.nvars):
            fs = f.partial(s)
            for t in range(1, l.nvars):
                h = fs.partial(t)
                pen = pen + h * h
        regions.append(Region(r.signs, f - pen * eta))
    return Landscape(l.domain, l.kind, l.boundaries, tuple(regions), meta=dict(l.meta))


def region_components_probe(l: Landscape, res: int = COVERAGE_RES) -> list:
    """Connected-component counts of each first-match region on a probe grid (d = 1)."""
    from scipy import ndimage

    if l.d != 1:
        raise InputError("component probing is implemented for d = 1")
    a, (w,) = grid_axes(l.domain, res)
    AA, WW = np.meshgrid(a, w, indexing="ij")
    idx = l.region_index(AA, WW)
    return [int(ndimage.label(idx == k)[1]) for k in range(l.N)]
