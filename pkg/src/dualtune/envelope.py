"""Dual utility envelopes u*(a) = max_w f(a, w).

Exact tracing for one parameter dimension runs on the curve arrangement;
higher dimensions use multistart local ascent with KKT residuals; a
brute-force grid oracle cross-checks both.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .arrangement import Arc, Arrangement
from .bivariate import eval_dense
from .config import Tolerances, default_tolerances
from .errors import DegenerateError, InputError
from .landscape import Landscape


@dataclass
class ArcDescriptor:
    source: str
    region: int
    alpha_span: tuple
    witness: tuple
    monotonic: bool = True
    residual: float = 0.0


@dataclass
class Breakpoint:
    alpha: float
    kind: str  # discontinuity | kink | arc-switch
    left: float
    right: float
    value: float


@dataclass
class LocalMax:
    alpha: float
    value: float
    residual: float
    at_breakpoint: bool = False


@dataclass
class Knot:
    """A point where the envelope may stop being continuous and monotone."""

    alpha: float
    value: float
    left: float
    right: float
    kind: str = "critical"  # critical | switch | stationary | endpoint
    residual: float = 0.0


@dataclass
class Segment:
    lo: float
    hi: float
    winner: ArcDescriptor
    arcs: list


@dataclass
class EnvelopeProfile:
    alpha_range: tuple
    breakpoints: list
    segments: list
    samples_alpha: np.ndarray
    samples_value: np.ndarray
    samples_region: np.ndarray
    samples_source: list
    local_maxima: list
    knots: list
    method: str = "exact"
    plateaus: list = field(default_factory=list)
    scale: float = 1.0
    evaluator: object = None
    notes: list = field(default_factory=list)
    piecewise_constant: bool = False

    @property
    def B1(self) -> int:
        return sum(1 for b in self.breakpoints if b.kind == "discontinuity")

    @property
    def B2(self) -> int:
        return len(self.local_maxima)

    def evaluate(self, alphas):
        if self.evaluator is None:
            return np.interp(alphas, self.samples_alpha, self.samples_value)
        return self.evaluator(np.asarray(alphas, dtype=float))[0]

    def summary(self) -> dict:
        return {
            "method": self.method,
            "B1": self.B1,
            "B2": self.B2,
            "breakpoints": [[b.alpha, b.kind] for b in self.breakpoints],
            "local_maxima": [[m.alpha, m.value] for m in self.local_maxima],
        }


# exact tracer for d = 1

def _probe_nodes(lo, hi, n):
    j = np.arange(n)
    return lo + (hi - lo) * (0.5 - 0.5 * np.cos(np.pi * (j + 0.5) / n))


class _ExactTracer:
    def __init__(self, arr: Arrangement):
        self.arr = arr
        self.tol = arr.tol
        self._limits = {}
        self.structs = arr.structures
        for s in self.structs:
            if not s.arcs:
                raise DegenerateError(f"no region covers the slice at alpha={s.mid:.6g}")
        probes = [_probe_nodes(s.lo, s.hi, self.tol.switch_samples) for s in self.structs]
        self.probe_vals = [s.values(p)[0] for s, p in zip(self.structs, probes)]
        self.probes = probes
        top = max(float(np.max(np.abs(v.max(axis=0)))) for v in self.probe_vals)
        self.scale = max(1.0, top)
        self.tie = self.tol.tie_rel * self.scale
        self.thr = self.tol.jump_rel * self.scale

    def winners(self, V):
        best = V.max(axis=0)
        return np.argmax(V >= best - self.tie, axis=0)

    def at(self, s, x):
        """(V, W) of structure s at x, using one-sided continuation at its ends."""
        if s.lo < x < s.hi:
            return s.values([x])
        key = (id(s), x)
        if key not in self._limits:
            self._limits[key] = s.limit(x)
        return self._limits[key]

    def arc_value(self, s, i, x):
        return float(self.at(s, x)[0][i, 0])

    def winner_at(self, s, x):
        V = s.values([x])[0]
        return int(self.winners(V)[0])

    def switches(self, s):
        """Sub-segments of structure s as (a0, a1, winner index) and switch points."""
        xs = self.probes[s_index := self.structs.index(s)]
        win = self.winners(self.probe_vals[s_index])
        found = []
        width = s.hi - s.lo
        for t in range(len(xs) - 1):
            if win[t] != win[t + 1]:
                self._bisect(s, xs[t], int(win[t]), xs[t + 1], int(win[t + 1]), found, width * 1e-5, 0)
        found.sort()
        pieces = []
        a0 = s.lo
        w0 = int(win[0])
        for c, wa, wb in found:
            pieces.append((a0, c, wa))
            a0, w0 = c, wb
        pieces.append((a0, s.hi, int(win[-1]) if not found else w0))
        return pieces, found

    def _bisect(self, s, l, wl, r, wr, found, min_width, depth):
        if wl == wr:
            return
        if r - l <= min_width or depth > 40:
            g = lambda x: self.arc_value(s, wl, x) - self.arc_value(s, wr, x)
            gl, gr = g(l), g(r)
            if gl * gr < 0:
                c = brentq(g, l, r, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            else:
                c = l if abs(gl) <= abs(gr) else r
            found.append((float(c), wl, wr))
            return
        m = 0.5 * (l + r)
        wm = self.winner_at(s, m)
        self._bisect(s, l, wl, m, wm, found, min_width, depth + 1)
        self._bisect(s, m, wm, r, wr, found, min_width, depth + 1)

    def one_sided(self, s, x):
        V, W = self.at(s, x)
        V = V[:, 0]
        i = int(self.winners(V[:, None])[0])
        return float(V.max()), i, float(W[i, 0])

    def slope(self, s, i, x, side, room):
        h = min(1e-6 * (self.arr.ahi - self.arr.alo), 0.25 * room)
        if h <= 0:
            return 0.0
        x2 = x - h if side < 0 else x + h
        v1 = self.arc_value(s, i, x)
        v2 = self.arc_value(s, i, x2)
        return (v1 - v2) / h if side < 0 else (v2 - v1) / h

    def describe(self, s, i, span=None) -> ArcDescriptor:
        arc = s.arcs[i]
        span = span or (s.lo, s.hi)
        x = 0.5 * (span[0] + span[1])
        V, W = s.values([x])
        res = 0.0
        if arc.pos[0] == "root":
            from .bivariate import eval_dense

            res = abs(float(eval_dense(self.arr.bases[arc.pos[1]].C, x, W[i, 0])))
        return ArcDescriptor(self.arr.arc_source(arc), arc.region, span, (x, float(W[i, 0])), True, res)

    def same_arc(self, sa, ia, sb, ib, x):
        a, b = sa.arcs[ia], sb.arcs[ib]
        if a.region != b.region or a.kind != b.kind or a.pos[0] != b.pos[0]:
            return False
        if a.pos[0] == "edge":
            return a.pos[1] == b.pos[1]
        if a.pos[1] != b.pos[1]:
            return False
        wa = float(self.at(sa, x)[1][ia, 0])
        wb = float(self.at(sb, x)[1][ib, 0])
        return abs(wa - wb) <= 1e-7 * (1 + abs(wa))

    def run(self) -> EnvelopeProfile:
        arr = self.arr
        merge = self.tol.merge
        knots = []
        breakpoints = []
        segments = []
        plateaus = []
        piece_lists = []
        for s in self.structs:
            pieces, found = self.switches(s)
            piece_lists.append(pieces)
            for c, wa, wb in found:
                L = self.arc_value(s, wa, c)
                R = self.arc_value(s, wb, c)
                room = min(c - s.lo, s.hi - c)
                sl = self.slope(s, wa, c, -1, room)
                sr = self.slope(s, wb, c, +1, room)
                kink = abs(sl - sr) > 1e-4 * (1 + abs(sl) + abs(sr))
                kind = "kink" if kink else "arc-switch"
                if abs(L - R) > self.thr:
                    kind = "discontinuity"
                u = max(L, R)
                knots.append(Knot(c, u, L, R, "switch"))
                breakpoints.append(Breakpoint(c, kind, L, R, u))
            for a0, a1, wi in pieces:
                segments.append(Segment(a0, a1, self.describe(s, wi, (a0, a1)), [self.arr.arc_source(a) for a in s.arcs]))
                arc = s.arcs[wi]
                cands, plateau = arr.stationary_candidates(arc)
                if plateau:
                    plateaus.append((a0, a1))
                for a, w, res in cands:
                    if not a0 + merge < a < a1 - merge:
                        continue
                    wpos = float(s.positions([a])[wi, 0])
                    if abs(wpos - w) > 1e-6 * (1 + abs(w)):
                        continue
                    v = self.arc_value(s, wi, a)
                    knots.append(Knot(a, v, v, v, "stationary", res))
        # critical values between structures and at the ends
        for k, b in enumerate(arr.critical):
            left = self.structs[k - 1] if k > 0 else None
            right = self.structs[k] if k < len(self.structs) else None
            point = arr.point_structure(b)
            pv = float(point.values([b])[0].max()) if point.arcs else -np.inf
            L = R = None
            if left is not None:
                L, il, _ = self.one_sided(left, b)
            if right is not None:
                R, ir, _ = self.one_sided(right, b)
            # the value at b is the sup over its own slice; the limits are kept separately
            u = pv if point.arcs else max(x for x in (L, R) if x is not None)
            if left is None or right is None:
                lim = R if left is None else L
                knots.append(Knot(b, u, lim if L is None else L, lim if R is None else R, "endpoint"))
                if abs(u - lim) > self.thr:
                    breakpoints.append(Breakpoint(b, "discontinuity", lim if L is None else L, lim if R is None else R, u))
                continue
            knots.append(Knot(b, u, L, R, "critical"))
            jump = max(abs(L - R), abs(u - L), abs(u - R))
            if jump > self.thr:
                breakpoints.append(Breakpoint(b, "discontinuity", L, R, u))
                continue
            room_l = b - left.lo
            room_r = right.hi - b
            # winners of the adjoining sub-segments
            wl = piece_lists[k - 1][-1][2]
            wr = piece_lists[k][0][2]
            sl = self.slope(left, wl, b, -1, room_l)
            sr = self.slope(right, wr, b, +1, room_r)
            kink = abs(sl - sr) > 1e-4 * (1 + abs(sl) + abs(sr))
            if not kink and self.same_arc(left, wl, right, wr, b):
                continue
            breakpoints.append(Breakpoint(b, "kink" if kink else "arc-switch", L, R, u))
        knots = _merge_knots(knots, merge)
        breakpoints = _merge_breakpoints(breakpoints, merge)
        local_max = strict_local_maxima(knots, self.thr, 1e-12 * self.scale)
        bp_alphas = np.array([b.alpha for b in breakpoints])
        for m in local_max:
            if bp_alphas.size and np.min(np.abs(bp_alphas - m.alpha)) <= merge:
                m.at_breakpoint = True
        alphas = np.linspace(arr.alo, arr.ahi, self.tol.samples)
        vals, regs, srcs = self.evaluate(alphas, knots)
        return EnvelopeProfile(
            (arr.alo, arr.ahi),
            breakpoints,
            segments,
            alphas,
            vals,
            regs,
            srcs,
            local_max,
            knots,
            "exact",
            plateaus,
            self.scale,
            evaluator=lambda a: self.evaluate(a, knots),
        )

    def evaluate(self, alphas, knots=None):
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        vals = np.full(alphas.shape, np.nan)
        regs = np.full(alphas.shape, -1, dtype=int)
        srcs = [""] * alphas.size
        crit = np.asarray(self.arr.critical)
        for k, s in enumerate(self.structs):
            sel = np.flatnonzero((alphas > s.lo) & (alphas < s.hi))
            if not sel.size:
                continue
            V, _ = s.values(alphas[sel])
            win = self.winners(V)
            vals[sel] = V.max(axis=0)
            for t, i in zip(sel, win):
                regs[t] = s.arcs[i].region
                srcs[t] = self.arr.arc_source(s.arcs[i])
        rest = np.flatnonzero(np.isnan(vals))
        for t in rest:
            x = alphas[t]
            j = int(np.argmin(np.abs(crit - x)))
            if knots is not None:
                near = [kn for kn in knots if abs(kn.alpha - x) <= 1e-15 + self.tol.merge]
                if near:
                    vals[t] = near[0].value
            if np.isnan(vals[t]):
                point = self.arr.point_structure(float(crit[j]) if abs(crit[j] - x) <= self.tol.merge else x)
                V, _ = point.values([point.mid])
                vals[t] = float(V.max())
                i = int(self.winners(V)[0])
                regs[t] = point.arcs[i].region
                srcs[t] = self.arr.arc_source(point.arcs[i])
            elif regs[t] < 0:
                s = self.structs[min(self.arr.structure_index(x), len(self.structs) - 1)]
                _, i, _ = self.one_sided(s, x)
                regs[t] = s.arcs[i].region
                srcs[t] = self.arr.arc_source(s.arcs[i])
        return vals, regs, srcs


def _merge_knots(knots, tol):
    priority = {"endpoint": 0, "critical": 1, "switch": 2, "stationary": 3}
    knots = sorted(knots, key=lambda k: (k.alpha, priority[k.kind]))
    out = []
    for k in knots:
        if out and k.alpha - out[-1].alpha <= tol:
            prev = out[-1]
            if priority[k.kind] < priority[prev.kind]:
                out[-1] = k
            continue
        out.append(k)
    return out


def _merge_breakpoints(bps, tol):
    rank = {"discontinuity": 0, "kink": 1, "arc-switch": 2}
    bps = sorted(bps, key=lambda b: b.alpha)
    out = []
    for b in bps:
        if out and b.alpha - out[-1].alpha <= tol:
            if rank[b.kind] < rank[out[-1].kind]:
                out[-1] = b
            continue
        out.append(b)
    return out


def strict_local_maxima(knots, thr, mono_eps) -> list:
    """Interior strict local maxima of a function that is continuous and monotone between knots."""
    out = []
    for k in range(1, len(knots) - 1):
        kn, prev, nxt = knots[k], knots[k - 1], knots[k + 1]
        u = kn.value
        if abs(kn.left - u) <= thr:
            left_lower = prev.right < kn.left - mono_eps
        else:
            left_lower = kn.left < u
        if abs(kn.right - u) <= thr:
            right_lower = nxt.left < kn.right - mono_eps
        else:
            right_lower = kn.right < u
        if left_lower and right_lower:
            at_bp = kn.kind != "stationary"
            out.append(LocalMax(kn.alpha, u, kn.residual, at_bp))
    return out


def trace_envelope_1d(l: Landscape, tol: Tolerances | None = None) -> EnvelopeProfile:
    """Exact envelope for one parameter dimension (polynomial or constant pieces)."""
    if l.d != 1:
        raise InputError("trace_envelope_1d needs d = 1; use trace_envelope_numeric")
    arr = Arrangement(l, tol)
    prof = _ExactTracer(arr).run()
    if prof.plateaus:
        prof.notes.append("plateau arcs present: constant value, no strict maxima counted on them")
    return prof


def trace_envelope_constant(l: Landscape, tol: Tolerances | None = None, resolution: int = 401) -> EnvelopeProfile:
    """Piecewise-constant envelope: exact projection for d = 1, grid probing otherwise."""
    if l.kind != "constant":
        raise InputError("trace_envelope_constant needs a constant landscape")
    if l.d == 1:
        prof = trace_envelope_1d(l, tol)
        prof.local_maxima = []
    else:
        prof = _profile_from_grid(l, grid_oracle(l, resolution, tol=tol), tol, constant=True)
    prof.piecewise_constant = True
    return prof


def trace_envelope(l: Landscape, tol: Tolerances | None = None) -> EnvelopeProfile:
    if l.d == 1:
        return trace_envelope_constant(l, tol) if l.kind == "constant" else trace_envelope_1d(l, tol)
    if l.kind == "constant":
        return trace_envelope_constant(l, tol)
    return trace_envelope_numeric(l, tol)


# fast path: one polynomial piece, no boundaries, d = 1

def _near_real_roots(cw):
    """Real parts of the (nearly) real roots of each row's univariate polynomial; NaN pads."""
    n_a, width = cw.shape
    n = width - 1
    Z = np.full((n_a, max(n, 1)), np.nan + 0j)
    if n < 1:
        return np.full((n_a, 0), np.nan)
    scale = np.abs(cw).max(axis=1)
    ok = np.abs(cw[:, -1]) > 1e-12 * np.maximum(scale, 1e-300)
    if ok.any():
        sub = cw[ok]
        if n == 1:
            Z[ok, 0] = -sub[:, 0] / sub[:, 1]
        elif n == 2:
            c0, c1, c2 = sub[:, 0], sub[:, 1], sub[:, 2]
            sq = np.sqrt((c1 * c1 - 4 * c2 * c0).astype(complex))
            # pick the sign that avoids cancellation, then use the product of roots
            q = -0.5 * (c1 + np.where(c1.real >= 0, 1, -1) * sq)
            z1 = q / c2
            z2 = np.where(q != 0, c0 / np.where(q != 0, q, 1), 0)
            Z[ok, 0], Z[ok, 1] = z1, z2
        else:
            comp = np.zeros((sub.shape[0], n, n))
            comp[:, 1:, :-1] = np.eye(n - 1)
            comp[:, :, -1] = -sub[:, :-1] / sub[:, -1:]
            Z[ok] = np.linalg.eigvals(comp)
    for i in np.flatnonzero(~ok):
        c = np.trim_zeros(cw[i][::-1], "f")
        if c.size > 1:
            z = np.roots(c)
            Z[i, : z.size] = z
    # spurious near-real candidates only ever give a lower bound, so be generous
    real = np.abs(Z.imag) <= 1e-6 * (1 + np.abs(Z))
    return np.where(real, Z.real, np.nan)


def single_piece_envelope(l: Landscape, alphas):
    """u*(a) and a maximizer for a one-piece, boundary-free landscape with d = 1."""
    if l.d != 1 or l.N != 1 or l.M != 0:
        raise InputError("fast path needs d = 1, one piece and no boundaries")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    wlo, whi = l.domain.float_w()[0]
    f = l.pieces[0]
    C = f.dense2
    cands = [np.full(alphas.size, wlo), np.full(alphas.size, whi)]
    fw = f.partial(1)
    if fw.degree(1) >= 1:
        Cw = fw.dense2
        cw = (alphas[:, None] ** np.arange(Cw.shape[0])) @ Cw
        R = _near_real_roots(cw)
        R = np.where((R >= wlo) & (R <= whi), R, np.nan)
        cands.extend(R.T)
    Wc = np.array(cands)
    V = eval_dense(C, alphas[None, :], np.where(np.isnan(Wc), wlo, Wc))
    V = np.where(np.isnan(Wc), -np.inf, V)
    k = np.argmax(V, axis=0)
    cols = np.arange(alphas.size)
    return V[k, cols], Wc[k, cols]


# brute-force oracle

def _grid_d1(l: Landscape, a, w):
    """Landscape values on the product grid a x w using dense matrix products."""
    Apow = a[:, None] ** np.arange(max(l.delta_p, l.delta_b) + 1)
    Wpow = w[:, None] ** np.arange(max(l.delta_p, l.delta_b) + 1)

    def grid(p):
        C = p.dense2
        return Apow[:, : C.shape[0]] @ C @ Wpow[:, : C.shape[1]].T

    hv = [grid(b) for b in l.boundaries]
    out = np.full((a.size, w.size), np.nan)
    for k, region in enumerate(l.regions):
        m = np.isnan(out)
        for j, s in enumerate(region.signs):
            if s == "le":
                m &= hv[j] <= 0
            elif s == "ge":
                m &= hv[j] >= 0
        if not m.any():
            continue
        if l.kind == "constant":
            out[m] = float(region.piece)
        else:
            out[m] = grid(region.piece)[m]
    return out


def grid_oracle(l: Landscape, resolution: int, alphas=None, tol: Tolerances | None = None):
    """Max of the landscape over a full w-grid for every a on a grid; returns (alphas, values)."""
    tol = tol or default_tolerances()
    if resolution < 2:
        raise InputError("grid resolution must be at least 2")
    a = np.linspace(*l.domain.float_alpha(), resolution) if alphas is None else np.asarray(alphas, dtype=float)
    wgrid = [np.linspace(lo, hi, resolution) for lo, hi in l.domain.float_w()]
    per_alpha = resolution ** l.d
    if per_alpha > tol.grid_memory_cap:
        raise InputError(f"grid oracle would hold {per_alpha} points per alpha; cap is {tol.grid_memory_cap}")
    chunk = max(1, tol.grid_memory_cap // per_alpha)
    out = np.empty(a.size)
    for start in range(0, a.size, chunk):
        aa = a[start : start + chunk]
        if l.d == 1:
            vals = _grid_d1(l, aa, wgrid[0])
            out[start : start + chunk] = np.nanmax(vals, axis=1)
            continue
        mesh = np.meshgrid(aa, *wgrid, indexing="ij")
        vals = l.evaluate_array(*mesh).reshape(aa.size, -1)
        out[start : start + chunk] = np.nanmax(vals, axis=1)
    return a, out


def _profile_from_grid(l, trace, tol, constant=False, regions=None, residuals=None, maximizers=None):
    """Estimated profile from a sampled trace: jumps and discrete strict maxima."""
    tol = tol or default_tolerances()
    a, v = trace
    scale = max(1.0, float(np.nanmax(np.abs(v))))
    dv = np.diff(v)
    if constant:
        jumps = np.abs(dv) > tol.jump_rel * scale
    else:
        typical = np.median(np.abs(dv)) if dv.size else 0.0
        jumps = np.abs(dv) > max(50 * typical, 1e-6 * scale)
    bps = [Breakpoint(0.5 * (a[i] + a[i + 1]), "discontinuity", v[i], v[i + 1], max(v[i], v[i + 1])) for i in np.flatnonzero(jumps)]
    if regions is not None:
        for i in np.flatnonzero((np.diff(regions) != 0) & ~jumps):
            bps.append(Breakpoint(0.5 * (a[i] + a[i + 1]), "arc-switch", v[i], v[i + 1], max(v[i], v[i + 1])))
    if maximizers is not None:
        # maximizers arrive scaled to the unit box
        moved = np.linalg.norm(np.diff(maximizers, axis=0), axis=1) > 0.1
        have = {round(b.alpha, 15) for b in bps}
        for i in np.flatnonzero(moved & ~jumps):
            x = 0.5 * (a[i] + a[i + 1])
            if round(x, 15) not in have:
                bps.append(Breakpoint(x, "arc-switch", v[i], v[i + 1], max(v[i], v[i + 1])))
    bps.sort(key=lambda b: b.alpha)
    lm = []
    if not constant:
        for i in sample_strict_maxima(v, 1e-9 * scale):
            lm.append(LocalMax(float(a[i]), float(v[i]), float(residuals[i]) if residuals is not None else float("nan")))
    knots = [Knot(float(x), float(y), float(y), float(y), "critical") for x, y in zip(a, v)]
    return EnvelopeProfile(
        (float(a[0]), float(a[-1])),
        bps,
        [],
        a,
        v,
        np.asarray(regions) if regions is not None else np.full(a.shape, -1),
        [""] * a.size,
        lm,
        knots,
        "estimated",
        scale=scale,
        notes=["counts estimated from a sampled trace"],
    )


def sample_strict_maxima(v, eps: float = 0.0) -> list:
    """Indices of strict local maxima of a sampled sequence; plateaus are never strict.

    Neighbouring samples within ``eps`` count as equal.
    """
    v = np.asarray(v, dtype=float)
    out = []
    n = v.size
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n and abs(v[j + 1] - v[i]) <= eps:
            j += 1
        if j == i and v[i] > v[i - 1] + eps and j + 1 < n and v[i] > v[j + 1] + eps:
            out.append(i)
        i = j + 1
    return out


# numeric tracer for any d

@dataclass
class StationaryPoint:
    alpha: float
    w: np.ndarray
    value: float
    region: int
    active: tuple
    residual: float


class BlackBox:
    """Objective given only by evaluation: f(alpha, W) with W of shape (n, d)."""

    def __init__(self, alpha, w, fn, name="black-box"):
        self.alpha = (float(alpha[0]), float(alpha[1]))
        self.w = [(float(lo), float(hi)) for lo, hi in w]
        self.fn = fn
        self.name = name

    @property
    def d(self):
        return len(self.w)


def _kkt_residual(grad, normals):
    """min over mu >= 0 of || grad + sum mu_m n_m || for constraints c_m >= 0 with gradients n_m."""
    from scipy.optimize import nnls

    grad = np.asarray(grad, dtype=float)
    if not normals:
        return float(np.linalg.norm(grad))
    A = -np.array(normals, dtype=float).T
    _, r = nnls(A, grad)
    return float(r)


class _RegionProblem:
    def __init__(self, l: Landscape, k: int):
        self.l = l
        self.k = k
        f = l.pieces[k]
        d = l.d
        self.f = f
        self.grad = [f.partial(i) for i in range(1, d + 1)]
        self.cons = []
        for j, s in enumerate(l.regions[k].signs):
            if s == "free":
                continue
            h = l.boundaries[j]
            sgn = -1.0 if s == "le" else 1.0
            self.cons.append((j, sgn, h, [h.partial(i) for i in range(1, d + 1)]))

    def value(self, a, w):
        return self.f.eval([a, *w])

    def gradient(self, a, w):
        return np.array([g.eval([a, *w]) for g in self.grad])

    def feasible(self, a, w, tol=1e-9):
        return all(sgn * h.eval([a, *w]) >= -tol for _, sgn, h, _ in self.cons)


def _maximize_region(prob: _RegionProblem, a, bounds, starts):
    from scipy.optimize import minimize

    cons = [
        {
            "type": "ineq",
            "fun": (lambda w, s=sgn, h=h: s * h.eval([a, *w])),
            "jac": (lambda w, s=sgn, gh=gh: s * np.array([g.eval([a, *w]) for g in gh])),
        }
        for _, sgn, h, gh in prob.cons
    ]
    best = None
    for x0 in starts:
        if cons:
            res = minimize(
                lambda w: -prob.value(a, w),
                x0,
                jac=lambda w: -prob.gradient(a, w),
                bounds=bounds,
                constraints=cons,
                method="SLSQP",
                options={"ftol": 1e-14, "maxiter": 300},
            )
        else:
            res = minimize(
                lambda w: -prob.value(a, w),
                x0,
                jac=lambda w: -prob.gradient(a, w),
                bounds=bounds,
                method="L-BFGS-B",
                options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500},
            )
        w = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
        if not prob.feasible(a, w):
            continue
        v = prob.value(a, w)
        if best is None or v > best[0]:
            best = (v, w)
    return best


def stationarity_report(l: Landscape, a: float, w, region: int, act_tol=1e-7):
    """Active set and KKT residual of a candidate maximizer of region ``region`` at a."""
    prob = _RegionProblem(l, region)
    w = np.asarray(w, dtype=float)
    normals = []
    active = []
    for j, sgn, h, gh in prob.cons:
        if abs(h.eval([a, *w])) <= act_tol:
            normals.append(sgn * np.array([g.eval([a, *w]) for g in gh]))
            active.append(j)
    for i, (lo, hi) in enumerate(l.domain.float_w()):
        e = np.zeros(l.d)
        if abs(w[i] - lo) <= 1e-9:
            e[i] = 1.0
            normals.append(e.copy())
        if abs(w[i] - hi) <= 1e-9:
            e[i] = -1.0
            normals.append(e.copy())
    return tuple(active), _kkt_residual(prob.gradient(a, w), normals)


def trace_envelope_numeric(l, tol: Tolerances | None = None, grid: int | None = None, starts: int | None = None, seed: int = 0) -> EnvelopeProfile:
    """Multistart local ascent per a-grid point and region; counts are estimates."""
    tol = tol or default_tolerances()
    grid = grid or tol.numeric_grid
    starts = starts or tol.multistarts
    if isinstance(l, BlackBox):
        return _trace_blackbox(l, tol, grid, starts, seed)
    rng = np.random.default_rng(seed)
    bounds = l.domain.float_w()
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    alphas = np.linspace(*l.domain.float_alpha(), grid)
    probs = [_RegionProblem(l, k) for k in range(l.N)]
    vals = np.full(grid, -np.inf)
    regs = np.full(grid, -1)
    resid = np.full(grid, np.nan)
    points = []
    warm = [None] * l.N
    base_starts = lo + (hi - lo) * rng.random((starts, l.d))
    for t, a in enumerate(alphas):
        best = None
        for k, prob in enumerate(probs):
            x0s = list(base_starts)
            if warm[k] is not None:
                x0s.insert(0, warm[k])
            r = _maximize_region(prob, a, bounds, x0s)
            if r is None:
                continue
            warm[k] = r[1]
            if best is None or r[0] > best[0] + 1e-12:
                best = (r[0], r[1], k)
        if best is None:
            raise DegenerateError(f"no feasible region found at alpha={a:.6g}")
        active, res = stationarity_report(l, a, best[1], best[2])
        vals[t], regs[t], resid[t] = best[0], best[2], res
        points.append(StationaryPoint(float(a), best[1], best[0], best[2], active, res))
    W = (np.array([sp.w for sp in points]) - lo) / (hi - lo)
    prof = _profile_from_grid(l, (alphas, vals), tol, constant=False, regions=regs, residuals=resid, maximizers=W)
    prof.notes.append("numeric multistart trace; B1/B2 are estimates")
    prof.stationary_points = points
    return prof


def _trace_blackbox(bb: BlackBox, tol, grid, starts, seed):
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bb.w])
    hi = np.array([b[1] for b in bb.w])
    alphas = np.linspace(*bb.alpha, grid)
    x0s = lo + (hi - lo) * rng.random((starts, bb.d))
    vals = np.empty(grid)
    resid = np.empty(grid)
    warm = None
    for t, a in enumerate(alphas):
        def obj(w):
            return -float(bb.fn(a, np.asarray(w)[None, :])[0])

        cands = list(x0s) + ([warm] if warm is not None else [])
        scores = [obj(x) for x in cands]
        order = np.argsort(scores)[: max(4, starts // 4)]
        best = None
        for i in order:
            res = minimize(obj, cands[i], bounds=list(zip(lo, hi)), method="L-BFGS-B")
            if best is None or res.fun < best.fun:
                best = res
        warm = best.x
        vals[t] = -best.fun
        h = 1e-6
        g = np.array([(obj(best.x - h * e) - obj(best.x + h * e)) / (2 * h) for e in np.eye(bb.d)])
        normals = []
        for i in range(bb.d):
            if best.x[i] <= lo[i] + 1e-9:
                normals.append(np.eye(bb.d)[i])
            if best.x[i] >= hi[i] - 1e-9:
                normals.append(-np.eye(bb.d)[i])
        resid[t] = _kkt_residual(g, normals)
    prof = _profile_from_grid(None, (alphas, vals), tol, constant=False, residuals=resid)
    prof.notes.append(f"numeric trace of {bb.name}; B1/B2 are estimates")
    return prof


# regularity

def check_regularity(l: Landscape, solutions, rank_tol: float = 1e-8) -> dict:
    """Jacobian rank checks of the stationarity system at annotated solutions.

    Each solution is a dict with ``alpha``, ``w``, optional ``active`` (boundary
    indices) and optional ``region``.
    """
    report = []
    ok_all = True
    for sol in solutions:
        a = float(sol["alpha"])
        w = np.atleast_1d(np.asarray(sol["w"], dtype=float))
        region = sol.get("region")
        if region is None:
            region = int(l.region_index(np.array(a), *[np.array(x) for x in w]))
        active = sol.get("active")
        if active is None:
            active = tuple(j for j, h in enumerate(l.boundaries) if abs(h.eval([a, *w])) <= 1e-9)
        d = l.d
        f = l.pieces[region]
        pt = [a, *w]
        issues = []
        G = []
        Hh = []
        for j in active:
            h = l.boundaries[j]
            full = np.array([h.partial(i).eval(pt) for i in range(d + 1)])
            if np.linalg.norm(full) <= rank_tol:
                issues.append(f"boundary {j} has a vanishing gradient (0 is not a regular value)")
            G.append(full[1:])
            Hh.append(np.array([[h.partial(i).partial(k).eval(pt) for k in range(1, d + 1)] for i in range(1, d + 1)]))
        gf = np.array([f.partial(i).eval(pt) for i in range(1, d + 1)])
        Hf = np.array([[f.partial(i).partial(k).eval(pt) for k in range(1, d + 1)] for i in range(1, d + 1)])
        S = len(active)
        if S:
            Gm = np.array(G)
            lam = np.linalg.lstsq(Gm.T, gf, rcond=None)[0]
            top = Hf - sum(lj * H for lj, H in zip(lam, Hh))
            J = np.block([[top, -Gm.T], [Gm, np.zeros((S, S))]])
        else:
            J = Hf
        sv = np.linalg.svd(J, compute_uv=False) if J.size else np.array([])
        rank = int(np.sum(sv > rank_tol * max(1.0, sv.max() if sv.size else 1.0)))
        if rank < d + S:
            issues.append(f"stationarity Jacobian rank {rank} < {d + S}")
        ok = not issues
        ok_all &= ok
        report.append({"alpha": a, "w": w.tolist(), "region": region, "active": list(active), "rank": rank, "regular": ok, "issues": issues})
    out = {"regular": ok_all, "points": report}
    if not ok_all:
        out["recommendation"] = "apply perturb_landscape with a small tau (e.g. 1/1000) and re-solve"
    return out


# emitters

def write_envelope_csv(profile: EnvelopeProfile, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["alpha", "ustar", "winner_region", "winner_source"])
        for a, v, r, s in zip(profile.samples_alpha, profile.samples_value, profile.samples_region, profile.samples_source):
            wr.writerow([repr(float(a)), repr(float(v)), int(r), s])


def write_breakpoints_csv(profile: EnvelopeProfile, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["alpha", "kind", "left_limit", "right_limit"])
        for b in profile.breakpoints:
            wr.writerow([repr(float(b.alpha)), b.kind, repr(float(b.left)), repr(float(b.right))])


def write_localmaxima_csv(profile: EnvelopeProfile, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["alpha", "value", "residual"])
        for m in profile.local_maxima:
            wr.writerow([repr(float(m.alpha)), repr(float(m.value)), repr(float(m.residual))])
