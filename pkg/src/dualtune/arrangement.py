"""Arrangement of critical and boundary curves in the (a, w) plane for d = 1.

Between consecutive critical a values every curve has a fixed number of
real roots in the w-range, in a fixed order, so each root index is an
a-monotonic arc. The envelope tracer works interval by interval on top of
this structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bivariate import (
    content_in_alpha,
    divides,
    eval_dense,
    exact_div,
    poly_gcd,
    primitive_part,
    resultant_w,
    solve_bivariate,
    squarefree_w,
    to_rec,
)
from .config import Tolerances, default_tolerances
from .errors import InputError
from .landscape import Landscape
from .poly import Polynomial
from .roots import real_roots_univariate


@dataclass
class BaseCurve:
    poly: Polynomial
    boundary_ids: tuple
    crit_regions: tuple

    def __post_init__(self):
        self.C = self.poly.dense2
        self.Cw = self.poly.partial(1).dense2


@dataclass(frozen=True)
class Arc:
    """Candidate maximizer family: region, source kind and position label.

    ``pos`` is ("edge", 0|1) or ("root", base_index, root_index).
    """

    region: int
    kind: str  # "crit", "bnd" or "edge"
    pos: tuple


def gcd_free_basis(polys) -> list:
    """Pairwise coprime square-free polynomials whose products recover the inputs' factors."""
    basis: list = []
    todo = [p for p in polys if p.degree(1) > 0]
    while todo:
        x = todo.pop()
        if x.degree(1) <= 0:
            continue
        for k, b in enumerate(basis):
            g = poly_gcd(x, b)
            if g.is_constant():
                continue
            basis.pop(k)
            for part in (g, exact_div(b, g)):
                if part.degree(1) > 0:
                    basis.append(primitive_part(part))
            rest = exact_div(x, g)
            if rest.degree(1) > 0:
                todo.append(primitive_part(rest))
            break
        else:
            basis.append(primitive_part(x))
    return basis


def batched_roots(C, Cw, alphas, k, wlo, whi, polish=3, ref=None):
    """The k real roots in [wlo, whi] of sum C[i,j] a^i w^j for each a, sorted.

    The count k is known from exact isolation on the interval, so the k
    eigenvalues closest to the real segment are taken. With ``ref`` (shape
    len(alphas) x k) the eigenvalue nearest each reference position is taken
    instead, which keeps arcs apart at interval ends where roots collide.
    """
    alphas = np.asarray(alphas, dtype=float)
    n_a = alphas.size
    if k == 0:
        return np.zeros((n_a, 0))
    apow = alphas[:, None] ** np.arange(C.shape[0])
    cw = apow @ C
    n = cw.shape[1] - 1
    scale = np.abs(cw).max(axis=1)
    lc = cw[:, -1]
    ok = np.abs(lc) > 1e-13 * np.maximum(scale, 1e-300)
    Z = np.full((n_a, n), 1e12 + 0j)
    if ok.any():
        sub = cw[ok]
        if n == 1:
            Z[ok, 0] = -sub[:, 0] / sub[:, 1]
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
    re = Z.real
    score = np.abs(Z.imag) + np.maximum(wlo - re, 0) + np.maximum(re - whi, 0)
    if ref is not None:
        idx = np.empty((n_a, k), dtype=int)
        for r_i in range(n_a):
            # only (nearly) real roots in the box compete, topped up if too few
            free = score[r_i] <= 1e-6 * (1 + np.abs(Z[r_i]))
            if free.sum() < k:
                free[np.argsort(score[r_i])[:k]] = True
            for j in range(k):
                dist = np.where(free, np.abs(Z[r_i] - ref[r_i, j]), np.inf)
                idx[r_i, j] = int(np.argmin(dist))
                free[idx[r_i, j]] = False
    else:
        idx = np.argsort(score, axis=1)[:, :k]
    r = np.clip(np.take_along_axis(re, idx, axis=1), wlo, whi)
    A = np.repeat(alphas[:, None], k, axis=1)
    for _ in range(polish):
        v = eval_dense(C, A, r)
        dv = eval_dense(Cw, A, r)
        safe = np.abs(dv) > 1e-300
        step = np.where(safe, v / np.where(safe, dv, 1.0), 0.0)
        cand = np.clip(r - step, wlo, whi)
        better = np.abs(eval_dense(C, A, cand)) < np.abs(v)
        r = np.where(better, cand, r)
    return np.sort(r, axis=1)


class Structure:
    """Combinatorial type of the arrangement on one open interval (or at one point)."""

    def __init__(self, arr: "Arrangement", lo: float, hi: float, at: float | None = None):
        self.arr = arr
        self.lo, self.hi = lo, hi
        mid = at if at is not None else 0.5 * (lo + hi)
        self.mid = mid
        m = Fraction(mid)
        wlo, whi = arr.wlo, arr.whi
        self.counts = []
        self.root_vals = []
        entries = []
        for b, base in enumerate(arr.bases):
            uni = base.poly.substitute(0, m).univariate_coeffs(1)
            vals = []
            for r in real_roots_univariate(uni, arr.wlo_q, arr.whi_q, arr.tol.isolation):
                if r.value - wlo > 1e-12 and whi - r.value > 1e-12:
                    vals.append(r.value)
            self.counts.append(len(vals))
            self.root_vals.append(vals)
            for k, v in enumerate(vals):
                entries.append((v, b, k))
        entries.sort()
        splits = [(v, ("root", b, k)) for v, b, k in entries if arr.bases[b].boundary_ids]
        pts = [(wlo, ("edge", 0))] + splits + [(whi, ("edge", 1))]
        arcs = []
        seen = set()

        def add(region, kind, pos):
            key = (region, pos)
            if region is None or key in seen:
                return
            seen.add(key)
            arcs.append(Arc(region, kind, pos))

        def kind_of(pos):
            return "edge" if pos[0] == "edge" else "bnd"

        for t in range(len(pts) - 1):
            wl, pl = pts[t]
            wr, pr = pts[t + 1]
            r = arr.first_match(m, Fraction(0.5 * (wl + wr)))
            add(r, kind_of(pl), pl)
            add(r, kind_of(pr), pr)
            if r is None:
                continue
            for v, b, k in entries:
                base = arr.bases[b]
                if wl < v < wr and not base.boundary_ids and r in base.crit_regions:
                    add(r, "crit", ("root", b, k))
        for v, pos in splits:
            zero = arr.bases[pos[1]].boundary_ids
            add(arr.first_match(m, Fraction(v), zero), "bnd", pos)
        self.arcs = arcs

    def positions(self, alphas, ref=None):
        """w-position of every arc at each a (shape: arcs x len(alphas)).

        ``ref`` maps base index to reference roots (len(alphas) x count).
        """
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        roots = {}
        W = np.empty((len(self.arcs), alphas.size))
        for i, arc in enumerate(self.arcs):
            if arc.pos[0] == "edge":
                W[i] = self.arr.whi if arc.pos[1] else self.arr.wlo
                continue
            _, b, k = arc.pos
            if b not in roots:
                if alphas.size == 1 and alphas[0] == self.mid:
                    roots[b] = np.array([self.root_vals[b]])
                else:
                    base = self.arr.bases[b]
                    r = None if ref is None else ref.get(b)
                    roots[b] = batched_roots(base.C, base.Cw, alphas, self.counts[b], self.arr.wlo, self.arr.whi, ref=r)
            W[i] = roots[b][:, k]
        return W

    def _base_roots(self, x, ref=None):
        out = {}
        for b, base in enumerate(self.arr.bases):
            if self.counts[b]:
                r = None if ref is None else ref[b][None, :]
                out[b] = batched_roots(base.C, base.Cw, [x], self.counts[b], self.arr.wlo, self.arr.whi, ref=r)[0]
        return out

    def limit(self, x):
        """Arc values and positions at an end x of the interval, by continuation from inside."""
        inner = self.hi if x <= self.lo else self.lo
        roots = None
        for e in range(1, 13):
            y = x + (inner - x) * 4.0**-e
            roots = self._base_roots(y, roots)
        roots = self._base_roots(x, roots)
        ref = {b: r[None, :] for b, r in roots.items()}
        return self.values([x], ref)

    def values(self, alphas, ref=None):
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        W = self.positions(alphas, ref)
        V = np.empty_like(W)
        for i, arc in enumerate(self.arcs):
            V[i] = eval_dense(self.arr.piece_dense[arc.region], alphas, W[i])
        return V, W


class Arrangement:
    def __init__(self, l: Landscape, tol: Tolerances | None = None):
        if l.d != 1:
            raise InputError("the exact arrangement needs one parameter dimension")
        self.l = l
        self.tol = tol or default_tolerances()
        self.alo_q, self.ahi_q = l.domain.alpha
        self.wlo_q, self.whi_q = l.domain.w[0]
        self.alo, self.ahi = float(self.alo_q), float(self.ahi_q)
        self.wlo, self.whi = float(self.wlo_q), float(self.whi_q)
        self.pieces = l.pieces
        self.piece_dense = [p.dense2 for p in self.pieces]
        self.box = ((self.alo, self.ahi), (self.wlo, self.whi))
        self._stationary_cache: dict = {}
        self._build_curves()
        self.critical = self._critical_alphas()
        self.structures = [Structure(self, a, b) for a, b in zip(self.critical[:-1], self.critical[1:])]

    # curve bookkeeping
    def _build_curves(self):
        self.extra_critical = []
        originals = [(h, "bnd", j) for j, h in enumerate(self.l.boundaries)]
        self.crit_polys = []
        for i, f in enumerate(self.pieces):
            K = f.partial(1)
            self.crit_polys.append(K)
            if not K.is_zero():
                originals.append((K, "crit", i))
        prims = []
        for poly, _, _ in originals:
            c = content_in_alpha(poly)
            if len(c) > 1:
                self.extra_critical.append(c)
            if poly.degree(1) >= 1:
                prims.append(squarefree_w(poly))
        basis = gcd_free_basis(prims)
        self.bases = []
        for p in basis:
            bids = tuple(j for j, h in enumerate(self.l.boundaries) if h.degree(1) >= 1 and divides(p, h))
            cids = tuple(i for i, K in enumerate(self.crit_polys) if K.degree(1) >= 1 and divides(p, K))
            self.bases.append(BaseCurve(p, bids, cids))

    def _critical_alphas(self):
        vals = []

        def add(coeffs):
            if len(coeffs) > 1 and any(coeffs):
                vals.extend(r.value for r in real_roots_univariate(coeffs, self.alo_q, self.ahi_q, self.tol.isolation))

        for c in self.extra_critical:
            add(c)
        for base in self.bases:
            rec = to_rec(base.poly)
            add(rec[-1])
            add(resultant_w(base.poly, base.poly.partial(1)))
            for e in (self.wlo_q, self.whi_q):
                edge = base.poly.substitute(1, e)
                if not edge.is_zero():
                    add(edge.univariate_coeffs(0))
        for i in range(len(self.bases)):
            for j in range(i + 1, len(self.bases)):
                add(resultant_w(self.bases[i].poly, self.bases[j].poly))
        merge = self.tol.merge
        inner = sorted(v for v in vals if self.alo + merge < v < self.ahi - merge)
        out = [self.alo]
        for v in inner:
            if v - out[-1] > merge:
                out.append(v)
        out.append(self.ahi)
        return out

    def first_match(self, a: Fraction, w: Fraction, zero=()):
        point = [a, w]
        for k, region in enumerate(self.l.regions):
            ok = True
            for j, (h, s) in enumerate(zip(self.l.boundaries, region.signs)):
                if s == "free":
                    continue
                v = 0 if j in zero else h.eval(point)
                if (s == "le" and v > 0) or (s == "ge" and v < 0):
                    ok = False
                    break
            if ok:
                return k
        return None

    def structure_index(self, alpha: float) -> int:
        i = int(np.searchsorted(self.critical, alpha, side="right")) - 1
        return min(max(i, 0), len(self.structures) - 1)

    def point_structure(self, alpha: float) -> Structure:
        return Structure(self, alpha, alpha, at=alpha)

    # stationarity systems
    def stationary_candidates(self, arc: Arc):
        """Points where the arc's value function has zero a-derivative.

        Returns (points, plateau) with points as (a, w, residual).
        """
        if arc.kind == "edge":
            key = ("edge", arc.region, arc.pos[1])
        else:
            key = (arc.kind, arc.region, arc.pos[1])
        if key in self._stationary_cache:
            return self._stationary_cache[key]
        f = self.pieces[arc.region]
        fa, fw = f.partial(0), f.partial(1)
        out = ([], False)
        if arc.kind == "edge":
            e = self.whi_q if arc.pos[1] else self.wlo_q
            g = fa.substitute(1, e)
            if g.is_zero():
                out = ([], True)
            else:
                pts = [(r.value, float(e), 0.0) for r in real_roots_univariate(g.univariate_coeffs(0), self.alo_q, self.ahi_q, self.tol.isolation)]
                out = (pts, False)
        else:
            B = self.bases[arc.pos[1]].poly
            G = fa if arc.kind == "crit" else fa * B.partial(1) - fw * B.partial(0)
            if G.is_zero():
                out = ([], True)
            else:
                sol = solve_bivariate(B, G, self.box)
                pts = []
                for a, w in sol.points:
                    res = max(abs(B.eval((a, w))), abs(G.eval((a, w))))
                    pts.append((a, w, res))
                out = (pts, sol.shared_curve)
        self._stationary_cache[key] = out
        return out

    def arc_source(self, arc: Arc) -> str:
        if arc.pos[0] == "edge":
            return "edge:hi" if arc.pos[1] else "edge:lo"
        base = self.bases[arc.pos[1]]
        if arc.kind == "crit":
            return "critical"
        return f"boundary:{base.boundary_ids[0]}" if base.boundary_ids else "boundary"
