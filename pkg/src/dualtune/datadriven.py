"""Data-driven tuning: ERM over the hyperparameter, gap curves and shattering search."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .envelope import single_piece_envelope, trace_envelope, _near_real_roots
from .errors import DualtuneError, InputError
from .landscape import Landscape

log = logging.getLogger(__name__)


class InstanceDistribution:
    """Seeded generator of problem instances with utilities in [0, H].

    ``sampler(rng)`` returns a Landscape or any object with ``ustar(alphas)``
    and ``alpha_range``.
    """

    def __init__(self, sampler, alpha_range=(0.0, 1.0), utility_range=None, name="custom"):
        self.sampler = sampler
        self.alpha_range = (float(alpha_range[0]), float(alpha_range[1]))
        self.utility_range = utility_range
        self.name = name

    def draw(self, m: int, seed) -> list:
        rng = np.random.default_rng(seed)
        return [self.sampler(rng) for _ in range(m)]

    @classmethod
    def from_family(cls, family, name=None):
        inst = family.sample(np.random.default_rng(0))
        lo, hi = _alpha_range(inst)
        return cls(family.sample, (lo, hi), name=name or getattr(family, "name", "family"))


def _alpha_range(inst):
    if isinstance(inst, Landscape):
        return inst.domain.float_alpha()
    return tuple(inst.alpha_range)


def _is_fast(inst) -> bool:
    return isinstance(inst, Landscape) and inst.kind == "polynomial" and inst.d == 1 and inst.N == 1 and inst.M == 0


class EnvelopeBank:
    """Dual utility functions of a list of instances, evaluated on demand.

    Boundary-free single-piece landscapes sharing a box are evaluated in one
    stacked root solve; everything else is traced once and cached.
    """

    def __init__(self, instances):
        self.instances = list(instances)
        self.skipped = 0
        self._profiles = {}
        fast = [i for i, x in enumerate(self.instances) if _is_fast(x)]
        self._fast_idx = np.array(fast, dtype=int)
        self._slow_idx = [i for i in range(len(self.instances)) if i not in set(fast)]
        if fast:
            boxes = {self.instances[i].domain.w for i in fast}
            if len(boxes) != 1:
                self._slow_idx = sorted(self._slow_idx + fast)
                self._fast_idx = np.array([], dtype=int)
            else:
                self._wbox = self.instances[fast[0]].domain.float_w()[0]
                dense = [self.instances[i].pieces[0].dense2 for i in fast]
                I = max(c.shape[0] for c in dense)
                J = max(c.shape[1] for c in dense)
                self._C = np.zeros((len(dense), I, J))
                for k, c in enumerate(dense):
                    self._C[k, : c.shape[0], : c.shape[1]] = c
        self._ok = np.ones(len(self.instances), dtype=bool)
        for i in self._slow_idx:
            inst = self.instances[i]
            if isinstance(inst, Landscape):
                try:
                    self._profiles[i] = trace_envelope(inst)
                except DualtuneError as exc:
                    log.warning("instance %d skipped: %s", i, exc)
                    self._ok[i] = False
                    self.skipped += 1

    def __len__(self):
        return len(self.instances)

    @property
    def valid(self) -> np.ndarray:
        return self._ok

    def _fast_values(self, alphas):
        a = np.asarray(alphas, dtype=float)
        C = self._C
        n, I, J = C.shape
        wlo, whi = self._wbox
        apow = a[None, :, None] ** np.arange(I)[None, None, :]  # 1 x A x I
        coef = np.einsum("xai,nij->naj", apow, C)  # n x A x J : coefficients in w
        wder = coef[:, :, 1:] * np.arange(1, J)[None, None, :]
        cands = [np.full(coef.shape[:2], wlo), np.full(coef.shape[:2], whi)]
        if wder.shape[2] > 1:
            R = _near_real_roots(wder.reshape(-1, J - 1)).reshape(n, a.size, -1)
            R = np.where((R >= wlo) & (R <= whi), R, np.nan)
            cands.extend(np.moveaxis(R, 2, 0))
        Wc = np.array(cands)  # K x n x A
        Wsafe = np.where(np.isnan(Wc), wlo, Wc)
        V = np.zeros(Wc.shape)
        for j in range(J - 1, -1, -1):
            V = V * Wsafe + coef[None, :, :, j]
        V = np.where(np.isnan(Wc), -np.inf, V)
        return V.max(axis=0)

    def values(self, alphas) -> np.ndarray:
        """Matrix of u*_x(alpha): one row per instance (NaN rows for skipped ones)."""
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        out = np.full((len(self.instances), alphas.size), np.nan)
        if self._fast_idx.size:
            step = max(1, 2_000_000 // max(1, self._fast_idx.size))
            for s in range(0, alphas.size, step):
                out[self._fast_idx, s : s + step] = self._fast_values(alphas[s : s + step])
        for i in self._slow_idx:
            if not self._ok[i]:
                continue
            inst = self.instances[i]
            if i in self._profiles:
                out[i] = self._profiles[i].evaluate(alphas)
            else:
                out[i] = np.asarray(inst.ustar(alphas), dtype=float)
        return out

    def mean(self, alphas) -> np.ndarray:
        V = self.values(alphas)
        return V[self._ok].mean(axis=0)

    def breakpoints(self) -> list:
        pts = []
        for p in self._profiles.values():
            pts.extend(b.alpha for b in p.breakpoints)
        for inst in self.instances:
            if hasattr(inst, "breakpoints") and not isinstance(inst, Landscape):
                pts.extend(inst.breakpoints())
        return sorted(set(pts))


@dataclass
class TuningReport:
    m: int
    alpha_hat: float
    alpha_star: float | None = None
    gap: float | None = None
    heldout_noise: float | None = None
    train_value: float | None = None
    skipped: int = 0
    method: str = "grid"
    curve: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _tie(v) -> float:
    """Values this close to the max count as tied (rounding in averaged envelopes)."""
    return 1e-12 * (1.0 + float(np.max(np.abs(v))))


def _argmax_refined(fun, lo, hi, grid: int, refine: bool = True):
    """Grid argmax of a vector function with bounded 1-D polishing; ties go to the smaller a."""
    A = np.linspace(lo, hi, grid)
    v = fun(A)
    tie = _tie(v)
    i = int(np.flatnonzero(v >= v.max() - tie)[0])
    best_a, best_v = float(A[i]), float(v[i])
    if refine:
        l_, r_ = float(A[max(i - 1, 0)]), float(A[min(i + 1, grid - 1)])
        res = minimize_scalar(lambda x: -float(fun(np.array([x]))[0]), bounds=(l_, r_), method="bounded", options={"xatol": 1e-12})
        if -res.fun > best_v + tie:
            best_a, best_v = float(res.x), float(-res.fun)
    return best_a, best_v


def _erm(bank: EnvelopeBank, lo, hi, alpha_eval: str, grid: int):
    if alpha_eval == "grid":
        return _argmax_refined(bank.mean, lo, hi, grid)
    if alpha_eval != "exact":
        raise InputError(f"alpha_eval must be 'exact' or 'grid', got {alpha_eval!r}")
    # candidates: endpoints, breakpoints, and the best point of every segment between them
    cuts = [lo] + [b for b in bank.breakpoints() if lo < b < hi] + [hi]
    cand = list(cuts)
    for a0, a1 in zip(cuts[:-1], cuts[1:]):
        if a1 - a0 <= 1e-12:
            continue
        xs = np.linspace(a0, a1, 66)[1:-1]
        vs = bank.mean(xs)
        k = int(np.argmax(vs))
        l_, r_ = float(xs[max(k - 1, 0)]), float(xs[min(k + 1, xs.size - 1)])
        if l_ < r_:
            res = minimize_scalar(lambda x: -float(bank.mean(np.array([x]))[0]), bounds=(l_, r_), method="bounded", options={"xatol": 1e-12})
            cand.append(float(res.x))
        cand.append(float(xs[k]))
    cand = np.array(sorted(set(cand)))
    vals = bank.mean(cand)
    k = int(np.flatnonzero(vals >= vals.max() - _tie(vals))[0])
    return float(cand[k]), float(vals[k])


def erm_tune(dist: InstanceDistribution, m: int, seed, alpha_eval: str = "grid", grid: int = 2001, heldout=None) -> TuningReport:
    """ERM over alpha on m drawn instances; gap against a held-out sample when given.

    ``heldout`` is an EnvelopeBank (or None for 50 m fresh instances).
    """
    if m < 1:
        raise InputError("m must be >= 1")
    lo, hi = dist.alpha_range
    bank = EnvelopeBank(dist.draw(m, [int(s) for s in np.atleast_1d(seed)] + [0]))
    a_hat, v_hat = _erm(bank, lo, hi, alpha_eval, grid)
    rep = TuningReport(m, a_hat, train_value=v_hat, skipped=bank.skipped, method=alpha_eval)
    if heldout is None:
        heldout = EnvelopeBank(dist.draw(50 * m, [int(s) for s in np.atleast_1d(seed)] + [1]))
    a_star, v_star = _argmax_refined(heldout.mean, lo, hi, grid)
    _fill_gap(rep, heldout, a_star, v_star)
    return rep


def _fill_gap(rep: TuningReport, heldout: EnvelopeBank, a_star, v_star):
    V = heldout.values(np.array([rep.alpha_hat, a_star]))[heldout.valid]
    rep.alpha_star = a_star
    rep.gap = float(v_star - V[:, 0].mean())
    diff = V[:, 1] - V[:, 0]
    rep.heldout_noise = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0


def fit_slope(ms, gaps) -> float:
    ms = np.asarray(ms, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    ok = gaps > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(ms[ok]), np.log(gaps[ok]), 1)[0])


@dataclass
class GapCurve:
    m: list
    mean_gap: list
    std_gap: list
    slope: float
    alpha_star: float
    heldout_size: int
    heldout_noise: float
    reports: list = field(default_factory=list)

    def rows(self):
        return [(m, g, s, self.slope) for m, g, s in zip(self.m, self.mean_gap, self.std_gap)]


def gap_curve(dist: InstanceDistribution, m_list, trials: int = 10, seed=0, grid: int = 2001, alpha_eval: str = "grid") -> GapCurve:
    """Mean and std of the held-out ERM gap per m, with the log-log slope of the mean."""
    if trials < 10:
        raise InputError("trials must be >= 10")
    m_list = [int(m) for m in m_list]
    if any(m < 1 for m in m_list):
        raise InputError("every m must be >= 1")
    lo, hi = dist.alpha_range
    heldout = EnvelopeBank(dist.draw(50 * max(m_list), [int(seed), 1]))
    a_star, v_star = _argmax_refined(heldout.mean, lo, hi, grid)
    means, stds, reps = [], [], []
    noise = 0.0
    for m in m_list:
        gaps = []
        for t in range(trials):
            bank = EnvelopeBank(dist.draw(m, [int(seed), 2, m, t]))
            a_hat, v_hat = _erm(bank, lo, hi, alpha_eval, grid)
            rep = TuningReport(m, a_hat, train_value=v_hat, skipped=bank.skipped, method=alpha_eval)
            _fill_gap(rep, heldout, a_star, v_star)
            noise = max(noise, rep.heldout_noise)
            gaps.append(rep.gap)
            reps.append(rep)
        means.append(float(np.mean(gaps)))
        stds.append(float(np.std(gaps, ddof=1)))
    return GapCurve(m_list, means, stds, fit_slope(m_list, means), a_star, len(heldout), noise, reps)


@dataclass
class ShatterResult:
    size: int
    exhaustive: bool
    witness: tuple = ()
    thresholds: tuple = ()

    def __int__(self):
        return self.size


def _threshold_candidates(row, levels):
    u = np.unique(row)
    if u.size <= 1:
        return np.array([u[0] if u.size else 0.0])
    mids = 0.5 * (u[1:] + u[:-1])
    if mids.size <= levels:
        return mids
    q = np.quantile(row, np.linspace(0, 1, levels + 2)[1:-1])
    return np.unique(np.concatenate([q, [mids[0], mids[-1]]]))


def _shatters(bits_per_inst, k):
    """Search threshold choices so the k instances realize all 2^k patterns over the a-candidates."""
    target = 1 << k
    n_alpha = bits_per_inst[0].shape[1]

    def rec(level, codes, chosen):
        if level == k:
            return chosen if np.unique(codes).size == target else None
        for q in range(bits_per_inst[level].shape[0]):
            new = codes | (bits_per_inst[level][q].astype(np.int64) << level)
            # every prefix pattern must already appear
            if np.unique(new).size < (1 << (level + 1)):
                continue
            got = rec(level + 1, new, chosen + (q,))
            if got is not None:
                return got
        return None

    return rec(0, np.zeros(n_alpha, dtype=np.int64), ())


def shattering_search(U, max_set_size: int, levels: int = 16, budget: int = 200_000) -> ShatterResult:
    """Largest pseudo-shattered subset of instances; rows of U are u_x sampled over a-candidates."""
    U = np.asarray(U, dtype=float)
    if U.size == 0 or U.shape[0] == 0:
        return ShatterResult(0, True)
    n = U.shape[0]
    if max_set_size > n:
        raise InputError(f"pool of {n} instances is smaller than max_set_size={max_set_size}")
    cands = [_threshold_candidates(U[i], levels) for i in range(n)]
    bits = [U[i][None, :] >= cands[i][:, None] for i in range(n)]
    best = ShatterResult(0, True)
    spent = 0
    for k in range(1, max_set_size + 1):
        if (1 << k) > U.shape[1]:
            break
        found = None
        for subset in itertools.combinations(range(n), k):
            spent += 1
            if spent > budget:
                best.exhaustive = False
                return best
            got = _shatters([bits[i] for i in subset], k)
            if got is not None:
                found = (subset, tuple(float(cands[i][q]) for i, q in zip(subset, got)))
                break
        if found is None:
            break
        best = ShatterResult(k, True, found[0], found[1])
    return best


def shattering_lower_bound(U, max_set_size: int, levels: int = 16, budget: int = 200_000) -> int:
    return shattering_search(U, max_set_size, levels, budget).size
