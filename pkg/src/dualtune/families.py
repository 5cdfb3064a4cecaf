"""Seeded synthetic landscape families used by the test suites and the tuner."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .landscape import Landscape, make_landscape, single_piece
from .poly import Polynomial


def _monomials(delta: int):
    return [(i, j) for t in range(delta + 1) for i in range(t + 1) for j in [t - i]]


def random_single_piece(delta: int, seed: int, coef_range: int = 5) -> Landscape:
    """Integer coefficients in [-r, r] on every monomial a^i w^j with i + j <= delta.

    At least one top-degree coefficient is nonzero so the piece has degree delta exactly.
    """
    rng = np.random.default_rng([delta, seed])
    mons = _monomials(delta)
    while True:
        c = rng.integers(-coef_range, coef_range + 1, size=len(mons))
        top = [k for k, (i, j) in enumerate(mons) if i + j == delta]
        # w must appear, otherwise there is nothing to maximize over
        if any(c[k] for k in top) and any(c[k] for k, (i, j) in enumerate(mons) if j > 0):
            break
    terms = {(i, j): int(v) for (i, j), v in zip(mons, c) if v}
    return single_piece(Polynomial(2, terms), alpha=(0, 1), w=((-1, 1),))


def _q(x, den=40) -> Fraction:
    return Fraction(round(x * den), den)


def random_constant_landscape(seed: int, max_regions: int = 8) -> Landscape:
    """Disjoint disks plus at most one line in [0,1] x [-1,1], each cutting out one region.

    Every shape keeps a gap of at least 1/50 to the box and to every other shape,
    so each region is connected. Region k is inside shape k and outside the
    earlier ones; the last region is the rest of the box.
    """
    rng = np.random.default_rng([99, seed])
    N = int(rng.integers(2, max_regions + 1))
    gap = 0.02
    shapes = []
    line = None
    tries = 0
    while len(shapes) < N - 1 and tries < 2000:
        tries += 1
        if line is None and rng.random() < 0.2:
            p, q = int(rng.integers(-3, 4)), int(rng.integers(1, 4))
            a0, w0 = _q(rng.uniform(0.2, 0.8), 20), _q(rng.uniform(-0.6, 0.6), 20)
            ok = all(abs(p * (float(cx) - float(a0)) + q * (float(cy) - float(w0))) / np.hypot(p, q) > float(r) + gap for cx, cy, r in (s[1:] for s in shapes if s[0] == "disk"))
            if ok:
                line = (p, q, a0, w0)
                shapes.append(("line", p, q, a0, w0))
            continue
        r = _q(rng.uniform(0.05, 0.3))
        cx = _q(rng.uniform(float(r) + gap, 1 - float(r) - gap))
        cy = _q(rng.uniform(-1 + float(r) + gap, 1 - float(r) - gap))
        if not (float(r) + gap <= float(cx) <= 1 - float(r) - gap and -1 + float(r) + gap <= float(cy) <= 1 - float(r) - gap):
            continue
        ok = True
        for s in shapes:
            if s[0] == "disk":
                if np.hypot(float(cx - s[1]), float(cy - s[2])) <= float(r + s[3]) + gap:
                    ok = False
            else:
                _, p, q, a0, w0 = s
                if abs(p * float(cx - a0) + q * float(cy - w0)) / np.hypot(p, q) <= float(r) + gap:
                    ok = False
        if ok:
            shapes.append(("disk", cx, cy, r))
    a, w = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    boundaries = []
    for s in shapes:
        if s[0] == "disk":
            _, cx, cy, r = s
            boundaries.append((a - cx) ** 2 + (w - cy) ** 2 - r * r)
        else:
            _, p, q, a0, w0 = s
            boundaries.append(p * (a - a0) + q * (w - w0))
    M = len(boundaries)
    values = rng.integers(0, 6, size=M + 1)
    regions = []
    for k in range(M):
        regions.append((["ge"] * k + ["le"] + ["free"] * (M - k - 1), Fraction(int(values[k]))))
    regions.append((["ge"] * M, Fraction(int(values[M]))))
    return make_landscape((0, 1), ((-1, 1),), "constant", boundaries, regions, meta={"seed": seed, "family": "disks"})


class Degree3Family:
    """Seeded distribution over cubic-in-w single-piece landscapes on [0,1] x [-1,1].

    f(a, w) = b a w - w^3 / 3 + c w^2 + e a - a^2 with b, c, e drawn on a 1/64 lattice.
    The envelope mixes an edge branch and an interior branch, so instances
    disagree about where the kink sits. The wide spread of e puts the mean
    envelope's optimum in the interior while keeping per-instance noise large
    relative to its curvature for small m, so the ERM gap decays at roughly
    m^(-1/2) over m in [4, 256].
    """

    name = "synthetic-poly"

    def __init__(self, b=(0.2, 1.0), c=(-0.3, 0.3), e=(-1.0, 3.0)):
        self.b, self.c, self.e = b, c, e

    def sample(self, rng) -> Landscape:
        b = _q(rng.uniform(*self.b), 64)
        c = _q(rng.uniform(*self.c), 64)
        e = _q(rng.uniform(*self.e), 64)
        a, w = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
        f = b * a * w - Fraction(1, 3) * w**3 + c * w**2 + e * a - a * a
        return single_piece(f, alpha=(0, 1), w=((-1, 1),))

    def draw(self, m: int, seed) -> list:
        rng = np.random.default_rng(seed)
        return [self.sample(rng) for _ in range(m)]
