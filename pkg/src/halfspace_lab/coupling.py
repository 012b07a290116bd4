"""Sample-tuple distributions, the 3s-point coupling, and discriminator-based TV estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .funcspec import NoSpec, draw_no
from .hypercube import (Params, Point, hamming, off_sphere_probability, points_to_rows, sample_ball,
                        sample_sphere, signed_dot)
from .stats import newcombe_diff


@dataclass(frozen=True)
class SampleTuple:
    points: tuple[Point, ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("a sample tuple needs at least one point")
        n = self.points[0].n
        if any(p.n != n for p in self.points):
            raise ValueError("all points of a tuple must share a dimension")
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def n(self) -> int:
        return self.points[0].n

    @property
    def s(self) -> int:
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def matrix(self) -> np.ndarray:
        """The s x n 0/1 sample matrix."""
        return points_to_rows(self.points)

    def majority(self) -> Point:
        """Coordinatewise majority; ties go to 0."""
        counts = self.matrix().sum(axis=0, dtype=np.int64)
        return Point.from_array((2 * counts > self.s).astype(np.uint8))


@dataclass(frozen=True)
class CoupledDraw:
    v_star: SampleTuple | None
    w_star: SampleTuple | None
    base: tuple[Point, ...]
    coins: tuple[int, ...]
    g_values: tuple[int, ...]


TUPLE_KINDS = ("sphere", "ball", "no")


def draw_tuple(kind: str, z: Point, params: Params, rng: np.random.Generator,
               spec: NoSpec | None = None) -> SampleTuple:
    s, r = params.s, params.r
    if z.n != params.n:
        raise ValueError("center dimension does not match params")
    if kind == "sphere":
        return SampleTuple(tuple(sample_sphere(z, r, rng) for _ in range(s)))
    if kind == "ball":
        return SampleTuple(tuple(sample_ball(z, r, rng) for _ in range(s)))
    if kind == "no":
        if spec is None or spec.z != z:
            raise ValueError("kind='no' needs a NoSpec centered at z")
        return SampleTuple(tuple(spec.samp(rng) for _ in range(s)))
    raise ValueError(f"unknown tuple kind {kind!r}")


def coupled_draw(z: Point, params: Params, spec: NoSpec, rng: np.random.Generator) -> CoupledDraw:
    """3s ball points shared by a coin-flip selection (v*) and a g-selection (w*); nil is ``None``."""
    if spec.z != z:
        raise ValueError("spec center differs from z")
    s = params.s
    base = tuple(sample_ball(z, params.r, rng) for _ in range(3 * s))
    coins = tuple(int(b) for b in rng.integers(0, 2, size=3 * s))
    gv = tuple(spec.eval(x) for x in base)

    def first(sel):
        chosen = [x for x, keep in zip(base, sel) if keep][:s]
        return SampleTuple(tuple(chosen)) if len(chosen) == s else None

    return CoupledDraw(first(coins), first(gv), base, coins, gv)


def nil_probability(s: int) -> Fraction:
    """Pr[Bin(3s, 1/2) < s]."""
    return Fraction(sum(math.comb(3 * s, k) for k in range(s)), 2 ** (3 * s))


def tv_upper_bound(params: Params) -> float:
    """Analytic coupling-failure bound on d_TV(ball tuples, no tuples).

    Two nil events plus, twice, the failure of "all 3s base points on the
    sphere and in distinct pieces" (union bound, 4/5 per hyperplane per pair).
    """
    s = params.s
    nil = float(nil_probability(s))
    off = 3 * s * float(off_sphere_probability(params.n, params.r))
    collide = math.comb(3 * s, 2) * 0.8 ** params.t
    return min(1.0, 2 * nil + 2 * (off + collide))


def margin_stats(spec: NoSpec, tup: SampleTuple) -> list[int]:
    """|zeta . (w xor z)| for every point w (outer loop) and hyperplane zeta (inner loop)."""
    out = []
    for w in tup:
        if hamming(w, spec.z) != spec.r:
            raise ValueError("margin_stats needs sphere points")
        u = w ^ spec.z
        out.extend(abs(signed_dot(zeta, u)) for zeta in spec.zetas)
    return out


def margin_event(spec: NoSpec, tup: SampleTuple, tau: float) -> bool:
    """Every margin is at least ``tau``; the asymptotic choice is tau = n**0.49."""
    return min(margin_stats(spec, tup)) >= tau


def min_pairwise_distance(tup: SampleTuple, params: Params | None = None) -> int:
    if tup.s < 2:
        return tup.n
    m = tup.matrix().astype(np.int32)
    best = tup.n
    for i in range(tup.s):
        d = (m[i + 1:] != m[i]).sum(axis=1)
        if d.size:
            best = min(best, int(d.min()))
    return best


def consistent_size(tup: SampleTuple, params: Params | None = None) -> int:
    m = tup.matrix()
    col = m.sum(axis=0)
    return int(np.count_nonzero((col == 0) | (col == tup.s)))


def majority_sphere_count(tup: SampleTuple, params: Params) -> int:
    c = tup.majority()
    return sum(hamming(u, c) == params.r for u in tup)


STATISTICS: dict[str, Callable[[SampleTuple, Params], int]] = {
    "S1": min_pairwise_distance,
    "S2": consistent_size,
    "S3": majority_sphere_count,
}


@dataclass(frozen=True)
class Advantage:
    advantage: float
    ci: tuple[float, float]
    threshold: float
    p_a: float
    p_b: float
    trials: int


def best_threshold_advantage(a: Sequence[float], b: Sequence[float]) -> Advantage:
    """max over thresholds of |Pr_A[stat >= th] - Pr_B[stat >= th]| with a Newcombe interval."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("empty sample")
    ths = np.unique(np.concatenate([a, b]))
    ka = na - np.searchsorted(a, ths, side="left")
    kb = nb - np.searchsorted(b, ths, side="left")
    gaps = np.abs(ka / na - kb / nb)
    i = int(np.argmax(gaps))
    kai, kbi = int(ka[i]), int(kb[i])
    if kai / na >= kbi / nb:
        ci = newcombe_diff(kai, na, kbi, nb)
    else:
        ci = newcombe_diff(kbi, nb, kai, na)
    return Advantage(float(gaps[i]), ci, float(ths[i]), kai / na, kbi / nb, min(na, nb))


def discriminator_advantage(stat, gen_a, gen_b, trials: int, rng: np.random.Generator,
                            params: Params | None = None) -> Advantage:
    """Empirical advantage of a thresholded statistic between two tuple generators.

    ``stat`` is a name from :data:`STATISTICS` or a callable ``(tuple, params) -> number``;
    each generator is called as ``gen(rng)`` and returns a :class:`SampleTuple`.
    """
    return discriminator_advantages({"stat": stat}, gen_a, gen_b, trials, rng, params)["stat"]


def discriminator_advantages(stats: dict | Sequence[str], gen_a, gen_b, trials: int,
                             rng: np.random.Generator, params: Params | None = None) -> dict[str, Advantage]:
    """Several statistics evaluated on the same generated tuples."""
    if trials < 100:
        raise ValueError("need at least 100 trials per side")
    if not isinstance(stats, dict):
        stats = {name: name for name in stats}
    fns = {k: STATISTICS[v] if isinstance(v, str) else v for k, v in stats.items()}
    va = {k: [] for k in fns}
    vb = {k: [] for k in fns}
    shapes = set()
    for _ in range(trials):
        ta, tb = gen_a(rng), gen_b(rng)
        shapes.update(((ta.n, ta.s), (tb.n, tb.s)))
        for k, fn in fns.items():
            va[k].append(fn(ta, params))
            vb[k].append(fn(tb, params))
    if len(shapes) != 1:
        raise ValueError("generators produce tuples of different shapes")
    return {k: best_threshold_advantage(va[k], vb[k]) for k in fns}


def tuple_generator(kind: str, params: Params) -> Callable[[np.random.Generator], SampleTuple]:
    """Generator drawing a fresh uniform center (and, for ``no``, a fresh no-instance) per call."""
    if kind not in TUPLE_KINDS:
        raise ValueError(f"unknown tuple kind {kind!r}")

    def gen(rng):
        if kind == "no":
            spec = draw_no(params, rng)
            return draw_tuple("no", spec.z, params, rng, spec)
        z = Point.random(params.n, rng)
        return draw_tuple(kind, z, params, rng)

    return gen


def pairwise_intersections(flips: np.ndarray) -> np.ndarray:
    """|{k : a_k = b_k = 1}| for all row pairs of a 0/1 matrix."""
    f = flips.astype(np.int32)
    g = f @ f.T
    iu = np.triu_indices(f.shape[0], 1)
    return g[iu]
