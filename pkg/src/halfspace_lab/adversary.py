"""Column partitions of a sample tuple, typicality checks, and query-point attacks.

A query strategy sees only the samples ``U = (u^1..u^s)`` and outputs a point
``y``. It *hits* when ``y`` lies on the sphere of radius r around the hidden
center and stays at distance >= threshold from every sample; those are the
only queries on which yes- and no-instances can disagree.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import SampleTuple
from .funcspec import SamplerExhausted
from .hypercube import Params, Point, hamming, sample_sphere
from .stats import wilson

STRATEGIES = ("consistent_flip", "toward_away", "random_flip", "clairvoyant")


@dataclass(frozen=True)
class ColPartition:
    """``classes[c]`` lists the 0-based coordinates whose column equals pattern ``c``.

    Bit ``k`` of the integer pattern ``c`` is the entry of sample ``k + 1``.
    """

    n: int
    s: int
    classes: dict[int, tuple[int, ...]]

    def pattern_str(self, c: int) -> str:
        return format(c, f"0{self.s}b")[::-1]

    def sizes(self) -> np.ndarray:
        out = np.zeros(1 << self.s, dtype=np.int64)
        for c, idx in self.classes.items():
            out[c] = len(idx)
        return out


def column_codes(U: SampleTuple) -> np.ndarray:
    m = U.matrix().astype(np.int64)
    return (m << np.arange(U.s, dtype=np.int64)[:, None]).sum(axis=0)


def col_partition(U: SampleTuple) -> ColPartition:
    if U.s > 30:
        raise ValueError("column patterns need s <= 30")
    codes = column_codes(U)
    order = np.argsort(codes, kind="stable")
    vals, starts = np.unique(codes[order], return_index=True)
    bounds = list(starts[1:]) + [codes.size]
    classes = {int(v): tuple(int(j) for j in order[a:b]) for v, a, b in zip(vals, starts, bounds)}
    return ColPartition(U.n, U.s, classes)


def consistent_set(U: SampleTuple) -> list[int]:
    col = U.matrix().sum(axis=0)
    return np.flatnonzero((col == 0) | (col == U.s)).tolist()


@dataclass(frozen=True)
class GoodnessReport:
    zeros_obs: np.ndarray
    ones_obs: np.ndarray
    zeros_exp: np.ndarray
    ones_exp: np.ndarray
    slack: float
    passed: np.ndarray

    @property
    def overall(self) -> bool:
        return bool(self.passed.all())

    def worst_deviation(self) -> float:
        return float(max(np.abs(self.zeros_obs - self.zeros_exp).max(),
                         np.abs(self.ones_obs - self.ones_exp).max()))


def check_good(z: Point, U: SampleTuple, params: Params, sigma: float = 0.51) -> GoodnessReport:
    """Per pattern c: both z-bit counts on col_c(U) within n**sigma of their expectations."""
    if z.n != U.n:
        raise ValueError(f"dimension mismatch: {z.n} vs {U.n}")
    n, s = U.n, U.s
    codes = column_codes(U)
    zb = z.to_array().astype(bool)
    size = 1 << s
    zeros_obs = np.bincount(codes[~zb], minlength=size)
    ones_obs = np.bincount(codes[zb], minlength=size)
    w = np.array([bin(c).count("1") for c in range(size)])
    d = float(params.delta)
    zeros_exp = n / 2 * d**w * (1 - d) ** (s - w)
    ones_exp = n / 2 * d ** (s - w) * (1 - d) ** w
    slack = n**sigma
    passed = (np.abs(zeros_obs - zeros_exp) <= slack) & (np.abs(ones_obs - ones_exp) <= slack)
    return GoodnessReport(zeros_obs, ones_obs, zeros_exp, ones_exp, slack, passed)


def joint_draw(params: Params, rng: np.random.Generator) -> tuple[Point, SampleTuple]:
    z = Point.random(params.n, rng)
    return z, SampleTuple(tuple(sample_sphere(z, params.r, rng) for _ in range(params.s)))


def conditional_center(U: SampleTuple, params: Params, rng: np.random.Generator, max_tries: int = 10_000) -> Point:
    """Exact draw of z given U: propose uniformly on the r-sphere of u^1, keep if at distance r from all."""
    u1 = U[0]
    for _ in range(max_tries):
        cand = sample_sphere(u1, params.r, rng)
        if all(hamming(u, cand) == params.r for u in U.points[1:]):
            return cand
    raise SamplerExhausted(max_tries)


def _pick(pool: np.ndarray, k: int, rng: np.random.Generator, what: str) -> np.ndarray:
    if pool.size < k:
        raise ValueError(f"{what}: need {k} candidate coordinates, only {pool.size} available")
    return rng.choice(pool, size=k, replace=False) if k else pool[:0]


def attack(strategy: str, U: SampleTuple, t_prime: int, rng: np.random.Generator, z: Point | None = None) -> Point:
    """Query point obtained by flipping coordinates of u^1.

    ``toward_away`` takes t'/2 coordinates from the consistent set and t'/2
    chosen by how many other samples disagree with u^1 there (all of them
    first). ``clairvoyant`` sees z; it flips k = min(t'/2, r) coordinates of
    supp(u^1 xor z) and k coordinates outside every supp(u^i xor z).
    """
    if t_prime < 0 or t_prime % 2 or t_prime > U.n:
        raise ValueError(f"t' must be even with 0 <= t' <= n, got {t_prime}")
    u1 = U[0]
    m = U.matrix()
    half = t_prime // 2

    if strategy == "consistent_flip":
        flips = _pick(np.asarray(consistent_set(U)), t_prime, rng, strategy)
    elif strategy == "random_flip":
        flips = rng.choice(U.n, size=t_prime, replace=False)
    elif strategy == "toward_away":
        agree = (m[1:] == m[0]).sum(axis=0)
        cons = np.flatnonzero(agree == U.s - 1)
        away = _pick(cons, half, rng, strategy)
        rest = np.flatnonzero(agree < U.s - 1)
        if rest.size < half:
            raise ValueError(f"{strategy}: need {half} candidate coordinates, only {rest.size} available")
        order = np.lexsort((rng.random(rest.size), agree[rest]))
        flips = np.concatenate([away, rest[order[:half]]])
    elif strategy == "clairvoyant":
        if z is None:
            raise ValueError("clairvoyant attack needs the center z")
        k = min(half, hamming(u1, z))
        inside = np.flatnonzero(u1.to_array() != z.to_array())
        touched = (m != z.to_array()).any(axis=0)
        flips = np.concatenate([_pick(inside, k, rng, strategy),
                                _pick(np.flatnonzero(~touched), k, rng, strategy)])
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return u1.flip(int(j) for j in flips)


def trial_outcome(y: Point, z: Point, U: SampleTuple, params: Params, closeness: int) -> dict:
    dz = hamming(y, z)
    dmin = min(hamming(y, u) for u in U)
    return {"dist_to_center": dz, "min_dist_to_samples": dmin, "on_sphere": int(dz == params.r),
            "hit": int(dz == params.r and dmin >= closeness)}


def consistent_opposite_fraction(z: Point, U: SampleTuple) -> float:
    """Share of consistent coordinates on which every sample differs from z."""
    cons = consistent_set(U)
    if not cons:
        return 0.0
    u1, zz = U[0].to_array(), z.to_array()
    return float(np.mean(u1[cons] != zz[cons]))


def attack_trial(strategy: str, params: Params, t_prime: int, closeness: int, rng: np.random.Generator,
                 sigma: float = 0.51) -> dict:
    z, U = joint_draw(params, rng)
    y = attack(strategy, U, t_prime, rng, z=z if strategy == "clairvoyant" else None)
    out = trial_outcome(y, z, U, params, closeness)
    out["good"] = int(check_good(z, U, params, sigma).overall)
    out["kappa"] = consistent_opposite_fraction(z, U)
    return out


@dataclass(frozen=True)
class AttackResult:
    strategy: str
    hits: int
    trials: int
    ci: tuple[float, float]
    good_rate: float
    hit_and_good: int
    mean_kappa: float

    @property
    def hit_rate(self) -> float:
        return self.hits / self.trials


def attack_experiment(strategy: str, params: Params, t_prime: int, closeness: int, trials: int,
                      rng: np.random.Generator, sanity: bool = False, sigma: float = 0.51) -> AttackResult:
    if strategy == "clairvoyant" and not sanity:
        raise ValueError("the clairvoyant strategy sees z; pass sanity=True to run it")
    if not 0 <= closeness <= params.n:
        raise ValueError(f"closeness threshold {closeness} out of range")
    if trials < 1:
        raise ValueError("need at least one trial")
    rows = [attack_trial(strategy, params, t_prime, closeness, rng, sigma) for _ in range(trials)]
    hits = sum(r["hit"] for r in rows)
    return AttackResult(strategy, hits, trials, wilson(hits, trials),
                        sum(r["good"] for r in rows) / trials,
                        sum(r["hit"] and r["good"] for r in rows),
                        float(np.mean([r["kappa"] for r in rows])))
