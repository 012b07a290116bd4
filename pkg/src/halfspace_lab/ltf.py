"""LTF feasibility, good/violating 4-tuples, disjoint packing and relative-distance certificates."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from .funcspec import FunctionOracle, NoSpec, TruthTableOracle
from .hypercube import Point, ball_size, random_subset
from .rational_lp import solve_farkas

MAX_LABELED = 10**6
MAX_EXACT_N = 4


@dataclass(frozen=True)
class LabeledSet:
    n: int
    pairs: tuple[tuple[Point, int], ...]

    def __post_init__(self):
        seen: dict[int, int] = {}
        clean = []
        for x, b in self.pairs:
            if x.n != self.n:
                raise ValueError(f"point of dimension {x.n} in a set of dimension {self.n}")
            if b not in (0, 1):
                raise ValueError(f"label must be 0 or 1, got {b!r}")
            if x.bits in seen:
                if seen[x.bits] != b:
                    raise ValueError(f"conflicting labels for point {x}")
                continue
            seen[x.bits] = b
            clean.append((x, int(b)))
        if len(clean) > MAX_LABELED:
            raise ValueError(f"labeled set larger than {MAX_LABELED}")
        object.__setattr__(self, "pairs", tuple(clean))

    @classmethod
    def from_oracle(cls, oracle: FunctionOracle, points: Iterable[Point] | None = None) -> "LabeledSet":
        n = oracle.dimension()
        if points is None:
            if n > 20:
                raise ValueError("full truth tables need n <= 20")
            points = (Point(n, k) for k in range(1 << n))
        return cls(n, tuple((x, oracle.eval(x)) for x in points))

    @classmethod
    def from_truth_table(cls, n: int, table: int) -> "LabeledSet":
        return cls.from_oracle(TruthTableOracle(n, table))

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class GoodTuple:
    """Four sphere points around ``z`` built from disjoint blocks J1..J4 (0-based, size r/2 each).

    Relative to ``z``: x1 flips J1+J3, x2 flips J1+J4, x3 flips J2+J3, x4 flips J2+J4.
    """

    z: Point
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.blocks) != 4:
            raise ValueError("need four blocks")
        sizes = {len(b) for b in self.blocks}
        if len(sizes) != 1 or 0 in sizes:
            raise ValueError("blocks must be nonempty and of equal size")
        flat = [j for b in self.blocks for j in b]
        if len(set(flat)) != len(flat):
            raise ValueError("blocks must be pairwise disjoint")
        if any(not 0 <= j < self.z.n for j in flat):
            raise ValueError("block index out of range")
        object.__setattr__(self, "blocks", tuple(tuple(sorted(b)) for b in self.blocks))

    @property
    def r(self) -> int:
        return 2 * len(self.blocks[0])

    @cached_property
    def points(self) -> tuple[Point, Point, Point, Point]:
        j1, j2, j3, j4 = self.blocks
        return (self.z.flip(j1 + j3), self.z.flip(j1 + j4), self.z.flip(j2 + j3), self.z.flip(j2 + j4))

    def to_json(self) -> dict:
        return {"z": self.z.to_hex(), "n": self.z.n, "blocks": [list(b) for b in self.blocks],
                "points": [x.to_hex() for x in self.points]}


@dataclass(frozen=True)
class LtfWitness:
    """Verdict of :func:`is_ltf` with an exactly checkable certificate.

    Feasible: ``x . weights >= theta + 1`` on 1-points and ``<= theta - 1`` on 0-points.
    Infeasible: either ``multipliers`` (convex weights over the pairs making a
    combination of 1-points equal a combination of 0-points) or a violating tuple.
    """

    feasible: bool
    weights: tuple[Fraction, ...] | None = None
    theta: Fraction | None = None
    multipliers: tuple[Fraction, ...] | None = None
    violating: GoodTuple | None = None

    def check(self, labeled: LabeledSet) -> bool:
        if self.feasible:
            for x, b in labeled.pairs:
                v = sum((w for j, w in enumerate(self.weights) if x[j]), Fraction(0))
                if (b == 1 and v < self.theta + 1) or (b == 0 and v > self.theta - 1):
                    return False
            return True
        if self.violating is not None:
            labels = dict((x.bits, b) for x, b in labeled.pairs)
            try:
                got = [labels[x.bits] for x in self.violating.points]
            except KeyError:
                return False
            return got[0] == got[3] != got[1] == got[2]
        y = self.multipliers
        if y is None or len(y) != len(labeled.pairs) or any(v < 0 for v in y) or sum(y) != 1:
            return False
        ones = [Fraction(0)] * labeled.n
        zeros = [Fraction(0)] * labeled.n
        mass = Fraction(0)
        for (x, b), v in zip(labeled.pairs, y):
            if not v:
                continue
            acc = ones if b else zeros
            mass += v if b else -v
            for j in x.support():
                acc[j] += v
        return mass == 0 and ones == zeros


def is_ltf(labeled: LabeledSet) -> LtfWitness:
    """Exact decision of whether some halfspace 1[w.x >= theta] reproduces every label."""
    n = labeled.n
    if not labeled.pairs:
        return LtfWitness(True, (Fraction(0),) * n, Fraction(-1))
    labels = {b for _, b in labeled.pairs}
    if labels == {1}:
        witness = LtfWitness(True, (Fraction(0),) * n, Fraction(-1))
    elif labels == {0}:
        witness = LtfWitness(True, (Fraction(0),) * n, Fraction(1))
    else:
        A = []
        for x, b in labeled.pairs:
            row = x.to_array().astype(int).tolist()
            A.append([-v for v in row] + [1] if b else row + [-1])
        res = solve_farkas(A)
        if res.feasible:
            witness = LtfWitness(True, tuple(res.point[:n]), res.point[n])
        else:
            witness = LtfWitness(False, multipliers=tuple(res.multipliers))
    if not witness.check(labeled):
        raise ArithmeticError("LTF witness failed exact re-verification")
    return witness


def make_good_tuple(z: Point, r: int, rng: np.random.Generator | None = None,
                    blocks: Sequence[Sequence[int]] | None = None) -> GoodTuple:
    if r % 2 or r < 2:
        raise ValueError(f"r must be even and >= 2, got {r}")
    if 2 * r > z.n:
        raise ValueError(f"good tuples need 2r <= n (r={r}, n={z.n})")
    if blocks is None:
        if rng is None:
            raise ValueError("need either rng or explicit blocks")
        chosen = rng.permutation(random_subset(z.n, 2 * r, rng))
        h = r // 2
        blocks = [chosen[i * h:(i + 1) * h].tolist() for i in range(4)]
    t = GoodTuple(z, tuple(tuple(int(j) for j in b) for b in blocks))
    if t.r != r:
        raise ValueError(f"blocks have size {t.r // 2}, expected {r // 2}")
    return t


def tuple_labels(tup: GoodTuple, oracle: FunctionOracle) -> tuple[int, int, int, int]:
    return tuple(oracle.eval(x) for x in tup.points)


def is_violating(tup: GoodTuple, oracle: FunctionOracle) -> int:
    if tup.z.n != oracle.dimension():
        raise ValueError("tuple and oracle dimensions differ")
    a, b, c, d = tuple_labels(tup, oracle)
    return int(a == d and b == c and a != b)


def greedy_disjoint_pack(pool: Sequence[GoodTuple]) -> list[GoodTuple]:
    """Scan ``pool`` in order, keeping each tuple whose four points are all unused."""
    if not pool:
        return []
    z = pool[0].z
    if any(t.z != z for t in pool):
        raise ValueError("all tuples must share a center")
    used: set[int] = set()
    kept = []
    for t in pool:
        pts = [x.bits for x in t.points]
        if used.isdisjoint(pts):
            used.update(pts)
            kept.append(t)
    return kept


def block_family(z: Point, r: int) -> list[GoodTuple]:
    """floor(n / 2r) good tuples on consecutive disjoint coordinate blocks."""
    n = z.n
    if 2 * r > n:
        raise ValueError(f"need n >= 2r (n={n}, r={r})")
    h = r // 2
    fam = []
    for i in range(n // (2 * r)):
        base = 2 * r * i
        fam.append(make_good_tuple(z, r, blocks=[range(base + k * h, base + (k + 1) * h) for k in range(4)]))
    return fam


def random_pool(z: Point, r: int, size: int, rng: np.random.Generator) -> list[GoodTuple]:
    return [make_good_tuple(z, r, rng) for _ in range(size)]


def is_pairwise_disjoint(family: Sequence[GoodTuple]) -> bool:
    seen: set[int] = set()
    for t in family:
        pts = [x.bits for x in t.points]
        if not seen.isdisjoint(pts):
            return False
        seen.update(pts)
    return True


@dataclass(frozen=True)
class Certificate:
    value: Fraction
    violating: int
    family_size: int
    denominator: int
    denominator_mode: str
    family: tuple[GoodTuple, ...]
    labels: tuple[tuple[int, int, int, int], ...]

    def to_json(self) -> dict:
        return {"value": f"{self.value.numerator}/{self.value.denominator}",
                "violating": self.violating, "family_size": self.family_size,
                "denominator": str(self.denominator), "denominator_mode": self.denominator_mode,
                "tuples": [dict(t.to_json(), labels=list(lab)) for t, lab in zip(self.family, self.labels)]}


def certify(spec: NoSpec, family: Sequence[GoodTuple], ones_count: str = "exact") -> Certificate:
    if not is_pairwise_disjoint(family):
        raise ValueError("family is not pairwise disjoint")
    if any(t.z.n != spec.n for t in family):
        raise ValueError("tuple dimension mismatch")
    labels = tuple(tuple_labels(t, spec) for t in family)
    viol = sum(int(a == d and b == c and a != b) for a, b, c, d in labels)
    if ones_count == "exact":
        denom = spec.count_satisfying()
    elif ones_count == "upper_bound":
        denom = ball_size(spec.n, spec.r)
    else:
        raise ValueError(f"unknown denominator mode {ones_count!r}")
    return Certificate(Fraction(viol, denom), viol, len(family), denom, ones_count, tuple(family), labels)


def reldist_lower_cert(spec: NoSpec, family: Sequence[GoodTuple], ones_count: str = "exact") -> Fraction:
    """Sound lower bound on rel-dist(g, LTF): every disjoint violating tuple forces one correction."""
    return certify(spec, family, ones_count).value


def violating_family(spec: NoSpec, pool: Sequence[GoodTuple]) -> list[GoodTuple]:
    """Greedy disjoint packing restricted to the tuples of ``pool`` that are violating for ``spec``."""
    return greedy_disjoint_pack([t for t in pool if is_violating(t, spec)])


# exhaustive LTF enumeration for n <= 4

def _symmetry_maps(n: int) -> np.ndarray:
    """Point-code permutations induced by coordinate permutations and input complements."""
    codes = np.arange(1 << n)
    bits = (codes[:, None] >> np.arange(n)) & 1
    maps = []
    for perm in itertools.permutations(range(n)):
        permuted = (bits[:, list(perm)] << np.arange(n)).sum(axis=1)
        for flip in range(1 << n):
            maps.append(permuted ^ flip)
    return np.array(maps)


def _apply_maps(tables: np.ndarray, maps: np.ndarray, size: int) -> np.ndarray:
    best = None
    for m in maps:
        out = np.zeros_like(tables)
        for k in range(size):
            out |= ((tables >> k) & 1) << m[k]
        best = out if best is None else np.minimum(best, out)
    return best


@lru_cache(maxsize=None)
def enumerate_ltfs(n: int) -> frozenset[int]:
    """All truth tables on n <= 4 inputs realizable by a halfspace.

    Truth table bit ``k`` is the value at ``Point(n, k)``. Each orbit of the
    labelings under coordinate permutation, input complement and output
    complement (all of which preserve the LTF property) is decided once by
    :func:`is_ltf` on its least member.
    """
    if not 1 <= n <= MAX_EXACT_N:
        raise ValueError(f"exhaustive LTF enumeration needs 1 <= n <= {MAX_EXACT_N}")
    size = 1 << n
    full = (1 << size) - 1
    tables = np.arange(1 << size, dtype=np.int64)
    canon = _apply_maps(tables, _symmetry_maps(n), size)
    canon = np.minimum(canon, canon[full ^ tables])
    verdict = {int(c): is_ltf(LabeledSet.from_truth_table(n, int(c))).feasible for c in np.unique(canon)}
    return frozenset(int(t) for t, c in zip(tables.tolist(), canon.tolist()) if verdict[c])


def reldist_exact_small(n: int, table: int) -> Fraction:
    """min over LTFs h of |f^-1(1) sym-diff h^-1(1)| / |f^-1(1)|, for n <= 4."""
    if table == 0:
        raise ValueError("relative distance is undefined for the constant-0 function")
    ltfs = np.array(sorted(enumerate_ltfs(n)), dtype=np.int64)
    diff = np.bitwise_count(ltfs ^ table).min()
    return Fraction(int(diff), table.bit_count())


def truth_table(oracle: FunctionOracle) -> int:
    return TruthTableOracle.from_oracle(oracle).table
