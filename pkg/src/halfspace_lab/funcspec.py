"""Yes/no instance functions with membership (eval) and sampling (samp) oracles.

A yes-instance is the indicator of a Hamming ball; a no-instance agrees with
it off the sphere and labels the sphere piecewise, by the sign pattern of
``t`` random hyperplanes through the recentered sphere.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .hypercube import (Params, Point, SignVector, ball_size, ball_weight_law, ball_weights_many,
                        flip_masks, hamming, rows_to_points, sample_ball, signed_dot)

MAX_ENUM_N = 20
EXPLICIT_MAX_T = 26


class SamplerExhausted(RuntimeError):
    def __init__(self, max_tries: int):
        super().__init__(f"rejection sampler exhausted after {max_tries} tries")
        self.max_tries = max_tries


@runtime_checkable
class FunctionOracle(Protocol):
    def eval(self, x: Point) -> int: ...

    def samp(self, rng: np.random.Generator) -> Point: ...

    def dimension(self) -> int: ...


@dataclass(frozen=True)
class LabelTable:
    """Map from t-bit piece indices to labels.

    ``explicit`` stores all ``2**t`` bits packed little-endian. ``keyed`` derives
    the label of piece ``b`` as the low bit of
    ``blake2b(b.to_bytes(8, "little"), key=seed, digest_size=8)[0]``, which is
    identical on every platform.
    """

    t: int
    mode: str
    bits: bytes | None = None
    seed: bytes | None = None

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if self.mode == "explicit":
            if self.t > EXPLICIT_MAX_T:
                raise ValueError(f"explicit label tables need t <= {EXPLICIT_MAX_T}")
            if self.bits is None or len(self.bits) != (2**self.t + 7) // 8:
                raise ValueError("explicit table needs ceil(2**t / 8) bytes")
        elif self.mode == "keyed":
            if self.seed is None or len(self.seed) != 16:
                raise ValueError("keyed table needs a 16-byte seed")
        else:
            raise ValueError(f"unknown label mode {self.mode!r}")

    @classmethod
    def random(cls, t: int, rng: np.random.Generator, mode: str | None = None) -> "LabelTable":
        if mode is None:
            mode = "explicit" if t <= EXPLICIT_MAX_T else "keyed"
        if mode == "explicit":
            nb = (2**t + 7) // 8
            raw = bytearray(rng.bytes(nb))
            if 2**t < 8:
                raw[0] &= (1 << 2**t) - 1
            return cls(t, "explicit", bits=bytes(raw))
        return cls(t, "keyed", seed=rng.bytes(16))

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "LabelTable":
        t = int(math.log2(len(labels)))
        if 2**t != len(labels):
            raise ValueError("need 2**t labels")
        packed = np.packbits(np.asarray(labels, dtype=np.uint8), bitorder="little")
        return cls(t, "explicit", bits=packed.tobytes())

    @classmethod
    def constant(cls, t: int, bit: int) -> "LabelTable":
        return cls.from_labels([bit] * 2**t)

    def lookup(self, index: int) -> int:
        if not 0 <= index < 2**self.t:
            raise ValueError(f"piece index {index} out of range for t={self.t}")
        if self.mode == "explicit":
            return (self.bits[index >> 3] >> (index & 7)) & 1
        digest = hashlib.blake2b(index.to_bytes(8, "little"), key=self.seed, digest_size=8).digest()
        return digest[0] & 1

    @cached_property
    def _array(self) -> np.ndarray:
        return np.frombuffer(self.bits, dtype=np.uint8)

    def lookup_many(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.mode == "explicit":
            return (self._array[indices >> 3] >> (indices & 7)) & 1
        return np.array([self.lookup(int(i)) for i in indices], dtype=np.uint8)

    def to_json(self) -> dict:
        if self.mode == "explicit":
            return {"mode": "explicit", "bits": self.bits.hex()}
        return {"mode": "keyed", "seed": self.seed.hex()}

    @classmethod
    def from_json(cls, t: int, d: dict) -> "LabelTable":
        if d["mode"] == "explicit":
            return cls(t, "explicit", bits=bytes.fromhex(d["bits"]))
        return cls(t, "keyed", seed=bytes.fromhex(d["seed"]))


def _check_center(n, z, r):
    if z.n != n:
        raise ValueError(f"center has dimension {z.n}, expected {n}")
    if not 0 <= r <= n:
        raise ValueError(f"radius {r} out of range for n={n}")


@dataclass(frozen=True)
class BallSpec:
    """Indicator of the Hamming ball of radius ``r`` around ``z``.

    Any ``0 <= r <= n`` is accepted so that learned hypotheses are representable;
    :func:`draw_yes` only produces radii allowed by :class:`Params`.
    """

    n: int
    z: Point
    r: int

    def __post_init__(self):
        _check_center(self.n, self.z, self.r)

    def dimension(self) -> int:
        return self.n

    def eval(self, x: Point) -> int:
        return int(hamming(x, self.z) <= self.r)

    def samp(self, rng: np.random.Generator) -> Point:
        return sample_ball(self.z, self.r, rng)

    def samp_many(self, m: int, rng: np.random.Generator) -> list[Point]:
        weights = ball_weights_many(self.n, self.r, m, rng)
        return rows_to_points(flip_masks(self.n, weights, rng) ^ self.z.to_array())

    def count_satisfying(self) -> int:
        return ball_size(self.n, self.r)

    def to_json(self) -> dict:
        return {"type": "ball", "n": self.n, "r": self.r, "z": self.z.to_hex()}


@dataclass(frozen=True)
class NoSpec:
    n: int
    z: Point
    r: int
    zetas: tuple[SignVector, ...]
    labels: LabelTable
    max_tries: int | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_center(self.n, self.z, self.r)
        if self.r < 1:
            raise ValueError("no-instances need r >= 1")
        if len(self.zetas) < 1:
            raise ValueError("need at least one sign vector")
        if any(zeta.n != self.n for zeta in self.zetas):
            raise ValueError("sign vector dimension mismatch")
        if self.labels.t != len(self.zetas):
            raise ValueError(f"label table has t={self.labels.t}, but {len(self.zetas)} sign vectors given")
        object.__setattr__(self, "zetas", tuple(self.zetas))

    @property
    def t(self) -> int:
        return len(self.zetas)

    def dimension(self) -> int:
        return self.n

    @cached_property
    def _zeta_matrix(self) -> np.ndarray:
        return np.stack([zeta.to_array() for zeta in self.zetas]).astype(np.float32)

    def piece_index(self, x: Point) -> int:
        """Piece of a sphere point; bit ``i`` is set iff ``zeta^{i+1} . (x xor z) >= 0``."""
        if hamming(x, self.z) != self.r:
            raise ValueError("piece_index is defined only on the sphere of radius r around z")
        u = x ^ self.z
        b = 0
        for i, zeta in enumerate(self.zetas):
            if signed_dot(zeta, u) >= 0:
                b |= 1 << i
        return b

    def piece_indices(self, flips: np.ndarray) -> np.ndarray:
        """Pieces for rows of a 0/1 flip matrix (rows are ``x xor z`` of sphere points)."""
        # float32 matmul is exact here: entries are in {0, +-1} and |dot| <= n < 2**24
        dots = flips.astype(np.float32) @ self._zeta_matrix.T
        return ((dots >= 0).astype(np.int64) << np.arange(self.t, dtype=np.int64)).sum(axis=1)

    def eval(self, x: Point) -> int:
        d = hamming(x, self.z)
        if d < self.r:
            return 1
        if d > self.r:
            return 0
        return self.labels.lookup(self.piece_index(x))

    def acceptance_estimate(self) -> float:
        # heuristic: half of the sphere is labeled 1
        law = ball_weight_law(self.n, self.r)
        return float(1 - law[-1] / 2)

    def default_max_tries(self) -> int:
        return math.ceil(64 / self.acceptance_estimate())

    def samp(self, rng: np.random.Generator, max_tries: int | None = None) -> Point:
        """Uniform point of g^{-1}(1) by rejection from the radius-r ball."""
        if max_tries is None:
            max_tries = self.max_tries or self.default_max_tries()
        for _ in range(max_tries):
            x = sample_ball(self.z, self.r, rng)
            if self.eval(x):
                return x
        raise SamplerExhausted(max_tries)

    def samp_flips(self, m: int, rng: np.random.Generator, max_tries: int | None = None) -> np.ndarray:
        """``m`` accepted rejection draws, as rows of ``x xor z``; same law as :meth:`samp`."""
        if max_tries is None:
            max_tries = self.max_tries or self.default_max_tries()
        budget = max_tries * max(m, 1)
        acc = self.acceptance_estimate()
        chunks, have, used = [], 0, 0
        while have < m:
            if used >= budget:
                raise SamplerExhausted(max_tries)
            k = min(budget - used, max(16, int((m - have) / acc * 1.1) + 8))
            weights = ball_weights_many(self.n, self.r, k, rng)
            flips = flip_masks(self.n, weights, rng)
            keep = weights < self.r
            on = np.flatnonzero(weights == self.r)
            if on.size:
                keep[on] = self.labels.lookup_many(self.piece_indices(flips[on])).astype(bool)
            # accepted rows stay in draw order; later surplus is discarded
            acc_rows = np.flatnonzero(keep)[: m - have]
            used += k if have + acc_rows.size < m else int(acc_rows[-1]) + 1
            chunks.append(flips[acc_rows])
            have += acc_rows.size
        return np.concatenate(chunks) if chunks else np.zeros((0, self.n), np.uint8)

    def samp_many(self, m: int, rng: np.random.Generator, max_tries: int | None = None) -> list[Point]:
        return rows_to_points(self.samp_flips(m, rng, max_tries) ^ self.z.to_array())

    def count_satisfying(self, limit: int = 2_000_000) -> int:
        """Exact |g^{-1}(1)|: interior size plus the 1-labeled sphere points, by enumerating the sphere."""
        if math.comb(self.n, self.r) > limit:
            raise ValueError("sphere too large to enumerate")
        interior = ball_size(self.n, self.r - 1)
        ones = 0
        batch = []
        for combo in itertools.combinations(range(self.n), self.r):
            batch.append(combo)
            if len(batch) == 65536:
                ones += self._count_sphere_ones(batch)
                batch = []
        if batch:
            ones += self._count_sphere_ones(batch)
        return interior + ones

    def _count_sphere_ones(self, combos) -> int:
        idx = np.asarray(combos, dtype=np.int64)
        flips = np.zeros((idx.shape[0], self.n), dtype=np.uint8)
        flips[np.repeat(np.arange(idx.shape[0]), self.r), idx.ravel()] = 1
        return int(self.labels.lookup_many(self.piece_indices(flips)).sum())

    def to_json(self) -> dict:
        return {"type": "no", "n": self.n, "r": self.r, "z": self.z.to_hex(),
                "zetas": [zeta.to_hex() for zeta in self.zetas], "labels": self.labels.to_json()}


@dataclass(frozen=True)
class TruthTableOracle:
    """Explicit function on {0,1}^n for small n; ``table`` bit ``k`` is f(Point(n, k))."""

    n: int
    table: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_ENUM_N:
            raise ValueError(f"truth tables need 1 <= n <= {MAX_ENUM_N}")
        if not 0 <= self.table < (1 << (1 << self.n)):
            raise ValueError("truth table out of range")

    @classmethod
    def from_oracle(cls, oracle: FunctionOracle) -> "TruthTableOracle":
        n = oracle.dimension()
        if n > MAX_ENUM_N:
            raise ValueError(f"dimension {n} too large to tabulate")
        table = 0
        for k in range(1 << n):
            if oracle.eval(Point(n, k)):
                table |= 1 << k
        return cls(n, table)

    def dimension(self) -> int:
        return self.n

    def eval(self, x: Point) -> int:
        if x.n != self.n:
            raise ValueError(f"dimension mismatch: {x.n} vs {self.n}")
        return (self.table >> x.bits) & 1

    @cached_property
    def _ones(self) -> np.ndarray:
        arr = Point(1 << self.n, self.table).to_array() if self.table else np.zeros(1 << self.n, np.uint8)
        return np.flatnonzero(arr)

    def samp(self, rng: np.random.Generator) -> Point:
        if self._ones.size == 0:
            raise ValueError("function has no satisfying assignments")
        return Point(self.n, int(self._ones[rng.integers(0, self._ones.size)]))


@dataclass(frozen=True)
class ConstantOracle:
    n: int
    value: int = 1

    def dimension(self) -> int:
        return self.n

    def eval(self, x: Point) -> int:
        return self.value

    def samp(self, rng: np.random.Generator) -> Point:
        if not self.value:
            raise ValueError("constant-0 function has no satisfying assignments")
        return Point.random(self.n, rng)


def eval_yes(spec: BallSpec, x: Point) -> int:
    return spec.eval(x)


def eval_no(spec: NoSpec, x: Point) -> int:
    return spec.eval(x)


def piece_index(spec: NoSpec, x: Point) -> int:
    return spec.piece_index(x)


def piece_bits(index: int, t: int) -> str:
    """Text form of a piece index; character ``i`` is the sign test of hyperplane ``i+1``."""
    return format(index, f"0{t}b")[::-1]


def samp_yes(spec: BallSpec, rng: np.random.Generator) -> Point:
    return spec.samp(rng)


def samp_no(spec: NoSpec, rng: np.random.Generator, max_tries: int | None = None) -> Point:
    return spec.samp(rng, max_tries)


def enumerate_satisfying(oracle: FunctionOracle) -> list[Point]:
    """All satisfying points, in lexicographic order of their bit strings."""
    n = oracle.dimension()
    if n > MAX_ENUM_N:
        raise ValueError(f"dimension {n} too large to enumerate (max {MAX_ENUM_N})")
    out = []
    for v in range(1 << n):
        # v read MSB-first is the string; reversing gives the little-endian code
        x = Point.from_str(format(v, f"0{n}b"))
        if oracle.eval(x):
            out.append(x)
    return out


def draw_yes(params: Params, rng: np.random.Generator) -> BallSpec:
    return BallSpec(params.n, Point.random(params.n, rng), params.r)


def draw_no(params: Params, rng: np.random.Generator, label_mode: str | None = None,
            z: Point | None = None) -> NoSpec:
    """Random no-instance; the center is uniform unless ``z`` is given."""
    if z is None:
        z = Point.random(params.n, rng)
    zetas = tuple(SignVector.random(params.n, rng) for _ in range(params.t))
    return NoSpec(params.n, z, params.r, zetas, LabelTable.random(params.t, rng, label_mode))


def spec_to_json(spec) -> str:
    return json.dumps(spec.to_json(), sort_keys=True)


def spec_from_json(data) -> BallSpec | NoSpec:
    d = json.loads(data) if isinstance(data, (str, bytes)) else data
    n, r = int(d["n"]), int(d["r"])
    z = Point.from_hex(n, d["z"])
    if d["type"] == "ball":
        return BallSpec(n, z, r)
    if d["type"] == "no":
        zetas = tuple(SignVector.from_hex(n, h) for h in d["zetas"])
        return NoSpec(n, z, r, zetas, LabelTable.from_json(len(zetas), d["labels"]))
    raise ValueError(f"unknown instance type {d['type']!r}")
