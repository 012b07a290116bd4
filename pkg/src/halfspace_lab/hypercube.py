"""Bit-exact primitives on the Boolean hypercube {0,1}^n.

Points are stored as Python integers. Bit ``j`` of the integer is coordinate
``j + 1``; hex serialization is the little-endian byte string of that integer,
so byte ``k`` holds coordinates ``8k+1 .. 8k+8`` with the lowest coordinate in
the least significant bit. Text form (``"0101"``) lists coordinates left to
right, i.e. character ``j`` is bit ``j``.

All samplers take an explicit :class:`numpy.random.Generator`.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


def _nbytes(n: int) -> int:
    return (n + 7) // 8


def _bits_to_array(bits: int, n: int) -> np.ndarray:
    raw = np.frombuffer(bits.to_bytes(_nbytes(n), "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n]


def _array_to_bits(arr) -> int:
    packed = np.packbits(np.asarray(arr, dtype=np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _mask_from_indices(n: int, idx) -> int:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size < 64:
        mask = 0
        for j in idx.tolist():
            mask |= 1 << j
        return mask
    row = np.zeros(n, dtype=np.uint8)
    row[idx] = 1
    return _array_to_bits(row)


@dataclass(frozen=True)
class Point:
    """A point of {0,1}^n."""

    n: int
    bits: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError("bits out of range for dimension")

    @classmethod
    def zeros(cls, n: int) -> "Point":
        return cls(n, 0)

    @classmethod
    def ones(cls, n: int) -> "Point":
        return cls(n, (1 << n) - 1)

    @classmethod
    def from_str(cls, s: str) -> "Point":
        if not s or set(s) - {"0", "1"}:
            raise ValueError(f"not a bit string: {s!r}")
        return cls(len(s), int(s[::-1], 2))

    @classmethod
    def from_indices(cls, n: int, idx: Iterable[int]) -> "Point":
        return cls(n, _mask_from_indices(n, list(idx)))

    @classmethod
    def from_array(cls, arr) -> "Point":
        arr = np.asarray(arr)
        return cls(int(arr.shape[0]), _array_to_bits(arr))

    @classmethod
    def from_hex(cls, n: int, text: str) -> "Point":
        raw = bytes.fromhex(text)
        if len(raw) != _nbytes(n):
            raise ValueError(f"expected {_nbytes(n)} bytes for n={n}, got {len(raw)}")
        return cls(n, int.from_bytes(raw, "little"))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Point":
        raw = int.from_bytes(rng.bytes(_nbytes(n)), "little")
        return cls(n, raw & ((1 << n) - 1))

    def to_hex(self) -> str:
        return self.bits.to_bytes(_nbytes(self.n), "little").hex()

    def to_str(self) -> str:
        return format(self.bits, f"0{self.n}b")[::-1]

    def to_array(self) -> np.ndarray:
        return _bits_to_array(self.bits, self.n)

    def weight(self) -> int:
        return self.bits.bit_count()

    def support(self) -> list[int]:
        """0-based indices of the 1-coordinates."""
        return np.flatnonzero(self.to_array()).tolist()

    def flip(self, idx: Iterable[int]) -> "Point":
        return Point(self.n, self.bits ^ _mask_from_indices(self.n, list(idx)))

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self.n:
            raise IndexError(j)
        return (self.bits >> j) & 1

    def __xor__(self, other: "Point") -> "Point":
        return xor(self, other)

    def __str__(self):
        return self.to_str()


@dataclass(frozen=True)
class SignVector:
    """A vector in {+1,-1}^n; bit ``j`` of ``plus`` is set iff entry ``j`` is +1."""

    n: int
    plus: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if not 0 <= self.plus < (1 << self.n):
            raise ValueError("sign mask out of range for dimension")

    @classmethod
    def from_signs(cls, signs: Sequence[int]) -> "SignVector":
        if any(v not in (1, -1) for v in signs):
            raise ValueError("signs must be +1 or -1")
        return cls(len(signs), _mask_from_indices(len(signs), [j for j, v in enumerate(signs) if v == 1]))

    @classmethod
    def from_hex(cls, n: int, text: str) -> "SignVector":
        p = Point.from_hex(n, text)
        return cls(n, p.bits)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "SignVector":
        return cls(n, Point.random(n, rng).bits)

    def to_hex(self) -> str:
        return Point(self.n, self.plus).to_hex()

    def signs(self) -> tuple[int, ...]:
        return tuple(int(v) for v in 2 * _bits_to_array(self.plus, self.n).astype(np.int8) - 1)

    def to_array(self) -> np.ndarray:
        return 2 * _bits_to_array(self.plus, self.n).astype(np.int8) - 1


@dataclass(frozen=True)
class Params:
    """Instance and budget parameters.

    ``delta`` is a :class:`~fractions.Fraction`; ``r`` must be even with
    ``2 <= r <= n/2``. Use :meth:`manual` for explicit desk-scale values and
    :meth:`paper_mode` for the asymptotic parameter formulas.
    """

    n: int
    delta: Fraction
    r: int
    s: int
    t: int
    q: int
    log_base: int = 2

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"n must be >= 4, got {self.n}")
        if self.r % 2 or not 2 <= self.r <= self.n // 2:
            raise ValueError(f"r must be even with 2 <= r <= n/2, got r={self.r}, n={self.n}")
        if not 0 < self.delta < Fraction(1, 2):
            raise ValueError(f"delta must lie in (0, 1/2), got {self.delta}")
        for name in ("s", "t", "q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.log_base < 2:
            raise ValueError("log_base must be >= 2")

    def log(self, x: float) -> float:
        return math.log(x, self.log_base)

    @classmethod
    def manual(cls, n: int, r: int, s: int = 1, t: int | None = None, q: int = 1,
               delta: Fraction | None = None, log_base: int = 2) -> "Params":
        if delta is None:
            # r/n, except at the r = n/2 edge where delta must stay below 1/2
            delta = Fraction(r, n) if 2 * r < n else Fraction(1, 4)
        if t is None:
            t = max(1, math.ceil(10 * math.log(s, log_base) - 1e-12)) if s > 1 else 1
        return cls(n=n, delta=Fraction(delta), r=r, s=s, t=t, q=q, log_base=log_base)

    @classmethod
    def paper_mode(cls, n: int, log_base: int = 2) -> "Params":
        """delta = 1/log^2 n, r = delta*n rounded down to even, s, t, q from the asymptotic formulas.

        s and t are clamped to 1: the formula for s is below 1 at every feasible n.
        """
        L = math.log(n, log_base)
        delta = Fraction(1) / Fraction(L * L).limit_denominator(10**9)
        r = max(2, int(delta * n) // 2 * 2)
        s = max(1, round(0.05 * L / math.log(L, log_base)))
        t = max(1, round(10 * math.log(s, log_base)))
        q = max(1, round(n ** 0.01))
        return cls(n=n, delta=delta, r=r, s=s, t=t, q=q, log_base=log_base)

    def to_dict(self) -> dict:
        return {"n": self.n, "delta": f"{self.delta.numerator}/{self.delta.denominator}",
                "r": self.r, "s": self.s, "t": self.t, "q": self.q, "log_base": self.log_base}

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        return cls(n=int(d["n"]), delta=Fraction(d["delta"]), r=int(d["r"]), s=int(d["s"]),
                   t=int(d["t"]), q=int(d["q"]), log_base=int(d.get("log_base", 2)))


def _same_dim(x, y):
    if x.n != y.n:
        raise ValueError(f"dimension mismatch: {x.n} vs {y.n}")


def hamming(x: Point, y: Point) -> int:
    _same_dim(x, y)
    return (x.bits ^ y.bits).bit_count()


def xor(x: Point, y: Point) -> Point:
    _same_dim(x, y)
    return Point(x.n, x.bits ^ y.bits)


def signed_dot(zeta: SignVector, u: Point) -> int:
    """Sum of ``zeta_j`` over the 1-coordinates of ``u``."""
    _same_dim(zeta, u)
    return 2 * (zeta.plus & u.bits).bit_count() - u.bits.bit_count()


def random_subset(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform k-subset of range(n) as a sorted index array."""
    if not 0 <= k <= n:
        raise ValueError(f"subset size {k} out of range for n={n}")
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if k * k <= 2 * n:
        # i.i.d. indices conditioned on distinctness are a uniform ordered k-subset
        while True:
            idx = rng.integers(0, n, size=k)
            u = np.unique(idx)
            if u.size == k:
                return u
    return np.sort(rng.choice(n, size=k, replace=False))


def sample_sphere(z: Point, r: int, rng: np.random.Generator) -> Point:
    if not 0 <= r <= z.n:
        raise ValueError(f"radius {r} out of range for n={z.n}")
    return Point(z.n, z.bits ^ _mask_from_indices(z.n, random_subset(z.n, r, rng)))


@lru_cache(maxsize=256)
def _ball_weights(n: int, r: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    # C(n,k) via C(n,k) = C(n,k-1) * (n-k+1) / k, exact in integers
    w = [1]
    for k in range(1, r + 1):
        w.append(w[-1] * (n - k + 1) // k)
    cum, acc = [], 0
    for v in w:
        acc += v
        cum.append(acc)
    return tuple(w), tuple(cum)


def ball_size(n: int, r: int) -> int:
    return _ball_weights(n, r)[1][-1]


def ball_weight_law(n: int, r: int) -> list[Fraction]:
    """Exact law of the distance to the center for a uniform point of the radius-r ball."""
    if not 0 <= r <= n:
        raise ValueError(f"radius {r} out of range for n={n}")
    w, cum = _ball_weights(n, r)
    total = cum[-1]
    return [Fraction(v, total) for v in w]


def off_sphere_probability(n: int, r: int) -> Fraction:
    """Pr[ham(v, z) < r] for v uniform on the radius-r ball."""
    return 1 - ball_weight_law(n, r)[-1]


def _randbelow(bound: int, rng: np.random.Generator) -> int:
    nbits = bound.bit_length()
    nb = (nbits + 7) // 8
    shift = 8 * nb - nbits
    while True:
        v = int.from_bytes(rng.bytes(nb), "little") >> shift
        if v < bound:
            return v


def sample_ball_weight(n: int, r: int, rng: np.random.Generator) -> int:
    """Exact draw of the distance to the center for a uniform ball point."""
    _, cum = _ball_weights(n, r)
    return bisect.bisect_right(cum, _randbelow(cum[-1], rng))


def sample_ball(z: Point, r: int, rng: np.random.Generator) -> Point:
    if not 0 <= r <= z.n:
        raise ValueError(f"radius {r} out of range for n={z.n}")
    return sample_sphere(z, sample_ball_weight(z.n, r, rng), rng)


# Batched samplers: rows of a (m, n) uint8 matrix. Same laws as the scalar paths.

def flip_masks(n: int, weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Matrix whose row i is the indicator of a uniform ``weights[i]``-subset of range(n)."""
    weights = np.asarray(weights, dtype=np.int64)
    m = weights.shape[0]
    out = np.zeros((m, n), dtype=np.uint8)
    for k in np.unique(weights).tolist():
        rows = np.flatnonzero(weights == k)
        if k == 0:
            continue
        if k * k <= 2 * n:
            pending = rows
            while pending.size:
                idx = rng.integers(0, n, size=(pending.size, k))
                srt = np.sort(idx, axis=1)
                ok = np.all(srt[:, 1:] != srt[:, :-1], axis=1) if k > 1 else np.ones(pending.size, bool)
                done = pending[ok]
                out[np.repeat(done, k), idx[ok].ravel()] = 1
                pending = pending[~ok]
        else:
            keys = rng.random((rows.size, n))
            idx = np.argpartition(keys, k - 1, axis=1)[:, :k]
            out[np.repeat(rows, k), idx.ravel()] = 1
    return out


def ball_weights_many(n: int, r: int, m: int, rng: np.random.Generator) -> np.ndarray:
    # float64 cdf from the exact law; error far below 2**-50
    probs = np.array([float(p) for p in ball_weight_law(n, r)])
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(m), side="right").astype(np.int64)


def sample_sphere_many(z: Point, r: int, m: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= r <= z.n:
        raise ValueError(f"radius {r} out of range for n={z.n}")
    return flip_masks(z.n, np.full(m, r), rng) ^ z.to_array()


def sample_ball_many(z: Point, r: int, m: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= r <= z.n:
        raise ValueError(f"radius {r} out of range for n={z.n}")
    return flip_masks(z.n, ball_weights_many(z.n, r, m, rng), rng) ^ z.to_array()


def rows_to_points(mat: np.ndarray) -> list[Point]:
    n = mat.shape[1]
    packed = np.packbits(mat.astype(np.uint8), axis=1, bitorder="little")
    return [Point(n, int.from_bytes(row.tobytes(), "little")) for row in packed]


def points_to_rows(points: Sequence[Point]) -> np.ndarray:
    if not points:
        raise ValueError("empty point sequence")
    n = points[0].n
    for p in points:
        _same_dim(p, points[0])
    nb = _nbytes(n)
    buf = b"".join(p.bits.to_bytes(nb, "little") for p in points)
    raw = np.frombuffer(buf, dtype=np.uint8).reshape(len(points), nb)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :n]


def row_codes(mat: np.ndarray) -> np.ndarray:
    """Integer codes (bit j = column j) of the rows of a 0/1 matrix with at most 62 columns."""
    n = mat.shape[1]
    if n > 62:
        raise ValueError("row codes need n <= 62")
    return mat.astype(np.int64) @ (np.int64(1) << np.arange(n, dtype=np.int64))
