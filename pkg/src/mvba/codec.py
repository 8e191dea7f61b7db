"""Reed-Solomon style MDS coding of one generation of data.

A generation carries ``n - t`` data symbols of ``c`` bits each. The data
symbols are the coefficients of a polynomial of degree ``< n - t`` and every
coded packet is that polynomial evaluated at a fixed, publicly known point:
``y_i`` at point ``i`` (``1 <= i <= 2(n-1)``) and ``z_j`` at point
``2(n-1) + j``. Distinct points make any ``n - t`` packets decodable.

Symbols wider than 16 bits are split into independent lanes of at most 16
bits, each coded over its own GF(2^w); a packet is then a vector of lane
values sharing one evaluation point. Everything below works lane-wise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from mvba.gf import MAX_WIDTH, GaloisField
from mvba.gf import field as get_field


class InsufficientPacketsError(ValueError):
    """Fewer than ``n - t`` packets were supplied to a decoder."""


def lane_widths(c: int) -> tuple[int, ...]:
    """Split a c-bit symbol into near-equal lanes of at most 16 bits."""
    if c < 1:
        raise ValueError("symbol size must be positive")
    if c <= MAX_WIDTH:
        return (c,)
    lanes = -(-c // MAX_WIDTH)
    base, extra = divmod(c, lanes)
    return (base + 1,) * extra + (base,) * (lanes - extra)


@dataclass(frozen=True)
class CodeSpec:
    n: int
    t: int
    c: int
    y_points: tuple[int, ...]
    z_points: tuple[int, ...]
    lanes: tuple[int, ...]

    @property
    def k(self) -> int:
        """Number of data symbols per generation."""
        return self.n - self.t

    @property
    def num_lanes(self) -> int:
        return len(self.lanes)

    @property
    def groups(self) -> tuple[tuple[GaloisField, slice], ...]:
        return _groups(self.lanes)

    def y_point(self, i: int) -> int:
        return self.y_points[i - 1]

    def z_point(self, j: int) -> int:
        return self.z_points[j - 1]

    def point_of(self, kind: str, index: int) -> int:
        return self.y_point(index) if kind == "Y" else self.z_point(index)


@lru_cache(maxsize=None)
def _groups(lanes: tuple[int, ...]) -> tuple[tuple[GaloisField, slice], ...]:
    out, start = [], 0
    for w in sorted(set(lanes), reverse=True):
        count = lanes.count(w)
        out.append((get_field(w), slice(start, start + count)))
        start += count
    return tuple(out)


def make_code_spec(n: int, t: int, c: int) -> CodeSpec:
    if n < 2 or t < 0 or 3 * t >= n:
        raise ValueError(f"need n >= 2 and 0 <= t < n/3, got n={n}, t={t}")
    lanes = lane_widths(c)
    needed = 3 * (n - 1) + 1
    if (1 << min(lanes)) < needed:
        raise ValueError(
            f"symbol size c={c} gives GF(2^{min(lanes)}) lanes, too small for "
            f"{needed - 1} distinct nonzero evaluation points"
        )
    ny = 2 * (n - 1)
    return CodeSpec(
        n=n,
        t=t,
        c=c,
        y_points=tuple(range(1, ny + 1)),
        z_points=tuple(range(ny + 1, ny + n)),
        lanes=lanes,
    )


@dataclass(eq=False)
class DataVector:
    """The ``n - t`` data symbols of one generation, shape (n - t, lanes)."""

    symbols: np.ndarray

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DataVector) and np.array_equal(self.symbols, other.symbols)

    def __repr__(self) -> str:
        return f"DataVector({self.symbols.tolist()})"

    @classmethod
    def from_ints(cls, values: Sequence[int]) -> DataVector:
        """Single-lane convenience constructor."""
        return cls(np.array(values, dtype=np.int64)[:, None])

    @classmethod
    def zeros(cls, spec: CodeSpec) -> DataVector:
        return cls(np.zeros((spec.k, spec.num_lanes), dtype=np.int64))


@dataclass(eq=False)
class Packet:
    """One coded symbol on the wire."""

    point: int
    value: np.ndarray
    kind: str  # "Y" or "Z"
    index: int
    origin: int
    missing: bool = False

    def same_value(self, other: Packet) -> bool:
        return np.array_equal(self.value, other.value)

    def __repr__(self) -> str:
        flag = ", missing" if self.missing else ""
        return f"Packet({self.kind}{self.index}@{self.point}, {self.value.tolist()}, from {self.origin}{flag})"


def zero_packet(spec: CodeSpec, kind: str, index: int, origin: int) -> Packet:
    """Canonical stand-in for a packet that never arrived."""
    return Packet(
        spec.point_of(kind, index),
        np.zeros(spec.num_lanes, dtype=np.int64),
        kind,
        index,
        origin,
        missing=True,
    )


# lane-vectorised core


@lru_cache(maxsize=4096)
def _vandermonde(lanes: tuple[int, ...], points: tuple[int, ...], k: int) -> tuple[np.ndarray, ...]:
    return tuple(gf.vandermonde(points, k) for gf, _ in _groups(lanes))


@lru_cache(maxsize=4096)
def _inverse_vandermonde(lanes: tuple[int, ...], points: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    k = len(points)
    return tuple(gf.inverse_matrix(gf.vandermonde(points, k)) for gf, _ in _groups(lanes))


def evaluate(spec: CodeSpec, coeffs: np.ndarray, points: Sequence[int]) -> np.ndarray:
    """Evaluate the lane polynomials with coefficients ``coeffs`` (k, L) at ``points``."""
    points = tuple(points)
    out = np.empty((len(points), coeffs.shape[1]), dtype=np.int64)
    for (gf, sl), V in zip(spec.groups, _vandermonde(spec.lanes, points, coeffs.shape[0])):
        out[:, sl] = gf.matmul(V, coeffs[:, sl])
    return out


def interpolate(spec: CodeSpec, points: Sequence[int], values: np.ndarray) -> np.ndarray:
    """Coefficients (k, L) of the polynomial through exactly k (point, value) rows."""
    points = tuple(points)
    out = np.empty((len(points), values.shape[1]), dtype=np.int64)
    for (gf, sl), Vinv in zip(spec.groups, _inverse_vandermonde(spec.lanes, points)):
        out[:, sl] = gf.matmul(Vinv, values[:, sl])
    return out


def _stack(packets: Sequence[Packet], spec: CodeSpec) -> tuple[list[int], np.ndarray]:
    if len(packets) < spec.k:
        raise InsufficientPacketsError(f"need at least {spec.k} packets, got {len(packets)}")
    ordered = sorted(packets, key=lambda p: p.point)
    points = [p.point for p in ordered]
    if len(set(points)) != len(points):
        raise ValueError("packets must have distinct evaluation points")
    return points, np.stack([p.value for p in ordered])


def lanes_consistent(spec: CodeSpec, points: Sequence[int], values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-lane consistency of (point, value) rows sorted by point.

    Returns ``(coeffs, ok)`` where coeffs is decoded from the first k rows and
    ``ok[j]`` says whether every row of lane j lies on that polynomial.
    """
    k = spec.k
    coeffs = interpolate(spec, points[:k], values[:k])
    if len(points) == k:
        return coeffs, np.ones(values.shape[1], dtype=bool)
    rest = evaluate(spec, coeffs, points[k:])
    return coeffs, np.all(rest == values[k:], axis=0)


# public operations


def encode(data: DataVector, spec: CodeSpec) -> list[Packet]:
    return encode_subset(data, spec, m=0, accusers=())


def encode_subset(data: DataVector, spec: CodeSpec, m: int | None = None, accusers: Iterable[int] = ()) -> list[Packet]:
    """Encode for the peers not accusing the source.

    Slots ``y_i`` and ``y_{n-1+i}`` of every accusing peer ``i`` are left out,
    giving ``2(n - 1 - m)`` packets.
    """
    accusers = set(accusers)
    if m is not None and m != len(accusers):
        raise ValueError("m must equal the number of accusers")
    if data.symbols.shape != (spec.k, spec.num_lanes):
        raise ValueError(f"data must have shape {(spec.k, spec.num_lanes)}, got {data.symbols.shape}")
    n = spec.n
    if 2 * (n - 1 - len(accusers)) <= spec.k:
        raise ValueError("too many accusers for the remaining packets to exceed n - t")
    indices = [i for i in range(1, 2 * (n - 1) + 1) if (i - 1) % (n - 1) + 1 not in accusers]
    values = evaluate(spec, data.symbols, [spec.y_point(i) for i in indices])
    return [Packet(spec.y_point(i), values[r], "Y", i, 0) for r, i in enumerate(indices)]


def decode(packets: Sequence[Packet], spec: CodeSpec) -> DataVector:
    """Solve for the data from the n - t packets with the smallest points."""
    points, values = _stack(packets, spec)
    return DataVector(interpolate(spec, points[: spec.k], values[: spec.k]))


def check_consistency(packets: Sequence[Packet], spec: CodeSpec) -> DataVector | None:
    """Decoded data if every packet lies on one polynomial, else None."""
    points, values = _stack(packets, spec)
    coeffs, ok = lanes_consistent(spec, points, values)
    return DataVector(coeffs) if ok.all() else None


def make_z(received: Sequence[Packet], peer_id: int, spec: CodeSpec) -> Packet | None:
    """Regenerate this peer's reserved packet, or None if ``received`` is inconsistent."""
    data = check_consistency(received, spec)
    if data is None:
        return None
    point = spec.z_point(peer_id)
    return Packet(point, evaluate(spec, data.symbols, [point])[0], "Z", peer_id, peer_id)


def all_subsets_agree(packets: Sequence[Packet], spec: CodeSpec) -> bool:
    """Literal check: every k-subset decodes to the same data. Slow; for tests and audits."""
    points, values = _stack(packets, spec)
    first = None
    for idx in combinations(range(len(points)), spec.k):
        coeffs = interpolate(spec, [points[i] for i in idx], values[list(idx)])
        if first is None:
            first = coeffs
        elif not np.array_equal(first, coeffs):
            return False
    return True


# bit packing


def bits_to_symbols(bits: np.ndarray, spec: CodeSpec) -> np.ndarray:
    """Big-endian pack of rows of c bits into lane values, (r, c) -> (r, L)."""
    bits = np.asarray(bits, dtype=np.int64)
    rows = bits.shape[0]
    out = np.empty((rows, spec.num_lanes), dtype=np.int64)
    col = 0
    for gf, sl in spec.groups:
        w = gf.width
        count = sl.stop - sl.start
        chunk = bits[:, col : col + w * count].reshape(rows, count, w)
        out[:, sl] = chunk @ (1 << np.arange(w - 1, -1, -1, dtype=np.int64))
        col += w * count
    return out


def symbols_to_bits(symbols: np.ndarray, spec: CodeSpec) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.int64)
    rows = symbols.shape[0]
    parts = []
    for gf, sl in spec.groups:
        shifts = np.arange(gf.width - 1, -1, -1, dtype=np.int64)
        parts.append(((symbols[:, sl, None] >> shifts) & 1).reshape(rows, -1))
    return np.concatenate(parts, axis=1).astype(np.uint8)


def bits_to_data(bits: np.ndarray, spec: CodeSpec) -> DataVector:
    return DataVector(bits_to_symbols(np.asarray(bits).reshape(spec.k, spec.c), spec))


def data_to_bits(data: DataVector, spec: CodeSpec) -> np.ndarray:
    return symbols_to_bits(data.symbols, spec).reshape(-1)
