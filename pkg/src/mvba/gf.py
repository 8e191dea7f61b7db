"""Arithmetic in GF(2^w) for 1 <= w <= 16.

Elements are plain ints (or numpy integer arrays) in ``[0, 2**w)``. A
:class:`GaloisField` builds log/antilog tables once and then offers scalar
ops, vectorised elementwise ops and small dense linear algebra. The
:class:`FieldElement` wrapper exists for callers who want operator syntax.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_WIDTH = 16

# Well-known primitive polynomials, bit 0 = constant term.
DEFAULT_POLYS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}


class SingularMatrixError(ArithmeticError):
    """Raised when a linear system over the field has no unique solution."""


def poly_degree(p: int) -> int:
    return p.bit_length() - 1


def poly_mod(a: int, m: int) -> int:
    dm = poly_degree(m)
    while a and poly_degree(a) >= dm:
        a ^= m << (poly_degree(a) - dm)
    return a


def poly_mulmod(a: int, b: int, m: int) -> int:
    """Carry-less multiply then reduce; the slow reference path."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
    return poly_mod(r, m)


def is_irreducible(poly: int) -> bool:
    """Exhaustive trial division by every polynomial of degree 1..deg/2."""
    d = poly_degree(poly)
    if d < 1:
        return False
    for divisor in range(2, 1 << (d // 2 + 1)):
        if poly_mod(poly, divisor) == 0:
            return False
    return True


class GaloisField:
    """GF(2^width) with reduction polynomial ``poly``."""

    def __init__(self, width: int = 16, poly: int | None = None):
        if not 1 <= width <= MAX_WIDTH:
            raise ValueError(f"field width must be in 1..{MAX_WIDTH}, got {width}")
        poly = DEFAULT_POLYS[width] if poly is None else poly
        if poly_degree(poly) != width:
            raise ValueError(f"reduction polynomial {poly:#x} does not have degree {width}")
        if not is_irreducible(poly):
            raise ValueError(f"reduction polynomial {poly:#x} is reducible")
        self.width = width
        self.poly = poly
        self.order = 1 << width
        self._build_tables()

    def _build_tables(self) -> None:
        q = self.order
        gen, powers = self._generator_powers()
        exp = np.zeros(4 * q + 1, dtype=np.int64)
        log = np.full(q, 2 * q, dtype=np.int64)  # log(0) -> sentinel, lands in zero tail
        exp[: q - 1] = powers
        log[powers] = np.arange(q - 1)
        exp[q - 1 : 2 * (q - 1)] = exp[: q - 1]
        self.generator = gen
        self._exp = exp
        self._log = log
        self._exp_list = exp.tolist()
        self._log_list = log.tolist()

    def _generator_powers(self) -> tuple[int, list[int]]:
        """Find a primitive element and list its powers 0..q-2."""
        q = self.order
        for g in range(2 if q > 2 else 1, q):
            powers, x = [], 1
            for _ in range(q - 1):
                powers.append(x)
                if g == 2:
                    x <<= 1
                    if x & q:
                        x ^= self.poly
                else:
                    x = poly_mulmod(x, g, self.poly)
                if x == 1:
                    break
            if len(powers) == q - 1:
                return g, powers
        raise ValueError("no primitive element found")  # unreachable for irreducible poly

    def __repr__(self) -> str:
        return f"GaloisField(width={self.width}, poly={self.poly:#x})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GaloisField) and (self.width, self.poly) == (other.width, other.poly)

    def __hash__(self) -> int:
        return hash((self.width, self.poly))

    # scalar ops

    def check(self, a: int) -> int:
        if not 0 <= a < self.order:
            raise ValueError(f"{a} is not an element of GF(2^{self.width})")
        return a

    @staticmethod
    def add(a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp_list[self._log_list[a] + self._log_list[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return self._exp_list[(self.order - 1 - self._log_list[a]) % (self.order - 1)]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if e == 0:
            return 1
        if a == 0:
            return 0
        return self._exp_list[(self._log_list[a] * e) % (self.order - 1)]

    # vectorised ops

    def mul_arr(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        return self._exp[self._log[a] + self._log[b]]

    def matmul(self, A: np.ndarray, X: np.ndarray) -> np.ndarray:
        """``A @ X`` over the field; A is (r, k), X is (k, L)."""
        A = np.asarray(A, dtype=np.int64)
        X = np.asarray(X, dtype=np.int64)
        prod = self._exp[self._log[A][:, :, None] + self._log[X][None, :, :]]
        return np.bitwise_xor.reduce(prod, axis=1)

    def eval_poly(self, coeffs: Sequence[int], x: int) -> int:
        """Horner evaluation of ``sum coeffs[i] * x**i``."""
        acc = 0
        for a in reversed(coeffs):
            acc = self.mul(acc, x) ^ a
        return acc

    def vandermonde(self, points: Sequence[int], k: int) -> np.ndarray:
        """Rows ``[1, p, p^2, ..., p^(k-1)]`` for each point."""
        return np.array([[self.pow(p, j) for j in range(k)] for p in points], dtype=np.int64)

    def solve(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Solve ``A X = B`` by Gaussian elimination, first-nonzero pivoting.

        ``B`` may be a vector (k,) or a matrix (k, L); the result has the same
        shape. Raises :class:`SingularMatrixError` if A is not invertible.
        """
        A = np.array(A, dtype=np.int64)
        B = np.array(B, dtype=np.int64)
        k = A.shape[0]
        if A.shape != (k, k):
            raise ValueError(f"coefficient matrix must be square, got {A.shape}")
        if B.shape[0] != k:
            raise ValueError("right-hand side length does not match matrix")
        vec = B.ndim == 1
        if vec:
            B = B[:, None]
        M = np.concatenate([A, B], axis=1)
        for col in range(k):
            nz = np.nonzero(M[col:, col])[0]
            if nz.size == 0:
                raise SingularMatrixError("matrix is singular")
            piv = col + int(nz[0])
            if piv != col:
                M[[col, piv]] = M[[piv, col]]
            M[col] = self.mul_arr(M[col], self.inv(int(M[col, col])))
            factors = M[:, col].copy()
            factors[col] = 0
            rows = np.nonzero(factors)[0]
            if rows.size:
                M[rows] ^= self.mul_arr(factors[rows][:, None], M[col][None, :])
        X = M[:, k:]
        return X[:, 0] if vec else X

    def inverse_matrix(self, A: np.ndarray) -> np.ndarray:
        k = len(A)
        return self.solve(A, np.eye(k, dtype=np.int64))


@lru_cache(maxsize=None)
def field(width: int, poly: int | None = None) -> GaloisField:
    """Shared, cached field instance."""
    return GaloisField(width, poly)


@dataclass(frozen=True)
class FieldElement:
    value: int
    gf: GaloisField

    def __post_init__(self):
        self.gf.check(self.value)

    def _same(self, other: FieldElement) -> None:
        if self.gf != other.gf:
            raise ValueError("operands belong to different fields")

    def __add__(self, other: FieldElement) -> FieldElement:
        self._same(other)
        return FieldElement(self.value ^ other.value, self.gf)

    __sub__ = __add__

    def __mul__(self, other: FieldElement) -> FieldElement:
        self._same(other)
        return FieldElement(self.gf.mul(self.value, other.value), self.gf)

    def inverse(self) -> FieldElement:
        return FieldElement(self.gf.inv(self.value), self.gf)

    def __int__(self) -> int:
        return self.value


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()


def solve_system(A: Sequence[Sequence[FieldElement]], b: Sequence[FieldElement]) -> list[FieldElement]:
    """Solve ``A x = b`` for FieldElement inputs."""
    if not b:
        return []
    gf = b[0].gf
    Ai = np.array([[e.value for e in row] for row in A], dtype=np.int64)
    bi = np.array([e.value for e in b], dtype=np.int64)
    return [FieldElement(int(v), gf) for v in gf.solve(Ai, bi)]
