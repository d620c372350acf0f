"""Validation, primitivity testing, and the row decomposition of a matrix.

A validated matrix is square, entrywise non-negative, and has strictly
positive row sums.  It can then be split into a fitness vector ``f`` (the
row sums) and a row-stochastic kernel ``M`` with ``A[i, j] = f[i] * M[i, j]``.
All functions here are pure and all returned arrays are frozen read-only,
so values can be shared freely across threads.

File formats accepted by the CLI for matrices (parsing lives in
:mod:`perronmc.cli`):

* JSON: ``{"n": <int>, "rows": [[a11, ..., a1n], ..., [an1, ..., ann]]}``
* CSV: ``n`` lines of ``n`` comma-separated decimal reals, no header.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NegativeEntry,
    NonFiniteEntry,
    NonPositiveScale,
    NotPrimitive,
    NotSquare,
    ZeroRow,
)

__all__ = [
    "NonNegativeMatrix",
    "PrimitivityCertificate",
    "RowDecomposition",
    "validate",
    "check_primitive",
    "decompose",
    "scale",
    "wielandt_bound",
]


@dataclass(frozen=True)
class NonNegativeMatrix:
    """A validated square non-negative matrix with positive row sums.

    Attributes:
        n: matrix size N.
        entries: (N, N) float array, read-only.
    """

    n: int
    entries: np.ndarray


@dataclass(frozen=True)
class PrimitivityCertificate:
    """Witness that some power of the matrix is entrywise positive.

    Attributes:
        exponent_m: the smallest m with A**m entrywise positive; always
            within [1, (N-1)**2 + 1].
    """

    exponent_m: int


@dataclass(frozen=True)
class RowDecomposition:
    """The factorization A[i, j] = fitness[i] * kernel[i, j].

    Attributes:
        fitness: length-N vector of row sums, strictly positive.
        kernel: (N, N) row-stochastic transition matrix.
    """

    fitness: np.ndarray
    kernel: np.ndarray

    @property
    def n(self) -> int:
        return self.fitness.shape[0]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def validate(raw) -> NonNegativeMatrix:
    """Check an array-like and wrap it as a NonNegativeMatrix.

    Args:
        raw: square array-like of reals.

    Raises:
        NotSquare: ragged, rectangular, or not 2-D input.
        NegativeEntry: some entry is < 0.
        NonFiniteEntry: some entry is NaN or infinite.
        ZeroRow: some row sums to 0, which would leave the transition
            kernel undefined on that row.
    """
    try:
        entries = np.array(raw, dtype=float)
    except (ValueError, TypeError) as exc:
        raise NotSquare(f"input could not be coerced to a numeric matrix: {exc}")
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.size == 0:
        raise NotSquare(f"expected a square matrix, got shape {entries.shape}")

    bad = ~np.isfinite(entries)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NonFiniteEntry(int(i), int(j), float(entries[i, j]))
    neg = entries < 0
    if neg.any():
        i, j = np.argwhere(neg)[0]
        raise NegativeEntry(int(i), int(j), float(entries[i, j]))
    row_sums = entries.sum(axis=1)
    zero = row_sums <= 0
    if zero.any():
        raise ZeroRow(int(np.argmax(zero)))

    return NonNegativeMatrix(n=entries.shape[0], entries=_freeze(entries))


def wielandt_bound(n: int) -> int:
    """Largest exponent that must be checked to certify primitivity."""
    return (n - 1) ** 2 + 1


def _bool_product(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # 0/1 float matmul keeps every intermediate <= N, so the zero pattern
    # is exact and no overflow is possible.
    return (p.astype(float) @ q.astype(float)) > 0.0


def _pattern_power(squares: list[np.ndarray], m: int) -> np.ndarray:
    """Zero pattern of A**m from cached patterns of A**(2**t)."""
    acc = None
    bit = 0
    while m:
        if m & 1:
            acc = squares[bit] if acc is None else _bool_product(acc, squares[bit])
        m >>= 1
        bit += 1
    return acc


def check_primitive(matrix: NonNegativeMatrix) -> PrimitivityCertificate:
    """Find the smallest m with A**m entrywise positive.

    Works on the zero/nonzero pattern only.  Because every row has a
    positive entry, positivity of A**m implies positivity of all higher
    powers, so the smallest exponent can be located by repeated squaring
    followed by a monotone binary search.

    Raises:
        NotPrimitive: no power up to (N-1)**2 + 1 is positive.
    """
    n = matrix.n
    bound = wielandt_bound(n)

    # squares[t] holds the zero pattern of A**(2**t).
    squares = [matrix.entries > 0.0]
    exponent = 1
    while not squares[-1].all():
        if exponent >= bound:
            raise NotPrimitive(n, bound)
        squares.append(_bool_product(squares[-1], squares[-1]))
        exponent *= 2

    if exponent == 1:
        return PrimitivityCertificate(exponent_m=1)

    # Smallest positive power lies in (exponent/2, exponent].
    lo, hi = exponent // 2, exponent
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if _pattern_power(squares, mid).all():
            hi = mid
        else:
            lo = mid
    if hi > bound:
        raise NotPrimitive(n, bound)
    return PrimitivityCertificate(exponent_m=hi)


def decompose(matrix: NonNegativeMatrix) -> RowDecomposition:
    """Split A into row sums and a row-stochastic kernel.

    Returns:
        RowDecomposition with ``fitness[i] = sum_j A[i, j]`` and
        ``kernel[i, j] = A[i, j] / fitness[i]``.
    """
    fitness = matrix.entries.sum(axis=1)
    kernel = matrix.entries / fitness[:, None]
    return RowDecomposition(fitness=_freeze(fitness), kernel=_freeze(kernel))


def scale(matrix: NonNegativeMatrix, c: float) -> NonNegativeMatrix:
    """Multiply every entry by c > 0.

    The zero pattern, and hence the primitivity exponent, is unchanged;
    the kernel of the decomposition is unchanged as well (exactly so when
    c is a power of two, since then both the entries and the row sums are
    scaled without rounding).

    Raises:
        NonPositiveScale: c <= 0.
    """
    if not c > 0:
        raise NonPositiveScale(float(c))
    return NonNegativeMatrix(n=matrix.n, entries=_freeze(matrix.entries * float(c)))
