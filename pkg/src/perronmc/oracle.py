"""Deterministic cross-checks: power iteration, the return-weight series,
and the mutation-selection equilibrium residual.

These routines share no code path with the Monte Carlo estimator, so
agreement between the two is meaningful evidence of correctness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Divergence, NoConvergence, NotOnSimplex
from .matrix_core import NonNegativeMatrix, decompose

__all__ = [
    "PerronPair",
    "LemmaSeries",
    "EquilibriumResidual",
    "power_iteration",
    "lemma_partial_sums",
    "quasispecies_residual",
]

DIVERGENCE_SLACK = 1e-6
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class PerronPair:
    """Dominant eigenvalue and simplex-normalized left eigenvector.

    ``vector @ A == eigenvalue * vector`` up to ``residual`` in L1.
    """

    eigenvalue: float
    vector: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True)
class LemmaSeries:
    """Terms of the first-return weight series at a trial eigenvalue.

    ``terms[0]`` is the direct-return term A[k, k] / lam; ``terms[n]`` for
    n >= 1 sums the weights of return paths of length n + 1 that avoid the
    base state in between.  At the true eigenvalue the partial sums increase
    to 1.
    """

    terms: np.ndarray
    partial_sums: np.ndarray
    tail_ratio: float


@dataclass(frozen=True)
class EquilibriumResidual:
    """Per-state gap between the two sides of the balance equation
    x_k * (sum_i x_i f(i)) = sum_i x_i f(i) M(i, k)."""

    per_state: np.ndarray
    max_abs: float
    mean_fitness: float


def power_iteration(matrix: NonNegativeMatrix, tol: float = 1e-13,
                    max_iter: int = 10**6) -> PerronPair:
    """Left-eigenpair by power iteration, normalized to the simplex.

    Each step maps v to v @ A and renormalizes by the L1 norm, which for a
    positive iterate is just the sum, so the normalization factor converges
    to the dominant eigenvalue.  Primitivity guarantees convergence.

    Raises:
        NoConvergence: iterate did not settle within ``max_iter`` steps
            (signals a nearly degenerate spectrum).
    """
    a = matrix.entries
    n = matrix.n
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = v @ a
        lam = float(w.sum())
        w = w / lam
        diff = float(np.abs(w - v).sum())
        v = w
        if diff < tol:
            residual = float(np.abs(v @ a - lam * v).sum())
            if residual <= 1e-10 * max(1.0, lam):
                v.flags.writeable = False
                return PerronPair(eigenvalue=lam, vector=v,
                                  residual=residual, iterations=it)
    raise NoConvergence(max_iter)


def lemma_partial_sums(matrix: NonNegativeMatrix, k: int, lam: float,
                       n_max: int = 500_000,
                       stop_increment: float = 1e-14) -> LemmaSeries:
    """Evaluate the first-return weight series at trial value ``lam``.

    Let B be the matrix with row and column ``k`` zeroed.  The term for
    return length n >= 2 is ``lam**-n * sum_{i,j != k} A[k,i] B**(n-2)[i,j]
    A[j,k]``, computed by iterating a row vector against B so the cost stays
    O(n_max * N^2) and no matrix power is formed.  The spectral radius of B
    lies strictly below the dominant eigenvalue, so at (or above) that value
    the terms decay geometrically; summation stops once N consecutive
    increments fall below ``stop_increment`` (zero terms can alternate with
    positive ones up to the longest base-avoiding cycle, never longer).

    Raises:
        Divergence: partial sums exceeded 1 + 1e-6, meaning ``lam`` is below
            the true eigenvalue.
    """
    if not lam > 0:
        raise ValueError("trial eigenvalue must be > 0")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    a = matrix.entries
    n = matrix.n
    if not 0 <= k < n:
        raise ValueError(f"base state {k} outside 0..{n - 1}")

    others = np.arange(n) != k
    b = a[np.ix_(others, others)]
    col = a[others, k]

    terms = [float(a[k, k]) / lam]
    partial = terms[0]
    if partial > 1.0 + DIVERGENCE_SLACK:
        raise Divergence(1, partial)

    # v carries row k of A restricted off-k, pre-divided by lam each step,
    # so term n+2 is simply v @ col after n multiplications by B / lam.
    v = a[k, others] / lam**2
    quiet = 0
    window = max(int(n), 2)
    for _ in range(1, n_max):
        term = float(v @ col)
        terms.append(term)
        partial += term
        if partial > 1.0 + DIVERGENCE_SLACK:
            raise Divergence(len(terms), partial)
        quiet = quiet + 1 if term < stop_increment else 0
        if quiet >= window:
            break
        v = (v @ b) / lam

    terms_arr = np.asarray(terms)
    positive = np.nonzero(terms_arr > 0.0)[0]
    if positive.size >= 2:
        tail_ratio = float(terms_arr[positive[-1]] / terms_arr[positive[-2]])
    else:
        tail_ratio = float("nan")
    partial_sums = np.cumsum(terms_arr)
    terms_arr.flags.writeable = False
    partial_sums.flags.writeable = False
    return LemmaSeries(terms=terms_arr, partial_sums=partial_sums,
                       tail_ratio=tail_ratio)


def quasispecies_residual(matrix: NonNegativeMatrix,
                          x: np.ndarray) -> EquilibriumResidual:
    """Residual of the mutation-selection balance equation at ``x``.

    For each state k this compares the loss rate ``x_k * mean_fitness``
    against the creation rate ``sum_i x_i f(i) M(i, k)``.  Both sides agree
    exactly when ``x`` is the dominant left eigenvector, in which case the
    mean fitness equals the dominant eigenvalue.

    Raises:
        NotOnSimplex: ``x`` has a negative entry or does not sum to 1.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (matrix.n,):
        raise NotOnSimplex(f"expected shape ({matrix.n},), got {x.shape}")
    if (x < 0).any():
        raise NotOnSimplex(f"negative entry at {int(np.argmax(x < 0))}")
    total = float(x.sum())
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise NotOnSimplex(f"entries sum to {total}")

    decomp = decompose(matrix)
    mean_fitness = float(x @ decomp.fitness)
    creation = (x * decomp.fitness) @ decomp.kernel
    per_state = np.abs(x * mean_fitness - creation)
    per_state.flags.writeable = False
    return EquilibriumResidual(per_state=per_state,
                               max_abs=float(per_state.max()),
                               mean_fitness=mean_fitness)
