"""Exception hierarchy shared by all perronmc modules.

Every error raised by the library derives from :class:`PerronMCError`, so
callers (and the CLI) can distinguish three broad families:

* input problems (bad matrices, bad files, violated preconditions),
* structural problems (the matrix is not primitive),
* statistical / numerical guards that refuse to report a result.
"""

from __future__ import annotations


class PerronMCError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------------------
# Matrix validation


class NotSquare(PerronMCError):
    """Input is ragged, rectangular, or not two-dimensional."""


class NegativeEntry(PerronMCError):
    def __init__(self, row: int, col: int, value: float):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"entry ({row}, {col}) is negative: {value}")


class NonFiniteEntry(PerronMCError):
    def __init__(self, row: int, col: int, value: float):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"entry ({row}, {col}) is not finite: {value}")


class ZeroRow(PerronMCError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row} sums to zero; every row needs a positive entry")


class NonPositiveScale(PerronMCError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"scale factor must be > 0, got {value}")


class NotPrimitive(PerronMCError):
    def __init__(self, n: int, bound: int):
        self.n = n
        self.bound = bound
        super().__init__(
            f"no power up to the bound (N-1)^2+1 = {bound} is entrywise positive; "
            f"the {n}x{n} matrix is reducible or periodic"
        )


# ---------------------------------------------------------------------------
# Sampling


class AllTruncated(PerronMCError):
    def __init__(self, attempts: int, cap: int):
        self.attempts = attempts
        self.cap = cap
        super().__init__(
            f"all {attempts} excursion attempts hit the length cap {cap}; "
            "the cap is far too small or the chain is nearly reducible"
        )


# ---------------------------------------------------------------------------
# Estimation guards


class EmptyBatch(PerronMCError):
    def __init__(self) -> None:
        super().__init__("batch contains no non-truncated excursions")


class BracketFailure(PerronMCError):
    def __init__(self, g_lo: float, g_hi: float, lo: float, hi: float):
        self.g_lo = g_lo
        self.g_hi = g_hi
        self.lo = lo
        self.hi = hi
        super().__init__(
            f"mean return weight does not bracket 1 on [{lo}, {hi}]: "
            f"g(lo)={g_lo}, g(hi)={g_hi}; more samples needed"
        )


class TruncationBiasGuard(PerronMCError):
    def __init__(self, truncated: int, attempted: int, limit: float):
        self.truncated = truncated
        self.attempted = attempted
        self.limit = limit
        super().__init__(
            f"{truncated}/{attempted} excursions truncated, above the "
            f"{limit:.2%} bias guard; raise the cap or check the matrix"
        )


# ---------------------------------------------------------------------------
# Deterministic oracles


class NoConvergence(PerronMCError):
    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(
            f"power iteration did not converge within {iterations} iterations; "
            "the spectrum is nearly degenerate"
        )


class Divergence(PerronMCError):
    def __init__(self, term_index: int, partial_sum: float):
        self.term_index = term_index
        self.partial_sum = partial_sum
        super().__init__(
            f"partial sums exceeded 1 + 1e-6 at term {term_index} "
            f"(sum={partial_sum}); the trial eigenvalue is below the true one"
        )


class NotOnSimplex(PerronMCError):
    def __init__(self, detail: str):
        super().__init__(f"vector is not on the unit simplex: {detail}")


# ---------------------------------------------------------------------------
# Branching simulation


class PopulationOverflow(PerronMCError):
    def __init__(self, generation: int, ceiling: int):
        self.generation = generation
        self.ceiling = ceiling
        super().__init__(
            f"population exceeded the ceiling {ceiling} at generation {generation}"
        )


class NoSurvivors(PerronMCError):
    def __init__(self, trials: int, horizon: int):
        self.trials = trials
        self.horizon = horizon
        super().__init__(
            f"no tree out of {trials} survived to generation {horizon}; "
            "increase trials or lower the horizon"
        )


class Subcritical(PerronMCError):
    def __init__(self, eigenvalue: float):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"dominant eigenvalue {eigenvalue} is <= 1; conditioned type "
            "proportions require a supercritical mean matrix"
        )


# ---------------------------------------------------------------------------
# CLI


class ParseError(PerronMCError):
    def __init__(self, path: str, detail: str):
        self.path = path
        self.detail = detail
        super().__init__(f"{path}: {detail}")
