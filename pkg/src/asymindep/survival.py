"""Copula evaluation interface and the copula-to-survival-copula bridge.

The survival copula is recovered by inclusion-exclusion,

    Csurv_S(u) = 1 + sum_{T subset S, T nonempty} (-1)^|T| C_T(1 - u_T),

whose terms are O(1) while the result is O(u^k). Models that can evaluate
themselves on an ``mpmath`` context are summed at
``ceil(|S| * log10(1 / min u)) + 30`` significant digits and the sum is
re-evaluated with extra guard digits; disagreement beyond the requested
tolerance raises :class:`PrecisionError` instead of returning a value.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import mpmath
import numpy as np

from ._rng import chunked_draw
from .core import IndexSubset, TailOrderResult, enumerate_subsets
from .exceptions import PrecisionError, ValidationError

GUARD_DIGITS = 30
RECHECK_DIGITS = 20
DOUBLE_FLOOR = 1e-4


@dataclass(frozen=True)
class PrecisionRequest:
    target_relative_error: float = 1e-10
    working_digits: int = 0

    def __post_init__(self):
        if not 0 < self.target_relative_error < 1:
            raise ValidationError("target relative error must lie in (0, 1)")
        if self.working_digits < 0:
            raise ValidationError("working digits hint must be non-negative")


DEFAULT_PRECISION = PrecisionRequest()


class CopulaModel(ABC):
    """A d-dimensional copula evaluable on any marginal.

    Subclasses implement :meth:`copula` against an ``mpmath`` context
    (``mpmath.fp`` for doubles or an ``MPContext`` for extended precision).
    Models whose arithmetic is double only set ``supports_extended = False``
    and give an estimate of their own relative error in ``double_error``.
    """

    dim: int
    has_exact_survival: bool = False
    has_sampler: bool = False
    is_exchangeable: bool = False
    supports_extended: bool = True
    double_error: float = 1e-15

    @abstractmethod
    def copula(self, subset: IndexSubset, u: Sequence, ctx) -> Any:
        """``C_S(u_S)`` with ``len(u) == len(subset)``."""

    def survival(self, subset: IndexSubset, u: Sequence[float], prec: PrecisionRequest) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no exact survival evaluator")

    def sample(self, n: int, seed: int) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no sampler")

    def describe(self) -> dict:
        return {"family": type(self).__name__, "dim": self.dim}


def _check_point(subset: IndexSubset, u: Sequence[float], open_low: bool = False) -> list[float]:
    u = [float(x) for x in u]
    if len(u) != len(subset):
        raise ValidationError(f"point has {len(u)} coordinates, subset {subset} needs {len(subset)}")
    for x in u:
        if not (0.0 <= x <= 1.0) or (open_low and x == 0.0):
            raise ValidationError(f"coordinate {x} outside the unit interval")
    return u


def working_digits(k: int, u_min: float, prec: PrecisionRequest) -> int:
    if u_min <= 0:
        return GUARD_DIGITS + prec.working_digits
    return math.ceil(k * math.log10(1.0 / u_min)) + GUARD_DIGITS + prec.working_digits


def marginal_copula(model: CopulaModel, subset: IndexSubset, u: Sequence[float], digits: int | None = None) -> float:
    """Evaluate ``C_S(u_S)``; extended precision when ``digits`` is given."""
    u = _check_point(subset, u)
    if digits is None or not model.supports_extended:
        return float(model.copula(subset, u, mpmath.fp))
    ctx = mpmath.MPContext()
    ctx.dps = digits
    return float(model.copula(subset, [ctx.mpf(x) for x in u], ctx))


def _ie_terms(model: CopulaModel, subset: IndexSubset, u: list[float], ctx):
    """Yield ``(sign, C_T(1 - u_T))`` for every non-empty T within ``subset``."""
    pos = {m: i for i, m in enumerate(subset.members)}
    one = ctx.mpf(1)
    for t in enumerate_subsets(len(subset)):
        labels = t.relabel(subset)
        args = [one - ctx.mpf(u[pos[m]]) for m in labels.members]
        yield (-1) ** len(t), model.copula(labels, args, ctx)


def _binomial_terms(model: CopulaModel, subset: IndexSubset, u: float, ctx):
    """Exchangeable shortcut: ``(-1)^j binom(k, j) C_j((1 - u) 1_j)``."""
    k = len(subset)
    v = ctx.mpf(1) - ctx.mpf(u)
    for j in range(1, k + 1):
        labels = IndexSubset(subset.members[:j], subset.dim)
        yield (-1) ** j * math.comb(k, j), model.copula(labels, [v] * j, ctx)


def _sum_extended(make_terms, digits: int, prec: PrecisionRequest) -> float:
    values = []
    for dps in (digits, digits + RECHECK_DIGITS):
        ctx = mpmath.MPContext()
        ctx.dps = dps
        total = ctx.mpf(1)
        for sign, term in make_terms(ctx):
            total += sign * term
        values.append(total)
    lo, hi = values
    scale = abs(hi)
    if scale == 0:
        if abs(lo) > 10.0 ** (-digits):
            raise PrecisionError("inclusion-exclusion sum not resolved at working precision")
        return 0.0
    if abs(lo - hi) > prec.target_relative_error * scale:
        raise PrecisionError(
            f"inclusion-exclusion unstable: relative change {float(abs(lo - hi) / scale):.2e} between "
            f"{digits} and {digits + RECHECK_DIGITS} digits"
        )
    if hi < 0:
        raise PrecisionError(f"inclusion-exclusion produced a negative probability {float(hi):.3e}")
    return float(hi)


def _sum_double(model: CopulaModel, make_terms, u_min: float, prec: PrecisionRequest) -> float:
    if u_min < DOUBLE_FLOOR:
        raise PrecisionError(
            f"{type(model).__name__} is double precision only; diagonal restricted to u >= {DOUBLE_FLOOR}"
        )
    total = 1.0
    magnitude = 1.0
    for sign, term in make_terms(mpmath.fp):
        total += sign * float(term)
        magnitude += abs(sign * float(term))
    error = magnitude * max(model.double_error, np.finfo(float).eps)
    if total <= 0 or error > prec.target_relative_error * abs(total):
        raise PrecisionError(
            f"double-precision inclusion-exclusion error {error:.1e} exceeds tolerance for value {total:.3e}"
        )
    return total


def survival_inclusion_exclusion(
    model: CopulaModel,
    subset: IndexSubset,
    u: Sequence[float],
    prec: PrecisionRequest = DEFAULT_PRECISION,
) -> float:
    """``Csurv_S(u_S)`` from marginal copulas by inclusion-exclusion."""
    u = _check_point(subset, u)
    if min(u) == 0.0:
        return 0.0
    u_min = min(u)
    if not model.supports_extended:
        return _sum_double(model, lambda ctx: _ie_terms(model, subset, u, ctx), u_min, prec)
    digits = working_digits(len(subset), u_min, prec)
    return _sum_extended(lambda ctx: _ie_terms(model, subset, u, ctx), digits, prec)


def diagonal_section(
    model: CopulaModel,
    subset: IndexSubset,
    u: float,
    prec: PrecisionRequest = DEFAULT_PRECISION,
) -> float:
    """``Csurv_S(u, ..., u)`` using the cheapest exact route the model offers."""
    u = float(u)
    if not 0.0 < u < 1.0:
        raise ValidationError(f"diagonal argument must lie in (0, 1), got {u}")
    if len(subset) == 1:
        return u
    if model.has_exact_survival:
        return float(model.survival(subset, [u] * len(subset), prec))
    if model.is_exchangeable:
        if not model.supports_extended:
            return _sum_double(model, lambda ctx: _binomial_terms(model, subset, u, ctx), u, prec)
        digits = working_digits(len(subset), u, prec)
        return _sum_extended(lambda ctx: _binomial_terms(model, subset, u, ctx), digits, prec)
    return survival_inclusion_exclusion(model, subset, [u] * len(subset), prec)


class IndependenceCopula(CopulaModel):
    has_exact_survival = True
    has_sampler = True
    is_exchangeable = True

    def __init__(self, dim: int):
        if dim < 1:
            raise ValidationError("dimension must be >= 1")
        self.dim = dim

    def copula(self, subset, u, ctx):
        out = ctx.mpf(1)
        for x in u:
            out *= x
        return out

    def survival(self, subset, u, prec=DEFAULT_PRECISION):
        u = _check_point(subset, u)
        return math.prod(u)

    def sample(self, n, seed, threads: int = 1):
        return chunked_draw(n, seed, lambda rng, size: rng.random((size, self.dim)), threads)

    def tail_order(self, subset: IndexSubset) -> TailOrderResult:
        return TailOrderResult(subset, float(len(subset)), method="exact-exponent")

    def describe(self):
        return {"family": "independence", "dim": self.dim}


class ComonotoneCopula(CopulaModel):
    """Upper Frechet bound ``min(u)``; its survival copula is again ``min(u)``."""

    has_exact_survival = True
    has_sampler = True
    is_exchangeable = True

    def __init__(self, dim: int):
        self.dim = dim

    def copula(self, subset, u, ctx):
        return min(u)

    def survival(self, subset, u, prec=DEFAULT_PRECISION):
        return min(_check_point(subset, u))

    def sample(self, n, seed, threads: int = 1):
        col = np.random.default_rng(seed).random((n, 1))
        return np.repeat(col, self.dim, axis=1)

    def tail_order(self, subset: IndexSubset) -> TailOrderResult:
        return TailOrderResult(subset, 1.0, method="exact-exponent")

    def describe(self):
        return {"family": "comonotone", "dim": self.dim}


def frechet_bounds(u: Sequence[float]) -> tuple[float, float]:
    return max(0.0, sum(u) - (len(u) - 1)), min(u)
