"""Generalized Marshall-Olkin copula.

A shock hitting subset ``J`` arrives at rate ``lambda_J``. Writing
``Delta_j = sum_{J containing j} lambda_J`` and ``eta_j^J = lambda_J / Delta_j``,
the survival copula is the product over shocks of ``min_{j in J} u_j^{eta_j^J}``.
On a diagonal every factor is a power of ``u``, so ``Csurv_S(u 1) = u^{ex(S)}``
exactly, and all tail questions reduce to exponent arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._rng import chunked_draw
from .core import (
    MAX_ENUM_DIM,
    ClassificationReport,
    Evidence,
    IndexSubset,
    RateParameterSet,
    TailOrderResult,
    assemble_report,
    enumerate_subsets,
    validate_rates,
)
from .exceptions import ValidationError
from .survival import CopulaModel, DEFAULT_PRECISION, PrecisionRequest

Number = Fraction | float


def _members(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


class MOModel(CopulaModel):
    """Marshall-Olkin copula from a validated :class:`RateParameterSet`.

    Exponents are exact :class:`~fractions.Fraction` values when every rate is
    an ``int`` or ``Fraction``; otherwise floats.
    """

    has_exact_survival = True
    has_sampler = True
    is_exchangeable = False
    supports_extended = True

    def __init__(self, rates: RateParameterSet):
        self.rates = rates
        self.dim = rates.dim
        self.exact = rates.is_rational
        conv = Fraction if self.exact else float
        # shocks with zero rate never fire; drop them everywhere
        self._shocks = [(mask, conv(r)) for mask, r in rates.by_mask().items() if r > 0]
        delta = [conv(0)] * self.dim
        for mask, r in self._shocks:
            for j in _members(mask):
                delta[j] += r
        if any(dj <= 0 for dj in delta):
            bad = [j + 1 for j, dj in enumerate(delta) if dj <= 0]
            raise ValidationError(f"components {bad} are hit by no shock (Delta_j = 0)")
        self.delta = delta
        self.eta = {
            (j + 1, IndexSubset.from_mask(mask, self.dim)): r / delta[j]
            for mask, r in self._shocks
            for j in _members(mask)
        }

    @property
    def strict(self) -> bool:
        return self.rates.strict

    def _eta(self, j: int, rate: Number) -> Number:
        return rate / self.delta[j]

    def log_survival(self, u: Sequence[float]) -> float:
        logs = [math.log(x) if x > 0 else -math.inf for x in u]
        total = 0.0
        for mask, r in self._shocks:
            total += min(float(self._eta(j, r)) * logs[j] for j in _members(mask))
        return total

    def copula(self, subset, u, ctx):
        """``C_S`` from the survival copula by inclusion-exclusion in ``ctx``."""
        pos = {m - 1: i for i, m in enumerate(subset.members)}
        one = ctx.mpf(1)
        total = one
        for t in enumerate_subsets(len(subset)):
            labels = t.relabel(subset)
            point = {m - 1: one - u[pos[m - 1]] for m in labels.members}
            total += (-1) ** len(t) * self._survival_ctx(point, ctx)
        return total

    def _survival_ctx(self, point: dict[int, object], ctx):
        """``Csurv`` at coordinates ``point`` (0-based), others at 1."""
        if any(v == 0 for v in point.values()):
            return ctx.mpf(0)
        logs = {j: ctx.log(v) for j, v in point.items()}
        expo = ctx.mpf(0)
        for mask, r in self._shocks:
            hit = [j for j in _members(mask) if j in logs]
            if hit:
                expo += min(self._to_ctx(self._eta(j, r), ctx) * logs[j] for j in hit)
        return ctx.exp(expo)

    @staticmethod
    def _to_ctx(x: Number, ctx):
        if isinstance(x, Fraction):
            return ctx.mpf(x.numerator) / x.denominator
        return ctx.mpf(x)

    def survival(self, subset, u, prec: PrecisionRequest = DEFAULT_PRECISION):
        full = [1.0] * self.dim
        for m, x in zip(subset.members, u):
            full[m - 1] = float(x)
        return mo_survival(self, full)

    def sample(self, n, seed, threads: int = 1):
        return mo_sample(self, n, seed, threads)

    def tail_order(self, subset: IndexSubset) -> TailOrderResult:
        return TailOrderResult(subset, float(mo_diagonal_exponent(self, subset)), method="exact-exponent")

    def describe(self):
        return {"family": "marshall-olkin", **self.rates.to_dict(), "strict": self.strict}


def mo_equal(d: int) -> MOModel:
    """All shocks share one rate."""
    return MOModel(validate_rates({s: 1 for s in enumerate_subsets(d)}, d))


def mo_proportional(d: int) -> MOModel:
    """Shock rate proportional to the size of the subset it hits."""
    return MOModel(validate_rates({s: len(s) for s in enumerate_subsets(d)}, d))


def mo_survival(model: MOModel, u: Sequence[float]) -> float:
    """``Csurv(u)`` evaluated as ``exp(sum_J min_{j in J} eta_j^J log u_j)``.

    Each factor ``min_j u_j^{eta_j}`` is the smallest power, i.e. the most
    negative ``eta_j log u_j``.
    """
    u = [float(x) for x in u]
    if len(u) != model.dim:
        raise ValidationError(f"point needs {model.dim} coordinates, got {len(u)}")
    if any(not 0.0 <= x <= 1.0 for x in u):
        raise ValidationError("coordinates must lie in [0, 1]")
    if any(x == 0.0 for x in u):
        return 0.0
    return math.exp(model.log_survival(u))


def mo_diagonal_exponent(model: MOModel, subset: IndexSubset) -> Number:
    """``ex(S) = sum over shocks J meeting S of max_{j in J and S} eta_j^J``.

    The max is taken as ``lambda_J / min Delta_j`` over the intersection.
    """
    smask = subset.mask
    total = Fraction(0) if model.exact else 0.0
    for mask, r in model._shocks:
        hit = mask & smask
        if hit:
            total += r / min(model.delta[j] for j in _members(hit))
    return total


def mo_pairwise_exponent(model: MOModel, j: int, l: int) -> Number:
    """Pair exponent summed shock by shock in three groups.

    Shocks containing ``j`` only, ``l`` only, and both. Independent of
    :func:`mo_diagonal_exponent`, which it must match.
    """
    if j == l:
        raise ValidationError("pair indices must differ")
    a, b = j - 1, l - 1
    only_j = only_l = both = Fraction(0) if model.exact else 0.0
    for mask, r in model._shocks:
        has_j, has_l = bool(mask >> a & 1), bool(mask >> b & 1)
        if has_j and not has_l:
            only_j += model._eta(a, r)
        elif has_l and not has_j:
            only_l += model._eta(b, r)
        elif has_j and has_l:
            both += max(model._eta(a, r), model._eta(b, r))
    eta_star = only_j + only_l + both
    if model.strict and not eta_star > 1:
        raise ArithmeticError(f"pair ({j}, {l}) exponent {eta_star} not above 1 despite positive rates")
    return eta_star


def mo_classify(model: MOModel) -> ClassificationReport:
    """Ratio verdicts from exponent gaps ``ex(S) - ex(S minus l)``.

    Ratios are exact powers ``u^gap``: positive gap means the ratio vanishes,
    zero gap means it is identically one. With every rate positive each gap is
    at least ``eta_l^{l}``, which is checked and recorded.
    """
    d = model.dim
    if d > MAX_ENUM_DIM:
        raise ValidationError(f"classification limited to d <= {MAX_ENUM_DIM}")
    evidence = []
    for s in enumerate_subsets(d, 2, d):
        ex_s = mo_diagonal_exponent(model, s)
        for l in s.members:
            rest = s.without(l)
            ex_r = mo_diagonal_exponent(model, rest)
            gap = ex_s - ex_r
            floor = model.eta.get((l, IndexSubset((l,), d)), 0)
            note = f"gap={gap} floor={floor}"
            if model.strict and gap < floor - (0 if model.exact else 1e-12):
                raise ArithmeticError(f"gap {gap} below eta_{l}^{{{l}}} = {floor} for {s}")
            verdict = "tends-to-zero" if gap > (0 if model.exact else 1e-12) else "positive-limit"
            evidence.append(
                Evidence(
                    s,
                    l,
                    verdict,
                    numerator=TailOrderResult(s, float(ex_s), method="exact-exponent"),
                    denominator=TailOrderResult(rest, float(ex_r), method="exact-exponent"),
                    note=note,
                )
            )
    return assemble_report(d, evidence)


def mo_sample(model: MOModel, n: int, seed: int, threads: int = 1) -> np.ndarray:
    """Exponential shock simulation mapped to the unit cube.

    ``X_j = min_{J containing j} E_J`` has an exponential(``Delta_j``) margin;
    returning ``U_j = 1 - exp(-Delta_j X_j)`` makes the survival copula of
    ``U`` equal to the Marshall-Olkin survival copula.
    """
    shocks = [(np.array(_members(mask)), float(r)) for mask, r in model._shocks]
    delta = np.array([float(x) for x in model.delta])
    d = model.dim

    def draw(rng, size):
        x = np.full((size, d), np.inf)
        for members, rate in shocks:
            e = rng.exponential(1.0 / rate, size)
            x[:, members] = np.minimum(x[:, members], e[:, None])
        return -np.expm1(-delta * x)

    return chunked_draw(n, seed, draw, threads)
