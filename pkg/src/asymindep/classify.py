"""Pairwise, k-wise and mutual asymptotic independence for any model.

Two strategies decide whether ``C_S(u 1) / C_{S minus l}(u 1)`` vanishes as
``u`` tends to 0:

``analytic``
    compare exact tail orders (and, for Gaussian models, the exponent of the
    ``(-2 log u)`` factor and the active set);
``numeric``
    tabulate the ratio on a decreasing geometric grid and apply explicit
    decision rules, returning "inconclusive" when the grid cannot decide.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from ._rng import chunked_draw
from .archimedean import ArchimedeanModel, acig_tail_orders, arch_mutual_condition
from .core import (
    MAX_ENUM_DIM,
    ClassificationReport,
    Evidence,
    IndexSubset,
    TailOrderResult,
    Verdict,
    assemble_report,
    enumerate_subsets,
)
from .exceptions import NumericError, ValidationError
from .survival import DEFAULT_PRECISION, CopulaModel, PrecisionRequest, _check_point, diagonal_section

KAPPA_TOL = 1e-9
DECAY_THRESHOLD = 1e-3
STABLE_TOL = 0.10
WINDOW = 4
RATIO_SLACK = 1e-9
DEFAULT_U_MAX = 1e-1
DEFAULT_U_MIN = 1e-8

Strategy = Literal["analytic", "numeric"]


@dataclass(frozen=True)
class RatioTrace:
    subset: IndexSubset
    removed: int
    points: tuple[tuple[float, float], ...]
    verdict: Verdict
    note: str = ""

    def to_evidence(self) -> Evidence:
        return Evidence(self.subset, self.removed, self.verdict, trace=list(self.points), note=self.note)


def decide_ratio(ratios: Sequence[float]) -> Verdict:
    """Decision rule on the deep end of a ratio sequence.

    Tends to zero when the last ratio is below ``1e-3`` and the last four
    decrease strictly; positive limit when the last four are positive and
    within 10% of each other; otherwise inconclusive.
    """
    if len(ratios) < WINDOW:
        return "inconclusive"
    tail = [float(r) for r in ratios[-WINDOW:]]
    if tail[-1] < DECAY_THRESHOLD and all(b < a for a, b in zip(tail, tail[1:])):
        return "tends-to-zero"
    if tail[-1] == 0 and all(r == 0 for r in tail):
        return "tends-to-zero"
    lo, hi = min(tail), max(tail)
    if lo > 0 and hi <= (1 + STABLE_TOL) * lo:
        return "positive-limit"
    return "inconclusive"


def geometric_grid(u_max: float = DEFAULT_U_MAX, u_min: float = DEFAULT_U_MIN, points: Optional[int] = None):
    """Decreasing grid from ``u_max`` to ``u_min``; one point per decade by default."""
    if not 0 < u_min < u_max < 1:
        raise ValidationError(f"need 0 < u_min < u_max < 1, got {u_min}, {u_max}")
    if points is None:
        points = max(WINDOW, int(round(math.log10(u_max / u_min))) + 1)
    if points < 2:
        raise ValidationError("grid needs at least two points")
    return [float(x) for x in np.geomspace(u_max, u_min, points)]


def _ratio_slack(model: CopulaModel) -> float:
    accuracy = getattr(model, "accuracy", None)
    extra = 4 * accuracy.target_relative_error if isinstance(accuracy, PrecisionRequest) else 0.0
    return RATIO_SLACK + extra


def ratio_trace(
    model: CopulaModel,
    subset: IndexSubset,
    removed: int,
    grid: Sequence[float],
    prec: PrecisionRequest = DEFAULT_PRECISION,
    cache: Optional[dict] = None,
) -> RatioTrace:
    """Tabulate ``C_S(u 1) / C_{S minus l}(u 1)`` until precision runs out.

    A precision failure truncates the grid at that point. A zero denominator
    gives ratio 0 (the 0/0 := 0 convention; the numerator event is a sub-event).
    """
    rest = subset.without(removed)
    if rest is None:
        raise ValidationError("ratio needs |S| >= 2")
    cache = {} if cache is None else cache
    points, note = [], ""
    slack = _ratio_slack(model)
    for u in grid:
        try:
            num = _cached(model, subset, u, prec, cache)
            den = _cached(model, rest, u, prec, cache)
        except NumericError as exc:
            note = f"grid truncated at u={u:g}: {exc}"
            break
        ratio = 0.0 if den == 0 else num / den
        if ratio > 1 + slack:
            raise NumericError(f"ratio {ratio} exceeds 1 for {subset} minus {removed} at u={u:g}")
        points.append((float(u), float(ratio)))
    verdict = decide_ratio([r for _, r in points])
    return RatioTrace(subset, removed, tuple(points), verdict, note)


def _cached(model, subset, u, prec, cache):
    key = (subset.key, u)
    if key not in cache:
        try:
            cache[key] = diagonal_section(model, subset, u, prec)
        except NumericError as exc:
            cache[key] = exc
    value = cache[key]
    if isinstance(value, Exception):
        raise value
    return value


def analytic_verdict(num: TailOrderResult, den: TailOrderResult) -> tuple[Verdict, str]:
    """Compare ``u^k (-2 log u)^b`` asymptotics of numerator and denominator."""
    gap = num.kappa - den.kappa
    tol = KAPPA_TOL * max(1.0, abs(num.kappa))
    if gap > tol:
        return "tends-to-zero", f"kappa gap {gap:.6g}"
    if gap < -tol:
        return "inconclusive", f"kappa decreased by {-gap:.3g}; tail orders inconsistent"
    log_gap = num.log_exponent - den.log_exponent
    if abs(log_gap) <= tol:
        if num.active_set is None or den.active_set is None or num.active_set.members == den.active_set.members:
            return "positive-limit", "equal tail order and log factor"
        return "inconclusive", "equal tail order with different active sets"
    if log_gap < 0:
        return "tends-to-zero", f"equal tail order, log exponent gap {log_gap:.6g}"
    return "inconclusive", f"equal tail order, log exponent increased by {log_gap:.3g}"


def _analytic_from_orders(model, d: int, max_k: int) -> list[Evidence]:
    orders = {s: model.tail_order(s) for s in enumerate_subsets(d, 1, max_k)}
    evidence = []
    for s in enumerate_subsets(d, 2, max_k):
        for l in s.members:
            rest = s.without(l)
            verdict, note = analytic_verdict(orders[s], orders[rest])
            evidence.append(Evidence(s, l, verdict, numerator=orders[s], denominator=orders[rest], note=note))
    return evidence


def _analytic_archimedean(model: ArchimedeanModel, max_k: int) -> list[Evidence]:
    gen, d = model.generator, model.dim
    if gen.family == "acig":
        report = acig_tail_orders(gen.param, d).report
        return [e for e in report.evidence if len(e.subset) <= max_k]
    cond = arch_mutual_condition(gen, d)
    evidence = []
    for s in enumerate_subsets(d, 2, max_k):
        for l in s.members:
            rest = s.without(l)
            if cond.verdict == "mutual":
                verdict, kn, kd = "tends-to-zero", len(s), len(rest)
            elif cond.verdict == "pairwise-only":
                verdict = "tends-to-zero" if len(s) == 2 else "positive-limit"
                kn, kd = 1, 1
            elif cond.verdict == "tail-dependent":
                verdict, kn, kd = "positive-limit", 1, 1
            else:
                evidence.append(Evidence(s, l, "inconclusive", note="generator analysis inconclusive"))
                continue
            evidence.append(
                Evidence(
                    s,
                    l,
                    verdict,
                    numerator=TailOrderResult(s, float(kn), method="generator-analysis"),
                    denominator=TailOrderResult(rest, float(kd), method="generator-analysis"),
                    note=f"generator verdict {cond.verdict}",
                )
            )
    return evidence


def classify_model(
    model: CopulaModel,
    max_k: Optional[int] = None,
    strategy: Strategy = "analytic",
    u_min: float = DEFAULT_U_MIN,
    u_max: float = DEFAULT_U_MAX,
    points: Optional[int] = None,
    prec: PrecisionRequest = DEFAULT_PRECISION,
    threads: int = 1,
) -> ClassificationReport:
    """k-wise ladder for ``model`` up to ``max_k`` (default: the dimension)."""
    d = model.dim
    max_k = d if max_k is None else int(max_k)
    if not 2 <= max_k <= d:
        raise ValidationError(f"max_k must lie in 2..{d}, got {max_k}")
    if d > MAX_ENUM_DIM:
        raise ValidationError(f"classification limited to d <= {MAX_ENUM_DIM}")
    if strategy == "analytic":
        if isinstance(model, ArchimedeanModel):
            evidence = _analytic_archimedean(model, max_k)
        elif hasattr(model, "tail_order"):
            evidence = _analytic_from_orders(model, d, max_k)
        else:
            raise ValidationError(f"{type(model).__name__} has no exact tail orders; use the numeric strategy")
    elif strategy == "numeric":
        grid = geometric_grid(u_max, u_min, points)
        cache: dict = {}
        if threads > 1:
            # fill the cache in parallel, then read traces from it serially
            subsets = list(enumerate_subsets(d, 1, max_k))
            jobs = [(s, u) for s in subsets for u in grid]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(lambda job: _fill(model, job[0], job[1], prec, cache), jobs))
        evidence = [
            ratio_trace(model, s, l, grid, prec, cache).to_evidence()
            for s in enumerate_subsets(d, 2, max_k)
            for l in s.members
        ]
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    return assemble_report(d, evidence, max_k)


def _fill(model, subset, u, prec, cache):
    try:
        _cached(model, subset, u, prec, cache)
    except NumericError:
        pass


def _w_of_u(u, ctx=None):
    """Tail level ``P(U > z)`` of the base uniforms when ``1 - F(z) = u``.

    ``1 - F(z) = w (2 + w) / 3`` with ``w = 1 - z``, so
    ``w = sqrt(1 + 3u) - 1 = 3u / (sqrt(1 + 3u) + 1)`` (the second form keeps
    relative accuracy for small ``u``).
    """
    if ctx is None:
        return 3 * u / (math.sqrt(1 + 3 * u) + 1)
    return 3 * u / (ctx.sqrt(1 + 3 * u) + 1)


class CounterexampleCopula(CopulaModel):
    """Three-dimensional mixture that is pairwise but not mutually independent.

    With ``U, V`` iid uniform and ``M = min(U, V)``, the vector is
    ``(U, V, M)``, ``(U, M, V)`` or ``(M, U, V)`` with probability 1/3 each,
    mapped to uniform margins by ``F(z) = (4z - z^2) / 3``. Every pair and the
    triple share the diagonal ``w(u)^2`` with ``w(u) = sqrt(1 + 3u) - 1``,
    which behaves like ``9u^2/4``.
    """

    has_exact_survival = True
    has_sampler = True
    is_exchangeable = True
    dim = 3

    @staticmethod
    def marginal_cdf(z):
        z = np.asarray(z, dtype=float)
        return (4 * z - z * z) / 3

    @staticmethod
    def diagonal(u: float) -> float:
        return _w_of_u(float(u)) ** 2

    @staticmethod
    def _survival_w(w: Sequence, mn=min):
        w1, w2, w3 = w
        return (mn(w1, w3) * mn(w2, w3) + mn(w1, w2) * mn(w3, w2) + mn(w2, w1) * mn(w3, w1)) / 3

    def survival(self, subset, u, prec: PrecisionRequest = DEFAULT_PRECISION):
        u = _check_point(subset, u)
        full = [1.0, 1.0, 1.0]
        for m, x in zip(subset.members, u):
            full[m - 1] = x
        return float(self._survival_w([_w_of_u(x) for x in full]))

    def copula(self, subset, u, ctx):
        if any(x == 0 for x in u):
            return ctx.mpf(0)
        # inclusion-exclusion from the survival function, exact in ctx
        pos = {m - 1: i for i, m in enumerate(subset.members)}
        one = ctx.mpf(1)
        total = one
        for t in enumerate_subsets(len(subset)):
            labels = t.relabel(subset)
            w = [one, one, one]
            for m in labels.members:
                w[m - 1] = _w_of_u(one - u[pos[m - 1]], ctx)
            total += (-1) ** len(t) * self._survival_w(w)
        return total

    def sample(self, n, seed, threads: int = 1):
        def draw(rng, size):
            uv = rng.random((size, 2))
            a, b = uv[:, 0], uv[:, 1]
            m = np.minimum(a, b)
            case = rng.integers(0, 3, size)
            z = np.where(
                case[:, None] == 0,
                np.column_stack([a, b, m]),
                np.where(case[:, None] == 1, np.column_stack([a, m, b]), np.column_stack([m, a, b])),
            )
            return self.marginal_cdf(z)

        return chunked_draw(n, seed, draw, threads)

    def tail_order(self, subset: IndexSubset) -> TailOrderResult:
        return TailOrderResult(subset, 1.0 if len(subset) == 1 else 2.0, method="exact-exponent")

    def describe(self):
        return {"family": "counterexample", "dim": 3}


def counterexample_model() -> CounterexampleCopula:
    return CounterexampleCopula()
