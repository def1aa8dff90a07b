"""Gaussian copula: exact tail orders, the mutual-independence criterion and
numerical orthant probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import qmc

from ._rng import chunked_draw
from .core import CorrelationMatrix, IndexSubset, TailOrderResult, enumerate_subsets, validate_correlation
from .exceptions import PrecisionError, ValidationError
from .qp import QPSolution, solve_active_set
from .survival import CopulaModel, PrecisionRequest

POSITIVITY_TOL = 1e-10
MVN_MAX_DIM = 10
MVN_DEFAULT_ACCURACY = PrecisionRequest(target_relative_error=1e-3)


def example_matrix(rho: float) -> np.ndarray:
    """Three-dimensional family with correlations ``rho, sqrt(2) rho, sqrt(2) rho``."""
    s = np.sqrt(2.0) * rho
    return np.array([[1.0, rho, s], [rho, 1.0, s], [s, s, 1.0]])


def normal_upper_quantile(u):
    """``Phi^{-1}(1 - u)`` computed without forming ``1 - u``.

    ``ndtri`` on the small tail probability plus one Newton step on the log
    CDF keeps relative accuracy near machine precision down to u ~ 1e-300.
    """
    u = np.asarray(u, dtype=float)
    x = special.ndtri(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        logpdf = -0.5 * x * x - 0.5 * np.log(2 * np.pi)
        step = (special.log_ndtr(x) - np.log(u)) * np.exp(special.log_ndtr(x) - logpdf)
    x = np.where(np.isfinite(step), x - step, x)
    return -x


@dataclass(frozen=True)
class MVNResult:
    """Estimate of an upper orthant probability ``P(Z > a)``."""

    probability: float
    error: float
    converged: bool
    n_points: int
    log_probability: float

    def __iter__(self):
        yield self.probability
        yield self.error


def _as_corr(sigma) -> np.ndarray:
    if isinstance(sigma, CorrelationMatrix):
        return np.asarray(sigma.entries)
    return np.asarray(validate_correlation(sigma).entries)


def _sov_logweights(points: np.ndarray, a: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Separation-of-variables integrand in log form for ``P(L y > a)``."""
    n, m = points.shape[0], len(a)
    y = np.zeros((n, m))
    logp = np.zeros(n)
    for i in range(m):
        c = (a[i] - y[:, :i] @ L[i, :i]) / L[i, i]
        tail = special.log_ndtr(-c)
        logp += tail
        if i < m - 1:
            w = np.clip(points[:, i], 1e-300, 1.0)
            y[:, i] = -special.ndtri_exp(np.log(w) + tail)
    return logp


def mvn_rectangle(
    lower: Sequence[float],
    sigma,
    accuracy: PrecisionRequest = MVN_DEFAULT_ACCURACY,
    seed: int = 0,
    max_points: int = 1 << 20,
    randomizations: int = 8,
) -> MVNResult:
    """``P(Z_i > a_i for all i)`` for ``Z ~ N(0, sigma)``.

    Variables are sorted by lower bound (descending) and integrated by
    sequential conditioning on the Cholesky factor, with scrambled Sobol
    points. ``randomizations`` independent scramblings give the standard
    error. Sample sizes double until the relative error target is met or
    ``max_points`` is exhausted, in which case ``converged`` is False.
    Coordinates with ``a_i = -inf`` are marginalized out.
    """
    a = np.asarray(lower, dtype=float)
    corr = _as_corr(sigma)
    if a.ndim != 1 or a.shape[0] != corr.shape[0]:
        raise ValidationError(f"lower bound has shape {a.shape}, matrix is {corr.shape}")
    if corr.shape[0] > MVN_MAX_DIM:
        raise ValidationError(f"orthant integration limited to m <= {MVN_MAX_DIM}")
    if np.any(np.isnan(a)):
        raise ValidationError("lower bound contains NaN")
    if np.any(a == np.inf):
        return MVNResult(0.0, 0.0, True, 0, -np.inf)
    keep = np.flatnonzero(a > -np.inf)
    if keep.size == 0:
        return MVNResult(1.0, 0.0, True, 0, 0.0)
    a = a[keep]
    corr = corr[np.ix_(keep, keep)]
    order = np.argsort(-a, kind="stable")
    a = a[order]
    corr = corr[np.ix_(order, order)]
    m = a.size
    if m == 1:
        logp = float(special.log_ndtr(-a[0]))
        return MVNResult(float(np.exp(logp)), 0.0, True, 1, logp)
    L = np.linalg.cholesky(corr)
    seeds = np.random.SeedSequence(seed).spawn(randomizations)
    engines = [qmc.Sobol(d=m - 1, scramble=True, seed=np.random.default_rng(s)) for s in seeds]
    # per-randomization running sums kept as (shift, sum of exp(logp - shift))
    sums = np.zeros(randomizations)
    counts = 0
    shift: Optional[float] = None
    batch = 1 << 10
    target = accuracy.target_relative_error
    while True:
        logs = [_sov_logweights(eng.random(batch), a, L) for eng in engines]
        top = max(float(np.max(lw)) for lw in logs)
        if shift is None:
            shift = top
        elif top > shift:
            sums *= np.exp(shift - top)
            shift = top
        sums += np.array([np.sum(np.exp(lw - shift)) for lw in logs])
        counts += batch
        means = sums / counts
        mean = float(np.mean(means))
        err = float(np.std(means, ddof=1) / np.sqrt(randomizations))
        rel = err / mean if mean > 0 else np.inf
        total = counts * randomizations
        if rel <= target or total * 2 > max_points:
            logp = shift + np.log(mean) if mean > 0 else -np.inf
            scale = np.exp(shift)
            return MVNResult(float(mean * scale), float(err * scale), bool(rel <= target), total, float(logp))
        batch = counts  # doubles the Sobol sequence length per scrambling


class GaussianCopulaModel(CopulaModel):
    """Gaussian copula; survival evaluations go through :func:`mvn_rectangle`."""

    has_exact_survival = True
    has_sampler = True
    is_exchangeable = False
    supports_extended = False
    double_error = 1e-4

    def __init__(self, sigma, accuracy: PrecisionRequest = MVN_DEFAULT_ACCURACY, seed: int = 0):
        self.sigma = sigma if isinstance(sigma, CorrelationMatrix) else validate_correlation(sigma)
        self.factor = np.linalg.cholesky(self.sigma.entries)
        self.accuracy = accuracy
        self.seed = seed
        self.dim = self.sigma.dim

    def _sub(self, subset: IndexSubset) -> np.ndarray:
        idx = subset.zero_based()
        return self.sigma.entries[np.ix_(idx, idx)]

    def copula(self, subset, u, ctx):
        u = np.array([float(x) for x in u])
        if np.any(u <= 0):
            return 0.0
        # P(Z <= b) = P(-Z >= -b) and -Z has the same law
        lower = np.where(u >= 1.0, -np.inf, -special.ndtri(np.clip(u, 1e-300, 1.0)))
        return mvn_rectangle(lower, self._sub(subset), self.accuracy, self.seed).probability

    def survival(self, subset, u, prec=None):
        """Orthant probability at the looser of ``prec`` and the model accuracy.

        Raises :class:`PrecisionError` when quasi-Monte Carlo does not reach it.
        """
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0):
            return 0.0
        target = self.accuracy
        if prec is not None and prec.target_relative_error > target.target_relative_error:
            target = prec
        lower = np.where(u >= 1.0, -np.inf, normal_upper_quantile(np.clip(u, 1e-300, 1.0)))
        res = mvn_rectangle(lower, self._sub(subset), target, self.seed)
        if not res.converged:
            raise PrecisionError(
                f"orthant probability at u={float(np.min(u)):.3g} reached relative error "
                f"{res.error / res.probability if res.probability else np.inf:.1e} > {target.target_relative_error:g}"
            )
        return res.probability

    def sample(self, n, seed, threads: int = 1):
        factor = self.factor

        def draw(rng, size):
            z = rng.standard_normal((size, factor.shape[0])) @ factor.T
            return special.ndtr(z)

        return chunked_draw(n, seed, draw, threads)

    def tail_order(self, subset: IndexSubset) -> TailOrderResult:
        return gaussian_tail_order(self.sigma, subset)

    def describe(self):
        return {"family": "gaussian", "dim": self.dim, "rho": self.sigma.entries.tolist()}


def gaussian_survival_diagonal(
    model: GaussianCopulaModel,
    subset: IndexSubset,
    u: float,
    accuracy: PrecisionRequest = MVN_DEFAULT_ACCURACY,
    seed: int = 0,
) -> MVNResult:
    """``Csurv_S(u, ..., u)`` as an orthant probability with error estimate."""
    if not 0.0 < u < 0.5:
        raise ValidationError(f"diagonal argument must lie in (0, 0.5), got {u}")
    a = np.full(len(subset), float(normal_upper_quantile(u)))
    return mvn_rectangle(a, model._sub(subset), accuracy, seed)


def _inverse(block: np.ndarray) -> np.ndarray:
    factor = cho_factor(block)
    return cho_solve(factor, np.eye(block.shape[0]))


def gaussian_tail_order(sigma, subset: IndexSubset, *, return_qp: bool = False):
    """Tail order of ``Csurv_S`` on the diagonal via the quadratic program.

    ``log_exponent`` is the power of ``(-2 log u)`` in the asymptotic form,
    ``(kappa - |I|) / 2`` with ``I`` the active set.
    """
    corr = sigma if isinstance(sigma, CorrelationMatrix) else validate_correlation(sigma)
    if subset.dim != corr.dim:
        raise ValidationError(f"subset dimension {subset.dim} != matrix dimension {corr.dim}")
    idx = subset.zero_based()
    sol: QPSolution = solve_active_set(_inverse(corr.entries[np.ix_(idx, idx)]))
    active = sol.active_set_I.relabel(subset)
    result = TailOrderResult(
        subset=subset,
        kappa=sol.kappa,
        log_exponent=(sol.kappa - len(active)) / 2.0,
        method="exact-qp",
        active_set=active,
        degenerate=sol.degenerate,
    )
    return (result, sol) if return_qp else result


@dataclass
class GaussianTailReport:
    dim: int
    tail_orders: dict[IndexSubset, TailOrderResult]
    mutual: bool
    failing_subsets: list[IndexSubset]
    boundary_subsets: list[IndexSubset] = field(default_factory=list)
    row_sums: dict[IndexSubset, np.ndarray] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "mutual": self.mutual,
            "failing_subsets": [s.key for s in self.failing_subsets],
            "boundary_subsets": [s.key for s in self.boundary_subsets],
            "tail_orders": [r.to_dict() for r in self.tail_orders.values()],
        }


def inverse_row_sums(sigma, subset: IndexSubset) -> np.ndarray:
    """``Sigma_S^{-1} 1``."""
    corr = sigma if isinstance(sigma, CorrelationMatrix) else validate_correlation(sigma)
    idx = subset.zero_based()
    block = corr.entries[np.ix_(idx, idx)]
    return cho_solve(cho_factor(block), np.ones(len(idx)))


def gaussian_mutual_check(sigma, tol: float = POSITIVITY_TOL) -> GaussianTailReport:
    """Test ``Sigma_S^{-1} 1 > 0`` on every non-empty subset.

    Subsets whose smallest entry falls in ``(-tol, tol]`` are reported as
    boundary cases; they count as failing because the criterion is strict.
    """
    corr = sigma if isinstance(sigma, CorrelationMatrix) else validate_correlation(sigma)
    failing, boundary = [], []
    sums: dict[IndexSubset, np.ndarray] = {}
    orders: dict[IndexSubset, TailOrderResult] = {}
    for s in enumerate_subsets(corr.dim):
        v = inverse_row_sums(corr, s)
        sums[s] = v
        low = float(np.min(v))
        if low <= tol:
            failing.append(s)
            if low > -tol:
                boundary.append(s)
        if len(s) >= 2:
            orders[s] = gaussian_tail_order(corr, s)
    return GaussianTailReport(corr.dim, orders, not failing, failing, boundary, sums)


def gaussian_pairwise_check(sigma) -> bool:
    """Every pair satisfies ``Sigma_{jl}^{-1} 1 = (1 + rho_jl)^{-1} (1, 1) > 0``."""
    corr = sigma if isinstance(sigma, CorrelationMatrix) else validate_correlation(sigma)
    for s in enumerate_subsets(corr.dim, 2, 2):
        j, l = s.zero_based()
        rho = corr.entries[j, l]
        v = inverse_row_sums(corr, s)
        closed = np.full(2, 1.0 / (1.0 + rho))
        if not np.allclose(v, closed, rtol=1e-10, atol=1e-12):
            raise ArithmeticError(f"pair {s}: inverse row sums {v} disagree with closed form {closed}")
        if not np.all(v > 0):
            return False
    return True
