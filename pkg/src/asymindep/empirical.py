"""Sampling and rank-based estimation of survival copulas and tail orders."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence

import numpy as np
from scipy import stats

from .core import IndexSubset
from .exceptions import FitError, ValidationError

MIN_TAIL_COUNT = 50
MIN_FIT_POINTS = 5
MAX_DESIGN_CONDITION = 1e10


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``n x d`` draws with the seed that produced them."""

    values: np.ndarray
    seed: Optional[int] = None
    scale: Literal["copula", "raw"] = "copula"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValidationError(f"samples must be a non-empty n x d array, got shape {v.shape}")
        if self.scale == "copula" and (np.any(v < 0) or np.any(v > 1)):
            raise ValidationError("copula-scale samples must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# seed={self.seed} scale={self.scale}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"u{j + 1}" for j in range(self.dim)])
        for row in self.values:
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SampleMatrix":
        lines = text.splitlines()
        seed = None
        if lines and lines[0].startswith("#"):
            for tok in lines[0][1:].split():
                if tok.startswith("seed="):
                    seed = None if tok[5:] == "None" else int(tok[5:])
            lines = lines[1:]
        rows = list(csv.reader(lines[1:]))
        return cls(np.array([[float(x) for x in r] for r in rows]), seed)


def sample_model(model, n: int, seed: int, threads: int = 1) -> SampleMatrix:
    if not getattr(model, "has_sampler", False):
        raise ValidationError(f"{type(model).__name__} has no sampler")
    try:
        values = model.sample(n, seed, threads=threads)
    except TypeError:
        values = model.sample(n, seed)
    return SampleMatrix(values, seed)


def sample_gaussian(sigma, n: int, seed: int, threads: int = 1) -> SampleMatrix:
    """``U_j = Phi(Z_j)`` with ``Z = L e``, ``L`` the Cholesky factor of ``sigma``."""
    from .gaussian import GaussianCopulaModel

    return SampleMatrix(GaussianCopulaModel(sigma).sample(n, seed, threads=threads), seed)


def sample_clayton(theta: float, d: int, n: int, seed: int, threads: int = 1) -> SampleMatrix:
    """Clayton copula by the gamma-frailty construction."""
    from .archimedean import sample_clayton_array

    return SampleMatrix(sample_clayton_array(theta, d, n, seed, threads), seed)


def pseudo_observations(values: np.ndarray) -> np.ndarray:
    """Column ranks divided by ``n``; ties share their average rank."""
    values = np.asarray(values, dtype=float)
    return stats.rankdata(values, method="average", axis=0) / values.shape[0]


def empirical_copula(samples: SampleMatrix, subset: IndexSubset, u: Sequence[float], ranks: bool = True):
    """``C_S(u)`` as the fraction of rows with ``U_j <= u_j`` for ``j`` in S.

    Returns ``(estimate, binomial standard error)``.
    """
    data = pseudo_observations(samples.values) if ranks else samples.values
    cols = data[:, subset.zero_based()]
    hit = np.all(cols <= np.asarray(u, dtype=float), axis=1)
    p = float(hit.mean())
    return p, math.sqrt(p * (1 - p) / samples.n)


@dataclass(frozen=True)
class DiagonalPoint:
    u: float
    value: float
    se: float


def empirical_survival_diagonal(
    samples: SampleMatrix,
    subset: IndexSubset,
    grid: Iterable[float],
    ranks: bool = True,
) -> list[DiagonalPoint]:
    """Fraction of rows whose S-coordinates all exceed ``1 - u``.

    Grid points with expected marginal count ``n u`` below 50 are dropped with
    a warning.
    """
    if samples.scale != "copula" and not ranks:
        raise ValidationError("raw-scale samples need the rank transform")
    if subset.dim != samples.dim:
        raise ValidationError(f"subset dimension {subset.dim} != sample dimension {samples.dim}")
    data = pseudo_observations(samples.values) if ranks else samples.values
    cols = data[:, subset.zero_based()]
    out = []
    for u in grid:
        u = float(u)
        if not 0 < u < 1:
            raise ValidationError(f"grid point {u} outside (0, 1)")
        if samples.n * u < MIN_TAIL_COUNT:
            warnings.warn(f"dropping u={u:g}: expected tail count {samples.n * u:.1f} < {MIN_TAIL_COUNT}", stacklevel=2)
            continue
        p = float(np.all(cols > 1 - u, axis=1).mean())
        out.append(DiagonalPoint(u, p, math.sqrt(p * (1 - p) / samples.n)))
    return out


@dataclass(frozen=True)
class TailFitResult:
    kappa_hat: float
    log_coeff_hat: float
    intercept: float
    residual_rms: float
    grid: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {
            "kappa_hat": self.kappa_hat,
            "log_coeff_hat": self.log_coeff_hat,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "grid": [list(p) for p in self.grid],
        }


def fit_tail_order(grid: Iterable, with_log_term: bool = False) -> TailFitResult:
    """Least squares for ``log C(u 1) = c + kappa log u [+ b log(-2 log u)]``.

    ``grid`` holds ``(u, value)`` pairs (or :class:`DiagonalPoint`). Raises
    :class:`FitError` for fewer than five points or a near-collinear design.
    """
    pairs = []
    for item in grid:
        u, v = (item.u, item.value) if isinstance(item, DiagonalPoint) else (item[0], item[1])
        pairs.append((float(u), float(v)))
    pairs.sort(key=lambda p: -p[0])
    if len(pairs) < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} grid points, got {len(pairs)}")
    us = np.array([p[0] for p in pairs])
    vals = np.array([p[1] for p in pairs])
    if np.any(np.diff(us) >= 0):
        raise FitError("grid u values must be distinct")
    if np.any(us <= 0) or np.any(us >= 1) or np.any(vals <= 0):
        raise FitError("fit needs u in (0, 1) and strictly positive values")
    lu = np.log(us)
    cols = [np.ones_like(lu), lu]
    if with_log_term:
        cols.append(np.log(-2 * lu))
    X = np.column_stack(cols)
    # condition of the column-normalized design; scale alone is not collinearity
    Xn = X / np.linalg.norm(X, axis=0)
    cond = np.linalg.cond(Xn)
    if not np.isfinite(cond) or cond > MAX_DESIGN_CONDITION:
        raise FitError(f"design matrix is ill-conditioned (cond={cond:.2e}); widen the grid")
    y = np.log(vals)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return TailFitResult(
        kappa_hat=float(coef[1]),
        log_coeff_hat=float(coef[2]) if with_log_term else 0.0,
        intercept=float(coef[0]),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        grid=tuple(pairs),
    )


def diagonal_csv(rows: Iterable) -> str:
    """CSV with header ``u,value,se``; missing values become empty cells."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["u", "value", "se"])
    for row in rows:
        if isinstance(row, DiagonalPoint):
            row = (row.u, row.value, row.se)
        u, value, se = (tuple(row) + (None, None))[:3]
        writer.writerow(["" if x is None else repr(float(x)) for x in (u, value, se)])
    return buf.getvalue()


def read_diagonal_csv(text: str) -> list[tuple[float, Optional[float], Optional[float]]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ["u", "value", "se"]:
        raise ValidationError(f"expected header u,value,se, got {reader.fieldnames}")
    conv = lambda s: float(s) if s != "" else None
    return [(float(r["u"]), conv(r["value"]), conv(r["se"])) for r in reader]
