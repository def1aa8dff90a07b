"""Minimize ``z' Q z`` subject to ``z >= 1`` for positive-definite ``Q``.

The minimizer ``e`` is unique. It sits on the bound for an active set ``I``
and is pinned elsewhere (``J``) by ``(Q e)_J = 0``, so that
``e_J = -Q_JJ^{-1} Q_JI 1_I``. The multipliers ``h_i = (Q e)_i`` are strictly
positive on ``I`` and the optimum equals ``sum(h)``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import IndexSubset
from .exceptions import NumericError

FEAS_TOL = 1e-10
BRUTEFORCE_MAX_DIM = 12


@dataclass(frozen=True)
class Candidate:
    """Restricted solution for a fixed active set."""

    active: tuple[int, ...]
    e: np.ndarray
    h: np.ndarray
    value: float
    feasible: bool
    degenerate: bool


@dataclass(frozen=True, eq=False)
class QPSolution:
    kappa: float
    minimizer_e: np.ndarray
    active_set_I: IndexSubset
    inactive_set_J: tuple[int, ...]
    weights_h: dict[int, float]
    degenerate: bool = False
    iterations: int = 0
    used_bruteforce: bool = False

    def kkt_residuals(self, Q: np.ndarray) -> dict[str, float]:
        """Independent certificate: primal feasibility, dual sign, complementarity."""
        e = self.minimizer_e
        g = np.asarray(Q) @ e
        active = self.active_set_I.zero_based()
        inactive = np.asarray(self.inactive_set_J, dtype=int) - 1
        return {
            "primal": float(np.max(np.maximum(1.0 - e, 0.0))),
            "dual": float(np.max(np.maximum(-g[active], 0.0))),
            "stationarity": float(np.max(np.abs(g[inactive]))) if inactive.size else 0.0,
            "bound": float(np.max(np.abs(e[active] - 1.0))),
        }


def _as_matrix(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
        raise NumericError(f"Q must be a non-empty square matrix, got shape {Q.shape}")
    return Q


def _indices(I: IndexSubset | Iterable[int], m: int) -> np.ndarray:
    """0-based indices from an IndexSubset (1-based) or a plain 0-based iterable."""
    if isinstance(I, IndexSubset):
        if I.dim != m:
            raise NumericError(f"active set dimension {I.dim} != problem size {m}")
        return I.zero_based()
    idx = np.asarray(sorted(set(I)), dtype=int)
    if idx.size == 0 or idx[0] < 0 or idx[-1] >= m:
        raise NumericError(f"invalid active index set {idx} for size {m}")
    return idx


def _complement(active: np.ndarray, m: int) -> np.ndarray:
    mask = np.ones(m, dtype=bool)
    mask[active] = False
    return np.flatnonzero(mask)


def _restricted_point(Q: np.ndarray, active: np.ndarray) -> np.ndarray:
    m = Q.shape[0]
    inactive = _complement(active, m)
    e = np.ones(m)
    if inactive.size:
        block = Q[np.ix_(inactive, inactive)]
        rhs = Q[np.ix_(inactive, active)].sum(axis=1)
        try:
            e[inactive] = -np.linalg.solve(block, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericError("restricted block Q_JJ is singular") from exc
    return e


def solve_restricted(Q, I: IndexSubset | Iterable[int], tol: float = FEAS_TOL) -> Candidate:
    """Fix ``e_I = 1`` and solve for the rest; report KKT feasibility.

    ``I`` is either an :class:`IndexSubset` of dimension ``m`` (1-based) or an
    iterable of 0-based positions.
    """
    Q = _as_matrix(Q)
    active = _indices(I, Q.shape[0])
    e = _restricted_point(Q, active)
    g = Q @ e
    h = g[active]
    inactive = _complement(active, Q.shape[0])
    slack = e[inactive] - 1.0
    feasible = bool(np.all(slack >= -tol) and np.all(h > tol))
    degenerate = bool(np.any(np.abs(slack) < tol) or np.any(np.abs(h) <= tol))
    return Candidate(tuple(int(i) for i in active), e, h, float(e @ g), feasible, degenerate)


def _package(Q: np.ndarray, cand: Candidate, iterations: int, brute: bool) -> QPSolution:
    m = Q.shape[0]
    active = IndexSubset(tuple(i + 1 for i in cand.active), m)
    inactive = tuple(i + 1 for i in range(m) if i not in cand.active)
    weights = {i + 1: float(hv) for i, hv in zip(cand.active, cand.h)}
    kappa = float(sum(weights.values()))
    return QPSolution(
        kappa=kappa,
        minimizer_e=cand.e,
        active_set_I=active,
        inactive_set_J=inactive,
        weights_h=weights,
        degenerate=cand.degenerate,
        iterations=iterations,
        used_bruteforce=brute,
    )


def solve_active_set(Q, tol: float = FEAS_TOL) -> QPSolution:
    """Primal active-set method started from ``z = 1`` with every bound active.

    Each step either drops the most negative multiplier from the working set
    or, when the restricted minimizer leaves the feasible region, walks to the
    first blocking bound and adds it. The objective never increases, so working
    sets cannot cycle in the non-degenerate case; an iteration cap of ``2**m``
    falls back to enumeration.
    """
    Q = _as_matrix(Q)
    m = Q.shape[0]
    working = set(range(m))
    z = np.ones(m)
    limit = max(2**m, 4)
    for it in range(1, limit + 1):
        active = np.array(sorted(working), dtype=int)
        target = _restricted_point(Q, active)
        inactive = _complement(active, m)
        blocking = inactive[target[inactive] < 1.0 - tol]
        if blocking.size:
            ratios = (z[blocking] - 1.0) / (z[blocking] - target[blocking])
            j = int(np.argmin(ratios))
            z = z + float(np.clip(ratios[j], 0.0, 1.0)) * (target - z)
            z[blocking[j]] = 1.0
            working.add(int(blocking[j]))
            continue
        z = target
        h = (Q @ z)[active]
        worst = int(np.argmin(h))
        if h[worst] <= tol and len(active) > 1:
            working.discard(int(active[worst]))
            continue
        cand = solve_restricted(Q, active, tol)
        if cand.feasible:
            return _package(Q, cand, it, brute=False)
        break
    if m > BRUTEFORCE_MAX_DIM:
        raise NumericError(f"active-set iteration failed to converge for m={m}")
    warnings.warn("active-set iteration did not certify KKT; using enumeration", RuntimeWarning, stacklevel=2)
    sol = solve_bruteforce(Q, tol)
    return QPSolution(**{**sol.__dict__, "iterations": limit})


def solve_bruteforce(Q, tol: float = FEAS_TOL) -> QPSolution:
    """Enumerate all non-empty active sets and keep the KKT-feasible one."""
    Q = _as_matrix(Q)
    m = Q.shape[0]
    if m > BRUTEFORCE_MAX_DIM:
        raise NumericError(f"enumeration limited to m <= {BRUTEFORCE_MAX_DIM}, got {m}")
    feasible: list[Candidate] = []
    for k in range(1, m + 1):
        for combo in itertools.combinations(range(m), k):
            cand = solve_restricted(Q, combo, tol)
            if cand.feasible:
                feasible.append(cand)
    if not feasible:
        raise NumericError("no KKT-feasible active set found; Q is not positive definite?")
    best = min(feasible, key=lambda c: c.value)
    for other in feasible:
        if other is not best and not np.allclose(other.e, best.e, rtol=1e-8, atol=1e-8):
            raise NumericError("multiple distinct KKT points; uniqueness violated")
    if len(feasible) > 1:
        best = Candidate(best.active, best.e, best.h, best.value, True, True)
    return _package(Q, best, 0, brute=True)


def identity_linkage(sigma, active: IndexSubset) -> float:
    """``1_I' Sigma_I^{-1} 1_I`` for the covariance side of the problem."""
    idx = active.zero_based()
    block = np.asarray(sigma, dtype=float)[np.ix_(idx, idx)]
    return float(np.ones(len(idx)) @ np.linalg.solve(block, np.ones(len(idx))))
