"""Index subsets, validated model parameters and shared result types."""

from __future__ import annotations

import itertools
import math
import warnings
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Literal, Optional

import numpy as np

from .exceptions import (
    AsymmetricMatrixError,
    DiagonalError,
    NotPositiveDefiniteError,
    ParseError,
    ValidationError,
)

PIVOT_TOL = 1e-12
MAX_ENUM_DIM = 20

TailMethod = Literal["exact-qp", "exact-exponent", "generator-analysis", "regression"]


@dataclass(frozen=True, order=False)
class IndexSubset:
    """Non-empty subset of ``{1, ..., dim}`` with 1-based, increasing members."""

    members: tuple[int, ...]
    dim: int

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        object.__setattr__(self, "members", members)
        if self.dim < 1:
            raise ValidationError(f"dimension must be >= 1, got {self.dim}")
        if not members:
            raise ValidationError("index subset must be non-empty")
        if any(b <= a for a, b in zip(members, members[1:])):
            raise ValidationError(f"members must be strictly increasing: {members}")
        if members[0] < 1 or members[-1] > self.dim:
            raise ValidationError(f"members {members} outside 1..{self.dim}")

    @classmethod
    def of(cls, members: Iterable[int], dim: int) -> "IndexSubset":
        return cls(tuple(sorted(set(int(m) for m in members))), dim)

    @classmethod
    def full(cls, dim: int) -> "IndexSubset":
        return cls(tuple(range(1, dim + 1)), dim)

    @classmethod
    def from_key(cls, key: str, dim: int) -> "IndexSubset":
        """Parse the ``"1,3,4"`` serialization."""
        try:
            parts = [int(p) for p in str(key).replace(" ", "").split(",")]
        except ValueError as exc:
            raise ParseError(f"cannot parse subset key {key!r}") from exc
        if len(set(parts)) != len(parts):
            raise ParseError(f"repeated index in subset key {key!r}")
        try:
            return cls.of(parts, dim)
        except ValidationError as exc:
            raise ParseError(f"invalid subset key {key!r} for dim {dim}: {exc}") from exc

    @classmethod
    def from_mask(cls, mask: int, dim: int) -> "IndexSubset":
        return cls(tuple(i + 1 for i in range(dim) if mask >> i & 1), dim)

    @property
    def key(self) -> str:
        return ",".join(str(m) for m in self.members)

    @property
    def mask(self) -> int:
        return sum(1 << (m - 1) for m in self.members)

    @property
    def cardinality(self) -> int:
        return len(self.members)

    def zero_based(self) -> np.ndarray:
        return np.asarray(self.members, dtype=int) - 1

    def without(self, index: int) -> Optional["IndexSubset"]:
        """Remove ``index``; returns None when the result would be empty."""
        if index not in self.members:
            raise ValidationError(f"{index} not in {self.members}")
        rest = tuple(m for m in self.members if m != index)
        return IndexSubset(rest, self.dim) if rest else None

    def issubset(self, other: "IndexSubset") -> bool:
        return set(self.members) <= set(other.members)

    def relabel(self, labels: "IndexSubset") -> "IndexSubset":
        """Map positions ``1..k`` of a subproblem back onto ``labels``."""
        return IndexSubset(tuple(labels.members[m - 1] for m in self.members), labels.dim)

    def sort_key(self) -> tuple:
        return (len(self.members), self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, item: object) -> bool:
        return item in self.members

    def __str__(self) -> str:
        return "{" + self.key + "}"


def enumerate_subsets(d: int, min_size: int = 1, max_size: Optional[int] = None) -> Iterator[IndexSubset]:
    """Yield all subsets of ``{1..d}`` with ``min_size <= |S| <= max_size``.

    Order is by size, then lexicographic.
    """
    if max_size is None:
        max_size = d
    if not (1 <= min_size <= max_size <= d):
        raise ValidationError(f"need 1 <= min_size <= max_size <= d, got ({d}, {min_size}, {max_size})")
    for k in range(min_size, max_size + 1):
        for combo in itertools.combinations(range(1, d + 1), k):
            yield IndexSubset(combo, d)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Positive-definite correlation matrix; construct through :func:`validate_correlation`."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def sub(self, subset: IndexSubset) -> "CorrelationMatrix":
        idx = subset.zero_based()
        return validate_correlation(self.entries[np.ix_(idx, idx)])

    def to_dict(self) -> dict:
        return {"dim": self.dim, "rho": self.entries.tolist()}

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def validate_correlation(raw: Any) -> CorrelationMatrix:
    a = np.array(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"correlation matrix must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValidationError("empty correlation matrix")
    if not np.all(np.isfinite(a)):
        raise ValidationError("correlation matrix has non-finite entries")
    if not np.array_equal(a, a.T):
        raise AsymmetricMatrixError("correlation matrix is not symmetric")
    if not np.all(np.diag(a) == 1.0):
        raise DiagonalError(f"diagonal entries must be exactly 1, got {np.diag(a)}")
    off = a[~np.eye(a.shape[0], dtype=bool)]
    if off.size and np.any(np.abs(off) >= 1.0):
        raise NotPositiveDefiniteError("off-diagonal correlations must lie in (-1, 1)")
    try:
        factor = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("correlation matrix is not positive definite") from exc
    pivots = np.diag(factor) ** 2
    if np.min(pivots) <= PIVOT_TOL:
        raise NotPositiveDefiniteError(f"factorization pivot {np.min(pivots):.3e} below {PIVOT_TOL}")
    a.setflags(write=False)
    return CorrelationMatrix(a)


Rate = int | float | Fraction


@dataclass(frozen=True, eq=False)
class RateParameterSet:
    """Marshall-Olkin shock rates for every non-empty subset of ``{1..dim}``."""

    dim: int
    rates: Mapping[IndexSubset, Rate]
    strict: bool

    def rate(self, subset: IndexSubset) -> Rate:
        return self.rates[subset]

    def by_mask(self) -> dict[int, Rate]:
        return {s.mask: r for s, r in self.rates.items()}

    @property
    def is_rational(self) -> bool:
        return all(isinstance(r, (int, Fraction)) for r in self.rates.values())

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "lambda": {s.key: float(r) for s, r in sorted(self.rates.items(), key=lambda kv: kv[0].sort_key())},
        }


def _parse_rate_key(key: Any, d: int) -> IndexSubset:
    if isinstance(key, IndexSubset):
        if key.dim != d:
            raise ParseError(f"subset {key} has dim {key.dim}, expected {d}")
        return key
    if isinstance(key, (tuple, list, frozenset, set)):
        try:
            return IndexSubset.of(key, d)
        except ValidationError as exc:
            raise ParseError(str(exc)) from exc
    if isinstance(key, int):
        key = str(key)
    return IndexSubset.from_key(key, d)


def validate_rates(raw: Mapping[Any, Any], d: int) -> RateParameterSet:
    """Validate a rate map; missing subsets default to zero with a warning."""
    if d < 2:
        raise ValidationError(f"dimension must be >= 2, got {d}")
    if d > MAX_ENUM_DIM:
        raise ValidationError(f"dimension {d} exceeds {MAX_ENUM_DIM}")
    rates: dict[IndexSubset, Rate] = {}
    for key, value in raw.items():
        subset = _parse_rate_key(key, d)
        if subset in rates:
            raise ParseError(f"duplicate rate key {subset}")
        if isinstance(value, bool) or not isinstance(value, (int, float, Fraction)):
            raise ValidationError(f"rate for {subset} must be a number, got {value!r}")
        if isinstance(value, float) and not math.isfinite(value):
            raise ValidationError(f"rate for {subset} must be finite")
        if value < 0:
            raise ValidationError(f"rate for {subset} is negative: {value}")
        rates[subset] = value
    missing = [s for s in enumerate_subsets(d) if s not in rates]
    if missing:
        shown = ", ".join(str(s) for s in missing[:5])
        more = "" if len(missing) <= 5 else f" and {len(missing) - 5} more"
        warnings.warn(f"{len(missing)} subsets missing from rate map, set to 0: {shown}{more}", stacklevel=2)
        for s in missing:
            rates[s] = 0
    ordered = dict(sorted(rates.items(), key=lambda kv: kv[0].sort_key()))
    strict = all(r > 0 for r in ordered.values())
    return RateParameterSet(d, ordered, strict)


@dataclass(frozen=True)
class TailOrderResult:
    subset: IndexSubset
    kappa: float
    log_exponent: float = 0.0
    method: TailMethod = "exact-exponent"
    active_set: Optional[IndexSubset] = None
    degenerate: bool = False

    def __post_init__(self):
        if self.kappa < 1 - 1e-12:
            raise ValidationError(f"tail order must be >= 1, got {self.kappa}")
        if self.method == "exact-qp" and len(self.subset) >= 2 and not self.kappa > 1:
            raise ValidationError(f"quadratic-program tail order must exceed 1, got {self.kappa}")
        if self.active_set is not None and not self.active_set.issubset(self.subset):
            raise ValidationError(f"active set {self.active_set} not contained in {self.subset}")

    def to_dict(self) -> dict:
        return {
            "subset": self.subset.key,
            "kappa": float(self.kappa),
            "log_exponent": float(self.log_exponent),
            "method": self.method,
            "active_set": None if self.active_set is None else self.active_set.key,
        }


Verdict = Literal["tends-to-zero", "positive-limit", "inconclusive"]


@dataclass(frozen=True)
class Evidence:
    """Outcome of one ratio test ``C_S(u1) / C_{S minus l}(u1)``."""

    subset: IndexSubset
    removed: int
    verdict: Verdict
    numerator: Optional[TailOrderResult] = None
    denominator: Optional[TailOrderResult] = None
    trace: Optional[list[tuple[float, float]]] = None
    note: str = ""

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "subset": self.subset.key,
            "removed": self.removed,
            "verdict": self.verdict,
        }
        if self.numerator is not None:
            out["numerator"] = self.numerator.to_dict()
        if self.denominator is not None:
            out["denominator"] = self.denominator.to_dict()
        if self.trace is not None:
            out["trace"] = [[float(u), float(r)] for u, r in self.trace]
        if self.note:
            out["note"] = self.note
        return out


@dataclass(frozen=True)
class ClassificationReport:
    dim: int
    pairwise: bool
    max_k: int
    mutual: bool
    evidence: tuple[Evidence, ...] = field(default_factory=tuple)
    inconclusive: bool = False

    def __post_init__(self):
        if self.mutual != (self.max_k == self.dim):
            raise ValidationError("mutual must hold exactly when max_k equals the dimension")
        if self.pairwise != (self.max_k >= 2):
            raise ValidationError("pairwise must hold exactly when max_k >= 2")
        if not 1 <= self.max_k <= self.dim:
            raise ValidationError(f"max_k {self.max_k} outside 1..{self.dim}")

    def kwise(self, k: int) -> bool:
        return 2 <= k <= self.max_k

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "pairwise": self.pairwise,
            "max_k": self.max_k,
            "mutual": self.mutual,
            "inconclusive": self.inconclusive,
            "evidence": [e.to_dict() for e in self.evidence],
        }


def assemble_report(dim: int, evidence: Iterable[Evidence], max_k: Optional[int] = None) -> ClassificationReport:
    """Build a report from per-(S, l) evidence, nesting k-wise levels.

    k-wise independence holds when every ratio with ``2 <= |S| <= k`` tends to
    zero; ``max_k`` is the largest such k (1 if pairwise fails). Inconclusive
    evidence stops the ladder and is flagged.
    """
    evidence = tuple(evidence)
    top = dim if max_k is None else max_k
    level = 1
    inconclusive = False
    for k in range(2, top + 1):
        at_k = [e.verdict for e in evidence if len(e.subset) == k]
        if any(v == "positive-limit" for v in at_k):
            break
        if any(v == "inconclusive" for v in at_k):
            inconclusive = True
            break
        level = k
    return ClassificationReport(
        dim=dim,
        pairwise=level >= 2,
        max_k=level,
        mutual=level == dim,
        evidence=evidence,
        inconclusive=inconclusive,
    )
