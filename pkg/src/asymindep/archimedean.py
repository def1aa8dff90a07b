"""Archimedean copulas ``C(u) = phi^{-1}(phi(u_1) + ... + phi(u_d))``.

Generators evaluate against an ``mpmath`` context so the same formula serves
double precision (``mpmath.fp``) and the extended-precision inclusion-exclusion
used for deep diagonal sections. The ACIG generator is defined by quadrature
and is double precision only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import mpmath
import numpy as np
from scipy import integrate, optimize, special

from ._rng import chunked_draw
from .core import ClassificationReport, Evidence, IndexSubset, TailOrderResult, assemble_report, enumerate_subsets
from .exceptions import NumericError, PrecisionError, ValidationError
from .survival import DEFAULT_PRECISION, GUARD_DIGITS, CopulaModel, PrecisionRequest

THETA1_GRID = tuple(10.0**-k for k in range(2, 11))
THETA1_DPS = 60
CAUCHY_TOL = 1e-4
TAIL_DEPENDENCE_MARGIN = 1e-3
DERIVATIVE_STEPS = (1e-2, 1e-3, 1e-4, 1e-5)
DERIVATIVE_AGREEMENT = 0.01
# deep grid for the slow-variation test: u = 10^-k, log(1/u) doubling each step
SLOW_VARIATION_EXPONENTS = (20, 40, 80, 160, 320, 640)
SLOW_VARIATION_TOL = 0.01
ACIG_QUAD_RTOL = 1e-10
ACIG_DOUBLE_ERROR = 1e-9

ArchVerdict = Literal["mutual", "pairwise-only", "tail-dependent", "inconclusive"]


def _mp_ctx(dps: int):
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


@dataclass(frozen=True, eq=False)
class Generator:
    """Archimedean generator with derivative and inverse.

    ``phi``, ``phi_prime`` and ``phi_inv`` take ``(x, ctx)``. ``derivatives_finite``
    records whether ``(-D)^j phi^{-1}(0)`` is finite for every order (``None``
    when not known in closed form). ``listed_theta1`` is the value of the
    ``theta_1`` limit under which the family is commonly catalogued, if any.
    """

    family: str
    param: Optional[float]
    phi: Callable
    phi_prime: Callable
    phi_inv: Callable
    derivatives_finite: Optional[bool]
    extended: bool = True
    listed_theta1: Optional[float] = None
    phi_inv_prime: Optional[Callable] = None

    def __call__(self, t, ctx=None):
        return self.phi(t, ctx or mpmath.fp)

    def inverse(self, s, ctx=None):
        return self.phi_inv(s, ctx or mpmath.fp)

    def describe(self) -> dict:
        key = "alpha" if self.family == "acig" else "theta"
        return {"family": self.family, key: self.param}


def _bisect_decreasing(f, target, lo, hi, ctx, iterations: Optional[int] = None):
    """Root of decreasing ``f(t) = target`` on ``[lo, hi]`` by bisection."""
    if iterations is None:
        iterations = int(getattr(ctx, "prec", 53)) + 8
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if mid == lo or mid == hi:
            break
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def independence_generator() -> Generator:
    return Generator(
        family="independence",
        param=None,
        phi=lambda t, ctx: -ctx.log(t),
        phi_prime=lambda t, ctx: -1 / ctx.mpf(t),
        phi_inv=lambda s, ctx: ctx.exp(-s),
        derivatives_finite=True,
    )


def clayton_generator(theta: float) -> Generator:
    """``phi(t) = (t^{-theta} - 1) / theta``, ``theta > 0``."""
    if not theta > 0:
        raise ValidationError(f"Clayton parameter must be positive, got {theta}")
    th = float(theta)
    return Generator(
        family="clayton",
        param=th,
        phi=lambda t, ctx: (ctx.power(t, -th) - 1) / th,
        phi_prime=lambda t, ctx: -ctx.power(t, -th - 1),
        phi_inv=lambda s, ctx: ctx.power(1 + th * s, -1 / th),
        derivatives_finite=True,
        listed_theta1=1.0,
    )


def frank_generator(theta: float) -> Generator:
    """``phi(t) = -log((exp(-theta t) - 1) / (exp(-theta) - 1))``, ``theta != 0``."""
    if theta == 0 or not math.isfinite(theta):
        raise ValidationError(f"Frank parameter must be finite and non-zero, got {theta}")
    th = float(theta)
    return Generator(
        family="frank",
        param=th,
        phi=lambda t, ctx: -ctx.log(ctx.expm1(-th * t) / ctx.expm1(-th)),
        phi_prime=lambda t, ctx: -th / ctx.expm1(th * t),
        phi_inv=lambda s, ctx: -ctx.log1p(ctx.exp(-s) * ctx.expm1(-th)) / th,
        derivatives_finite=True,
        listed_theta1=1.0,
    )


def amh_generator(theta: float) -> Generator:
    """Ali-Mikhail-Haq, ``phi(t) = log((1 - theta (1 - t)) / t)``, ``-1 <= theta < 1``."""
    if not -1 <= theta < 1:
        raise ValidationError(f"AMH parameter must lie in [-1, 1), got {theta}")
    th = float(theta)
    return Generator(
        family="amh",
        param=th,
        phi=lambda t, ctx: ctx.log((1 - th * (1 - t)) / t),
        phi_prime=lambda t, ctx: th / (1 - th * (1 - t)) - 1 / ctx.mpf(t),
        phi_inv=lambda s, ctx: (1 - th) / (ctx.exp(s) - th),
        derivatives_finite=True,
        listed_theta1=1.0,
    )


def gumbel_generator(theta: float) -> Generator:
    """``phi(t) = (-log t)^theta``, ``theta >= 1``.

    ``phi^{-1}(s) = exp(-s^{1/theta})`` has an infinite first derivative at 0
    once ``theta > 1``.
    """
    if not theta >= 1:
        raise ValidationError(f"Gumbel parameter must be >= 1, got {theta}")
    th = float(theta)
    return Generator(
        family="gumbel",
        param=th,
        phi=lambda t, ctx: ctx.power(-ctx.log(t), th),
        phi_prime=lambda t, ctx: -th * ctx.power(-ctx.log(t), th - 1) / t,
        phi_inv=lambda s, ctx: ctx.exp(-ctx.power(s, 1 / th)),
        derivatives_finite=th == 1,
        listed_theta1=1.0,
    )


def log_generator(theta: float) -> Generator:
    """``phi(t) = (1 - t) / (-log(1 - t))^theta``, ``theta > 0``.

    Near ``t = 1`` the generator behaves like ``u / log(1/u)^theta`` with
    ``u = 1 - t``, so ``phi'(1) = 0``. The inverse has no closed form and is
    found by bisection in the working precision.
    """
    if not theta > 0:
        raise ValidationError(f"log-generator parameter must be positive, got {theta}")
    th = float(theta)

    def phi(t, ctx):
        w = 1 - ctx.mpf(t)
        if w == 0:
            return ctx.mpf(0)
        return w / ctx.power(-ctx.log(w), th)

    def phi_prime(t, ctx):
        w = 1 - ctx.mpf(t)
        if w == 0:
            return ctx.mpf(0)
        ell = -ctx.log(w)
        return -(ctx.power(ell, -th) + th * ctx.power(ell, -th - 1))

    def phi_inv(s, ctx):
        s = ctx.mpf(s)
        if s == 0:
            return ctx.mpf(1)
        if ctx.isinf(s):
            return ctx.mpf(0)
        return _bisect_decreasing(lambda t: phi(t, ctx), s, ctx.mpf(0), ctx.mpf(1), ctx)

    return Generator(
        family="log-generator",
        param=th,
        phi=phi,
        phi_prime=phi_prime,
        phi_inv=phi_inv,
        derivatives_finite=False,
    )


def _acig_integral(s: float, alpha: float, power: float) -> float:
    """``E[X^{-power} exp(-s / X)]`` for ``X ~ Gamma(alpha, 1)`` by quadrature."""
    shape = alpha - power
    lg = special.gammaln(alpha)

    def integrand(x):
        if x <= 0:
            return 0.0
        return math.exp(-s / x + (shape - 1) * math.log(x) - x - lg)

    # split at the mode of the integrand so quad sees the peak
    mode = max(((shape - 1) + math.sqrt((shape - 1) ** 2 + 4 * s)) / 2, 1e-12)
    total, err = 0.0, 0.0
    for a, b in ((0.0, mode), (mode, math.inf)):
        val, e, *info = integrate.quad(integrand, a, b, epsrel=ACIG_QUAD_RTOL, epsabs=0.0, limit=200, full_output=1)
        if len(info) > 1 and info[1] and "roundoff" not in str(info[1]).lower():
            raise NumericError(f"ACIG quadrature did not converge at s={s}: {info[1]}")
        total += val
        err += e
    if total > 0 and err > 1e3 * ACIG_QUAD_RTOL * total:
        raise NumericError(f"ACIG quadrature error {err:.1e} too large at s={s}")
    return total


def acig_generator(alpha: float) -> Generator:
    """Generator whose inverse is the Laplace transform of ``1 / Gamma(alpha)``.

    ``phi^{-1}(s) = E[exp(-s / X)]``, ``X ~ Gamma(alpha, 1)``, by adaptive
    quadrature; ``phi`` by monotone root-finding on ``phi^{-1}``.
    """
    if not alpha > 0 or not math.isfinite(alpha):
        raise ValidationError(f"ACIG shape must be positive and finite, got {alpha}")
    a = float(alpha)

    def phi_inv(s, ctx=None):
        s = float(s)
        if s < 0:
            raise ValidationError("generator inverse needs s >= 0")
        if s == 0:
            return 1.0
        if math.isinf(s):
            return 0.0
        return _acig_integral(s, a, 0.0)

    def phi_inv_prime(s, ctx=None):
        if a <= 1 and float(s) == 0:
            return -math.inf
        return -_acig_integral(float(s), a, 1.0)

    def phi(t, ctx=None):
        t = float(t)
        if not 0 < t <= 1:
            raise ValidationError(f"generator argument must lie in (0, 1], got {t}")
        if t == 1:
            return 0.0
        hi = 1.0
        while phi_inv(hi) > t:
            hi *= 2
            if hi > 1e300:
                raise NumericError(f"cannot bracket phi({t})")
        return optimize.brentq(lambda s: phi_inv(s) - t, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)

    def phi_prime(t, ctx=None):
        return 1.0 / phi_inv_prime(phi(t))

    return Generator(
        family="acig",
        param=a,
        phi=phi,
        phi_prime=phi_prime,
        phi_inv=phi_inv,
        derivatives_finite=None,
        extended=False,
        phi_inv_prime=phi_inv_prime,
    )


FAMILIES = {
    "independence": lambda p=None: independence_generator(),
    "clayton": clayton_generator,
    "frank": frank_generator,
    "amh": amh_generator,
    "gumbel": gumbel_generator,
    "log-generator": log_generator,
    "acig": acig_generator,
}


def make_generator(family: str, param: Optional[float] = None) -> Generator:
    try:
        build = FAMILIES[family]
    except KeyError:
        raise ValidationError(f"unknown Archimedean family {family!r}; choose from {sorted(FAMILIES)}") from None
    if family != "independence" and param is None:
        raise ValidationError(f"family {family!r} needs a parameter")
    return build(param)


class ArchimedeanModel(CopulaModel):
    """``d``-dimensional Archimedean copula from a :class:`Generator`."""

    is_exchangeable = True

    def __init__(self, generator: Generator, dim: int, seed: int = 0):
        if dim < 2:
            raise ValidationError("dimension must be >= 2")
        self.generator = generator
        self.dim = dim
        self.supports_extended = generator.extended
        self.double_error = 1e-15 if generator.extended else ACIG_DOUBLE_ERROR
        self.has_sampler = generator.family in ("clayton", "independence")

    def copula(self, subset, u, ctx):
        gen = self.generator
        if not gen.extended:
            ctx = mpmath.fp
        if any(x == 0 for x in u):
            return ctx.mpf(0)
        s = ctx.mpf(0)
        for x in u:
            s += gen.phi(x, ctx)
        value = gen.phi_inv(s, ctx)
        if ctx is mpmath.fp and not math.isfinite(float(value)):
            raise PrecisionError(f"{gen.family} generator overflowed in double precision")
        return value

    def sample(self, n, seed, threads: int = 1):
        if self.generator.family == "clayton":
            return sample_clayton_array(self.generator.param, self.dim, n, seed, threads)
        if self.generator.family == "independence":
            return chunked_draw(n, seed, lambda rng, size: rng.random((size, self.dim)), threads)
        raise NotImplementedError(f"no sampler for the {self.generator.family} family")

    def describe(self):
        return {**self.generator.describe(), "dim": self.dim}


def arch_copula_eval(
    model: ArchimedeanModel,
    subset: IndexSubset,
    u: Sequence[float],
    prec: PrecisionRequest = DEFAULT_PRECISION,
) -> float:
    """``phi^{-1}(sum_{s in S} phi(u_s))`` at the requested precision."""
    u = [float(x) for x in u]
    if len(u) != len(subset):
        raise ValidationError(f"point has {len(u)} coordinates, subset needs {len(subset)}")
    if any(not 0 <= x <= 1 for x in u):
        raise ValidationError("coordinates must lie in [0, 1]")
    if min(u) == 0:
        return 0.0
    if not model.supports_extended:
        return float(model.copula(subset, u, mpmath.fp))
    digits = GUARD_DIGITS + prec.working_digits + math.ceil(-math.log10(prec.target_relative_error))
    ctx = _mp_ctx(digits)
    return float(model.copula(subset, [ctx.mpf(x) for x in u], ctx))


def sample_clayton_array(theta: float, d: int, n: int, seed: int, threads: int = 1) -> np.ndarray:
    """Frailty construction ``U_j = (1 + E_j / V)^{-1/theta}``, ``V ~ Gamma(1/theta, 1)``."""
    if not theta > 0:
        raise ValidationError(f"Clayton parameter must be positive, got {theta}")

    def draw(rng, size):
        v = rng.gamma(1.0 / theta, 1.0, size)
        e = rng.standard_exponential((size, d))
        return np.exp(-np.log1p(e / v[:, None]) / theta)

    return chunked_draw(n, seed, draw, threads)


@dataclass(frozen=True)
class Theta1Estimate:
    estimate: float
    diagnostic: Literal["converged", "inconclusive"]
    grid: tuple[tuple[float, float], ...]
    listed_discrepancy: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "diagnostic": self.diagnostic,
            "grid": [list(p) for p in self.grid],
            "listed_discrepancy": self.listed_discrepancy,
            "note": self.note,
        }


def _theta1_ratio(gen: Generator, u, ctx):
    t = 1 - u
    return -u * gen.phi_prime(t, ctx) / gen.phi(t, ctx)


def _neville_at_zero(xs, ys):
    """Polynomial extrapolation of ``(x, y)`` pairs to ``x = 0``."""
    p = list(ys)
    n = len(xs)
    for level in range(1, n):
        for i in range(n - level):
            p[i] = (xs[i + level] * p[i] - xs[i] * p[i + 1]) / (xs[i + level] - xs[i])
    return p[0]


def theta1_estimate(gen: Generator, grid: Sequence[float] = THETA1_GRID) -> Theta1Estimate:
    """Limit of ``r(u) = -u phi'(1 - u) / phi(1 - u)`` as ``u`` tends to 0.

    ``r`` is tabulated on a decreasing geometric grid and extrapolated to the
    limit. When successive differences shrink geometrically (corrections in
    powers of ``u``) the geometric tail is summed; otherwise the values are
    extrapolated polynomially in ``x = 1 / log(1/u)``, which captures slowly
    varying corrections. The diagnostic is "converged" when two extrapolations
    of different order agree to within ``1e-4``.
    """
    ctx = _mp_ctx(THETA1_DPS) if gen.extended else mpmath.fp
    pairs = []
    for u in grid:
        r = _theta1_ratio(gen, ctx.mpf(u), ctx)
        pairs.append((float(u), float(r)))
    xs = [1.0 / math.log(1.0 / u) for u, _ in pairs]
    ys = [r for _, r in pairs]
    d1, d2 = ys[-1] - ys[-2], ys[-2] - ys[-3]
    q = d1 / d2 if d2 != 0 else 0.0
    if abs(d1) <= 1e-14 * max(1.0, abs(ys[-1])) or 0 <= q < 0.5:
        # corrections shrink geometrically with u: sum the geometric tail
        est = ys[-1] + d1 * q / (1 - q) if d1 else ys[-1]
        alt = ys[-1]
    else:
        est = _neville_at_zero(xs[-4:], ys[-4:])
        alt = _neville_at_zero(xs[-3:], ys[-3:])
    converged = abs(est - alt) <= CAUCHY_TOL and all(math.isfinite(y) for y in ys)
    listed = gen.listed_theta1
    discrepancy = listed is not None and abs(est - listed) > TAIL_DEPENDENCE_MARGIN
    note = ""
    if discrepancy:
        note = f"computed limit {est:.6g} differs from the catalogued value {listed:g} for the {gen.family} family"
    return Theta1Estimate(float(est), "converged" if converged else "inconclusive", tuple(pairs), discrepancy, note)


def _forward_derivative(f, j: int, h, ctx):
    """``(-1)^j`` times the ``j``-th forward difference quotient at 0."""
    total = ctx.mpf(0)
    for i in range(j + 1):
        total += (-1) ** (j - i) * math.comb(j, i) * f(i * h)
    return (-1) ** j * total / h**j


def derivatives_finite_numeric(gen: Generator, d: int) -> Optional[bool]:
    """Certify finite ``(-D)^j phi^{-1}(0)`` for ``j <= d`` by difference quotients.

    Each order is estimated at steps ``1e-2 ... 1e-5``; two successive
    estimates must agree within 1%. ``True`` certifies; ``None`` means the
    test could not decide (it never refutes).
    """
    if not gen.extended:
        return None
    ctx = _mp_ctx(30 + 5 * d)
    f = lambda s: gen.phi_inv(s, ctx)
    for j in range(1, d + 1):
        prev = None
        ok = False
        for h in DERIVATIVE_STEPS:
            est = _forward_derivative(f, j, ctx.mpf(h), ctx)
            if not ctx.isfinite(est):
                return None
            if prev is not None and abs(est - prev) <= DERIVATIVE_AGREEMENT * abs(est):
                ok = True
                break
            prev = est
        if not ok:
            return None
    return True


@dataclass(frozen=True)
class MutualCondition:
    verdict: ArchVerdict
    theta1: Theta1Estimate
    derivatives_finite: Optional[bool]
    derivative_source: str
    slow_variation: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "theta1": self.theta1.to_dict(),
            "derivatives_finite": self.derivatives_finite,
            "derivative_source": self.derivative_source,
            "slow_variation": self.slow_variation,
        }


def slow_variation_check(gen: Generator, exponents: Sequence[int] = SLOW_VARIATION_EXPONENTS) -> dict:
    """Test ``phi'(1) = 0`` and slow variation of ``L(u) = -phi'(1-u) - phi(1-u)/u``.

    On ``u = 10^-k`` with ``log(1/u)`` doubling per step: ``|phi'(1-u)|`` must
    decay strictly at every step, ``L`` must stay positive, and
    ``|L(cu)/L(u) - 1|`` for ``c in {2, 10}`` must shrink along the grid and end
    below 1%.
    """
    if not gen.extended:
        return {"passed": False, "reason": "generator is double precision only"}
    ctx = _mp_ctx(max(exponents) + 40)
    slopes, ratios, positive = [], {2: [], 10: []}, True
    for k in exponents:
        u = ctx.power(10, -k)
        slopes.append(abs(gen.phi_prime(1 - u, ctx)))
        base = -gen.phi_prime(1 - u, ctx) - gen.phi(1 - u, ctx) / u
        positive &= bool(base > 0)
        for c in ratios:
            cu = c * u
            other = -gen.phi_prime(1 - cu, ctx) - gen.phi(1 - cu, ctx) / cu
            ratios[c].append(float(abs(other / base - 1)) if base != 0 else math.inf)
    decays = all(b < a * (1 - 1e-3) for a, b in zip(slopes, slopes[1:]))
    slow = all(
        all(b < a for a, b in zip(seq, seq[1:])) and seq[-1] < SLOW_VARIATION_TOL for seq in ratios.values()
    )
    return {
        "passed": bool(decays and positive and slow),
        "phi_prime_decays": bool(decays),
        "L_positive": bool(positive),
        "L_slowly_varying": bool(slow),
        "ratio_deviation": {str(c): seq for c, seq in ratios.items()},
    }


def arch_mutual_condition(gen: Generator, d: int) -> MutualCondition:
    """Decide mutual / pairwise-only / tail-dependent for an Archimedean copula.

    Order of tests: ``theta_1 > 1 + 1e-3`` means tail dependence; finite
    derivatives of ``phi^{-1}`` at 0 up to order ``d`` (from family metadata,
    else certified numerically) give mutual independence; otherwise
    ``phi'(1) = 0`` with a positive slowly varying ``L`` gives pairwise-only.
    Anything else is inconclusive.
    """
    if d < 2:
        raise ValidationError("dimension must be >= 2")
    th = theta1_estimate(gen)
    if th.estimate > 1 + TAIL_DEPENDENCE_MARGIN:
        return MutualCondition("tail-dependent", th, gen.derivatives_finite, "metadata")
    finite, source = gen.derivatives_finite, "metadata"
    if finite is None:
        finite, source = derivatives_finite_numeric(gen, d), "numeric"
    if finite:
        return MutualCondition("mutual", th, True, source)
    sv = slow_variation_check(gen)
    verdict: ArchVerdict = "pairwise-only" if sv["passed"] else "inconclusive"
    return MutualCondition(verdict, th, finite, source, sv)


def acig_kappa(alpha: float, k: int) -> float:
    return max(1.0, min(float(alpha), float(k)))


@dataclass(frozen=True)
class ACIGTailOrders:
    alpha: float
    dim: int
    kappas: dict[int, float]
    report: ClassificationReport
    tail_orders: tuple[TailOrderResult, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "dim": self.dim,
            "kappa": {str(k): v for k, v in self.kappas.items()},
            **self.report.to_dict(),
        }


def acig_tail_orders(alpha: float, d: int) -> ACIGTailOrders:
    """``kappa_k = max(1, min(alpha, k))`` and the resulting k-wise ladder.

    Removing one index from a size-``k`` set changes the tail order from
    ``kappa_k`` to ``kappa_{k-1}`` (with ``kappa_1 = 1``); the ratio vanishes
    exactly when the order strictly increases. So ``alpha <= 1`` is tail
    dependent, ``k - 1 < alpha <= k < d`` gives k-wise but not (k+1)-wise
    independence and ``alpha > d - 1`` gives mutual independence.
    """
    if not alpha > 0 or not math.isfinite(alpha):
        raise ValidationError(f"ACIG shape must be positive and finite, got {alpha}")
    if d < 2:
        raise ValidationError("dimension must be >= 2")
    kappas = {k: acig_kappa(alpha, k) for k in range(1, d + 1)}
    evidence, orders = [], {}
    for s in enumerate_subsets(d, 1, d):
        orders[s] = TailOrderResult(s, kappas[len(s)], method="generator-analysis")
    for s in enumerate_subsets(d, 2, d):
        for l in s.members:
            rest = s.without(l)
            up = kappas[len(s)] > kappas[len(s) - 1]
            evidence.append(
                Evidence(
                    s,
                    l,
                    "tends-to-zero" if up else "positive-limit",
                    numerator=orders[s],
                    denominator=orders[rest],
                )
            )
    report = assemble_report(d, evidence)
    return ACIGTailOrders(float(alpha), d, {k: v for k, v in kappas.items() if k >= 2}, report, tuple(orders.values()))
