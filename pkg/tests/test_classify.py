import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from asymindep.archimedean import (
    ArchimedeanModel,
    acig_generator,
    clayton_generator,
    frank_generator,
    gumbel_generator,
    log_generator,
)
from asymindep.classify import (
    analytic_verdict,
    classify_model,
    counterexample_model,
    decide_ratio,
    geometric_grid,
    ratio_trace,
)
from asymindep.core import IndexSubset, TailOrderResult, enumerate_subsets
from asymindep.exceptions import ValidationError
from asymindep.gaussian import GaussianCopulaModel, example_matrix
from asymindep.marshall_olkin import mo_equal, mo_proportional
from asymindep.survival import ComonotoneCopula, CopulaModel, IndependenceCopula, diagonal_section

from helpers import random_correlation


def summary(rep):
    return rep.pairwise, rep.max_k, rep.mutual


def test_independence_mutual():
    rep = classify_model(IndependenceCopula(4), 4)
    assert summary(rep) == (True, 4, True)
    rep = classify_model(IndependenceCopula(4), 4, strategy="numeric")
    assert summary(rep) == (True, 4, True)


def test_independence_ratios_equal_u():
    tr = ratio_trace(IndependenceCopula(3), IndexSubset.full(3), 2, geometric_grid())
    assert_allclose([r for _, r in tr.points], [u for u, _ in tr.points], rtol=1e-12)


def test_comonotone_not_pairwise():
    rep = classify_model(ComonotoneCopula(3), strategy="numeric")
    assert summary(rep) == (False, 1, False)


def test_gaussian_example_analytic():
    rep = classify_model(GaussianCopulaModel(example_matrix(0.6)))
    assert summary(rep) == (True, 2, False)
    full = IndexSubset.full(3)
    ev = next(e for e in rep.evidence if e.subset == full and e.removed == 3)
    assert ev.verdict == "positive-limit"
    assert_allclose(ev.numerator.kappa, ev.denominator.kappa, rtol=1e-12)


def test_gaussian_example_below_threshold_mutual():
    assert summary(classify_model(GaussianCopulaModel(example_matrix(0.3)))) == (True, 3, True)


@pytest.mark.parametrize("rho", [0.3, 0.6])
def test_gaussian_cross_strategy(rho):
    m = GaussianCopulaModel(example_matrix(rho))
    a = classify_model(m)
    n = classify_model(m, strategy="numeric", u_min=1e-60, points=12)
    assert summary(a) == summary(n)
    assert not n.inconclusive
    assert [e.verdict for e in a.evidence] == [e.verdict for e in n.evidence]


def test_mo_cross_strategy():
    m = mo_equal(3)
    a = classify_model(m)
    n = classify_model(m, strategy="numeric", u_min=1e-16)
    assert summary(a) == summary(n) == (True, 3, True)
    assert [e.verdict for e in a.evidence] == [e.verdict for e in n.evidence]


def test_acig_ladder():
    assert summary(classify_model(ArchimedeanModel(acig_generator(2.5), 4))) == (True, 3, False)


@pytest.mark.parametrize(
    "gen,expected",
    [
        (frank_generator(1.0), (True, 3, True)),
        (clayton_generator(2.0), (True, 3, True)),
        (log_generator(1.0), (True, 2, False)),
        (gumbel_generator(2.0), (False, 1, False)),
    ],
    ids=lambda g: getattr(g, "family", ""),
)
def test_archimedean_analytic(gen, expected):
    assert summary(classify_model(ArchimedeanModel(gen, 3))) == expected


def test_max_k_limits_ladder():
    rep = classify_model(IndependenceCopula(4), max_k=2)
    assert rep.pairwise and not rep.mutual
    assert max(len(e.subset) for e in rep.evidence) == 2


def test_bad_arguments():
    with pytest.raises(ValidationError):
        classify_model(IndependenceCopula(3), max_k=4)
    with pytest.raises(ValidationError):
        classify_model(IndependenceCopula(3), strategy="guess")
    with pytest.raises(ValidationError):
        geometric_grid(1e-8, 1e-1)


def test_counterexample_marginals_uniform():
    m = counterexample_model()
    z = np.linspace(0, 1, 11)
    assert_allclose(m.marginal_cdf(z), (4 * z - z**2) / 3)
    for j in (1, 2, 3):
        assert_allclose(diagonal_section(m, IndexSubset((j,), 3), 0.3), 0.3, rtol=1e-14)


def test_counterexample_triple_equals_pair():
    m = counterexample_model()
    for u in (0.5, 1e-2, 1e-6, 1e-12):
        pair = diagonal_section(m, IndexSubset((1, 2), 3), u)
        triple = diagonal_section(m, IndexSubset.full(3), u)
        assert triple == pair


def test_counterexample_diagonal_constant():
    u = 1e-6
    assert_allclose(counterexample_model().diagonal(u) / u**2, 9 / 4, rtol=1e-5)


@pytest.mark.xfail(strict=True, reason="no copula has diagonal (2 - sqrt(4 - 3u))^2; the mixture's constant is 9/4")
def test_counterexample_listed_constant():
    u = 1e-6
    assert_allclose(counterexample_model().diagonal(u) / u**2, 9 / 16, rtol=1e-3)


def test_listed_diagonal_violates_frechet_bound():
    # a copula diagonal satisfies delta(u) >= 2u - 1; the listed form does not
    u = 0.99
    assert (2 - np.sqrt(4 - 3 * u)) ** 2 < 2 * u - 1


def test_counterexample_classification():
    m = counterexample_model()
    for strategy in ("analytic", "numeric"):
        assert summary(classify_model(m, 3, strategy=strategy)) == (True, 2, False)


def test_counterexample_copula_is_grounded_and_consistent():
    m = counterexample_model()
    ctx = mpmath.MPContext()
    ctx.dps = 40
    full = IndexSubset.full(3)
    assert m.copula(full, [ctx.mpf(0.3), ctx.mpf(0), ctx.mpf(0.4)], ctx) == 0
    # C(u, v, 1) equals the pair copula
    pair = m.copula(IndexSubset((1, 2), 3), [ctx.mpf(0.3), ctx.mpf(0.6)], ctx)
    assert_allclose(float(m.copula(full, [ctx.mpf(0.3), ctx.mpf(0.6), ctx.mpf(1)], ctx)), float(pair), rtol=1e-30)


@pytest.mark.parametrize(
    "ratios,verdict",
    [
        ([0.5, 1e-2, 1e-3, 1e-4, 1e-5], "tends-to-zero"),
        ([0.5, 0.5, 0.5, 0.5], "positive-limit"),
        ([0.4, 0.42, 0.41, 0.43], "positive-limit"),
        ([0.5, 1e-2, 1e-3, 2e-3, 1e-4], "inconclusive"),
        ([0.5, 0.4, 0.3, 0.2], "inconclusive"),
        ([1e-2, 1e-4], "inconclusive"),
        ([0.0, 0.0, 0.0, 0.0], "tends-to-zero"),
        ([0.1, 0.9, 0.1, 0.9], "inconclusive"),
    ],
)
def test_decide_ratio(ratios, verdict):
    assert decide_ratio(ratios) == verdict


class _Vanishing(CopulaModel):
    """Comonotone pair padded with a third coordinate that never exceeds 1 - u."""

    dim = 3
    has_exact_survival = True

    def copula(self, subset, u, ctx):
        return min(u)

    def survival(self, subset, u, prec=None):
        return 0.0 if 3 in subset.members else float(min(u))


def test_zero_over_zero_is_zero():
    tr = ratio_trace(_Vanishing(), IndexSubset((1, 3), 3), 1, geometric_grid())
    assert all(r == 0.0 for _, r in tr.points)
    assert tr.verdict == "tends-to-zero"


def test_analytic_verdict_rules():
    s3, s2 = IndexSubset.full(3), IndexSubset((1, 2), 3)
    a = TailOrderResult(s3, 1.25, -0.375, "exact-qp", s2)
    b = TailOrderResult(s2, 1.25, -0.375, "exact-qp", s2)
    assert analytic_verdict(a, b)[0] == "positive-limit"
    c = TailOrderResult(s3, 1.25, -0.5, "exact-qp", s3)
    assert analytic_verdict(c, b)[0] == "tends-to-zero"
    d = TailOrderResult(s3, 1.5, 0.0, "exact-exponent")
    assert analytic_verdict(d, b)[0] == "tends-to-zero"
    e = TailOrderResult(s3, 1.25, -0.375, "exact-qp", IndexSubset((1, 3), 3))
    assert analytic_verdict(e, b)[0] == "inconclusive"


def _check_nesting(rep):
    assert rep.mutual == (rep.max_k == rep.dim)
    assert rep.pairwise == (rep.max_k >= 2)
    for k in range(2, rep.dim + 1):
        ok = all(e.verdict == "tends-to-zero" for e in rep.evidence if len(e.subset) <= k)
        if rep.max_k >= k:
            assert ok


@given(st.integers(3, 5), st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_nesting_on_random_gaussians(m, seed):
    rep = classify_model(GaussianCopulaModel(random_correlation(np.random.default_rng(seed), m)))
    _check_nesting(rep)


@pytest.mark.parametrize(
    "model",
    [mo_proportional(4), counterexample_model(), ArchimedeanModel(acig_generator(1.5), 4), IndependenceCopula(3)],
    ids=lambda m: type(m).__name__,
)
def test_nesting_built_ins(model):
    _check_nesting(classify_model(model))


@pytest.mark.parametrize(
    "model",
    [mo_equal(3), counterexample_model(), GaussianCopulaModel(example_matrix(0.5)), ArchimedeanModel(clayton_generator(1.0), 3)],
    ids=lambda m: type(m).__name__,
)
def test_ratio_bounded_by_one(model):
    grid = geometric_grid(1e-1, 1e-8)
    for s in enumerate_subsets(3, 2):
        for l in s.members:
            assert all(r <= 1 + 1e-9 for _, r in ratio_trace(model, s, l, grid).points)
