import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from driftlab.basis import DriftSpec, sobolev_norm
from driftlab.prior import (
    GpPriorSpec,
    HyperPriorSpec,
    alpha_density,
    alpha_normalizer,
    default_prior_truncation,
    rkhs_norm,
    sample_alpha,
    sample_gp,
    sample_scale,
    scale_logpdf,
    scale_quantile,
    scale_survival,
    sqrt_lambda,
)


@pytest.mark.parametrize("k,spec,expected", [
    (1, GpPriorSpec(0.5), 1.0),
    (4, GpPriorSpec(0.5), 0.25),
    (1, GpPriorSpec(1.5, eigen_mode="laplacian", kappa=1.0), ((4 * math.pi**2) ** 2 + 1) ** -0.5),
])
def test_sqrt_lambda_examples(k, spec, expected):
    assert sqrt_lambda(k, spec) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("kappa", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_laplacian_eigen_bounds(kappa, alpha):
    k = np.arange(1, 1001)
    ratio = sqrt_lambda(k, GpPriorSpec(alpha, eigen_mode="laplacian", kappa=kappa)) / k ** (-0.5 - alpha)
    # k/2 <= ceil(k/2) <= k gives explicit constants
    lo = ((2 * math.pi) ** (2 * alpha + 1) + kappa) ** -0.5
    hi = math.pi ** (-0.5 - alpha)
    assert np.all(ratio >= lo * (1 - 1e-12))
    assert np.all(ratio <= hi * (1 + 1e-12))


def test_gp_spec_validation():
    with pytest.raises(ValueError):
        GpPriorSpec(0.0)
    with pytest.raises(ValueError):
        GpPriorSpec(1.0, eigen_mode="other")
    with pytest.raises(ValueError):
        sqrt_lambda(0, GpPriorSpec(1.0))


def test_sample_gp_zero_scale():
    b = sample_gp(GpPriorSpec(1.0, L=0.0, K=5), np.random.default_rng(0))
    assert np.all(b.coeffs == 0.0)


def test_sample_gp_first_coefficient_variance():
    rng = np.random.default_rng(1)
    n = 100_000
    spec = GpPriorSpec(0.5, L=1.0, K=1)
    draws = np.array([sample_gp(spec, rng).coeffs[0] for _ in range(n)])
    assert abs(draws.var() - 1.0) < 3 * math.sqrt(2.0 / n)


def test_sample_gp_expected_squared_norm():
    rng = np.random.default_rng(2)
    n = 20_000
    spec = GpPriorSpec(0.5, L=2.0, K=10)
    sq = np.array([np.sum(sample_gp(spec, rng).coeffs ** 2) for _ in range(n)])
    expected = 4.0 * sum(k**-2.0 for k in range(1, 11))
    assert abs(sq.mean() - expected) < 3 * sq.std() / math.sqrt(n)


def test_sample_gp_scaling_with_shared_seed():
    a = sample_gp(GpPriorSpec(1.0, L=1.0, K=50), np.random.default_rng(7))
    b = sample_gp(GpPriorSpec(1.0, L=2.0, K=50), np.random.default_rng(7))
    assert np.allclose(b.coeffs, 2.0 * a.coeffs, rtol=0, atol=1e-15)


def test_prior_sample_regularity():
    rng = np.random.default_rng(3)
    alpha = 1.0
    draws = [sample_gp(GpPriorSpec(alpha, K=1000), rng) for _ in range(200)]

    def mean_sq(gamma, K):
        return np.mean([sobolev_norm(DriftSpec(d.coeffs[:K]), gamma) ** 2 for d in draws])

    # gamma < alpha: partial sums settle; gamma > alpha: they keep growing
    assert mean_sq(alpha - 0.5, 1000) < 1.1 * mean_sq(alpha - 0.5, 100)
    assert mean_sq(alpha + 0.5, 1000) > 5.0 * mean_sq(alpha + 0.5, 100)


def test_default_prior_truncation():
    assert default_prior_truncation(1.0, 100) == 1000
    assert default_prior_truncation(0.5, 1e6) == math.ceil(10 * 1e6**0.5)


@pytest.mark.parametrize("alpha,T", [(0.5, 100), (1.0, 1e4), (2.0, 7.0)])
def test_scale_quantile_at_unit_exponential(alpha, T):
    assert scale_quantile(1 - math.exp(-1), alpha, T) == pytest.approx(T**-0.5, rel=1e-12)


@pytest.mark.parametrize("alpha,T", [(0.5, 100), (1.0, 1e4), (2.0, 30.0)])
def test_scale_law_is_weibull(alpha, T):
    law = stats.weibull_min(2 / (1 + 2 * alpha), scale=T**-0.5)
    L = np.geomspace(law.ppf(1e-4), law.ppf(1 - 1e-6), 25)
    assert np.allclose(scale_logpdf(L, alpha, T), law.logpdf(L), rtol=1e-10, atol=1e-10)
    assert np.allclose(scale_survival(L, alpha, T), law.sf(L), rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("l", [0.1, 0.3])
def test_scale_survival_monte_carlo(l):
    n = 100_000
    draws = sample_scale(0.5, 100.0, np.random.default_rng(4), n)
    p = math.exp(-((l * 10.0) ** 1.0))
    assert abs(np.mean(draws > l) - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_scale_median_slope():
    rng = np.random.default_rng(5)
    Ts = np.array([1e2, 1e3, 1e4, 1e5, 1e6])
    med = [np.median(sample_scale(0.5, T, rng, 50_000)) for T in Ts]
    slope = np.polyfit(np.log(Ts), np.log(med), 1)[0]
    assert abs(slope + 0.5) < 0.05


def test_scale_hyperprior_cdf_by_monte_carlo():
    hp = HyperPriorSpec("scale_weibull", alpha=1.0, T=500.0)
    alphas, Ls = hp.sample(np.random.default_rng(6), 20_000)
    assert np.all(alphas == 1.0)
    res = stats.kstest(Ls, stats.weibull_min(2 / 3, scale=500**-0.5).cdf)
    assert res.pvalue > 1e-3


@pytest.mark.parametrize("T", [10.0, 100.0, 1e4, 1e6])
def test_alpha_density_integrates_to_one(T):
    total, _ = integrate.quad(lambda x: alpha_density(x, T)[0], 0, math.log(T),
                              epsabs=1e-12, epsrel=1e-12, limit=500)
    assert abs(total - 1.0) < 1e-8


def test_alpha_density_support_and_monotonicity():
    T = 100.0
    assert alpha_density(math.log(T) + 1, T)[0] == 0.0
    assert alpha_density(-0.1, T)[0] == 0.0
    x = np.linspace(0, math.log(T), 200)
    d, _ = alpha_density(x, T)
    assert np.all(d >= 0)
    assert np.all(np.diff(d) >= 0)


def test_alpha_normalizer_bounds_at_100():
    _, c = alpha_density(1.0, 100.0)
    assert math.log(100) / (2 * math.exp(math.e)) <= c <= math.log(100)
    assert c == alpha_normalizer(100.0)


@pytest.mark.parametrize("T", [1.0, math.e])
def test_alpha_density_rejects_small_T(T):
    with pytest.raises(ValueError):
        alpha_density(0.5, T)


def test_sample_alpha_mean():
    T = 1000.0
    draws = sample_alpha(T, np.random.default_rng(8), 50_000)
    upper = math.log(T)
    mean, _ = integrate.quad(lambda x: x * alpha_density(x, T)[0], 0, upper, limit=500)
    assert np.all((draws >= 0) & (draws <= upper))
    assert abs(draws.mean() - mean) < 3 * draws.std() / math.sqrt(draws.size)


def test_hyperprior_spec_json_and_defaults():
    hp = HyperPriorSpec("alpha_truncated", T=1000.0)
    assert hp.alpha_max == pytest.approx(math.log(1000.0))
    assert HyperPriorSpec.from_json(hp.to_json()) == hp
    fixed = HyperPriorSpec("fixed", alpha=1.0, L=2.0)
    assert json.loads(fixed.to_json()) == {"kind": "fixed", "alpha": 1.0, "L": 2.0}
    with pytest.raises(ValueError):
        HyperPriorSpec("fixed", alpha=1.0)
    with pytest.raises(ValueError):
        HyperPriorSpec("gamma")


@pytest.mark.parametrize("coeffs,expected", [([1.0], 1.0), ([0.0, 1.0], 2.0)])
def test_rkhs_norm_examples(coeffs, expected):
    assert rkhs_norm(DriftSpec(coeffs), 0.5, 1.0) == pytest.approx(expected)


def test_rkhs_norm_scaling_and_domain():
    h = DriftSpec([0.3, -0.2, 0.1])
    assert rkhs_norm(h, 1.0, 2.0) == pytest.approx(0.5 * rkhs_norm(h, 1.0, 1.0))
    for L in (0.0, -1.0):
        with pytest.raises(ValueError):
            rkhs_norm(h, 1.0, L)
