"""Acceptance suite; prints one PASS/FAIL line per criterion.

Criteria 1-3 share one simulated path per (truth, T, seed); the harmonic
moments of each path are computed once and every scenario reads its
statistics from them.
"""

import math

import numpy as np
import pytest

from driftlab.basis import DriftSpec, make_test_drift
from driftlab.config import ExperimentConfig
from driftlab.inference import harmonic_moments, l2_error, posterior_fixed, stats_from_moments
from driftlab.runner import jobs, scenario_K, scenario_posterior, truth_drift
from driftlab.prior import rkhs_norm
from driftlab.sde import invariant_density, periodic_local_time, scale_function, simulate_path
from driftlab.theory import (
    RateTable,
    fit_rate_slope,
    fit_small_ball_exponent,
    normalizer_bounds_check,
    rkhs_approximation,
    small_ball_mc,
)

from oracles import importance_oracle, quadrature_oracle, random_stats

SLOPE_WINDOW = (-0.45, -0.21)
LADDER = [500.0, 2000.0, 8000.0, 32000.0]
SEEDS = list(range(1, 11))
# (label, scenario, prior alpha)
RUNS = [("fixed", "fixed_prior", 1.0), ("mismatched", "fixed_prior", 2.0),
        ("scale", "scale_hier", 1.0), ("alpha", "alpha_hier", 1.0)]


def _run_truth(beta, ladder, labels):
    """Error and hyperparameter mean per (label, T, seed) for a power_decay truth."""
    base = ExperimentConfig(T_ladder=ladder, seeds=SEEDS, truth_beta=beta).validate()
    b0 = truth_drift(base)
    out = {}
    for T, s, path_seed in jobs(base):
        path = simulate_path(b0, T, base.dt, path_seed)
        cfgs = {label: ExperimentConfig(scenario=scen, prior_alpha=a, T_ladder=ladder, seeds=SEEDS,
                                        truth_beta=beta)
                for label, scen, a in RUNS if label in labels}
        Ks = {label: scenario_K(c, c.scenario, T) for label, c in cfgs.items()}
        mom = harmonic_moments(path, max(Ks.values()))
        del path
        for label, cfg in cfgs.items():
            stats = stats_from_moments(mom, Ks[label])
            post = scenario_posterior(stats, cfg.scenario, T, cfg)
            hyper = post.hyper_mean() if hasattr(post, "hyper_mean") else math.nan
            out[(label, T, s)] = (l2_error(post.mean, b0), hyper)
    return out


@pytest.fixture(scope="module")
def rate_runs():
    beta1 = _run_truth(1.0, LADDER, {"fixed", "mismatched", "scale", "alpha"})
    beta2 = _run_truth(2.0, [32000.0], {"alpha"})
    return beta1, beta2


def _table(runs, label):
    table = RateTable()
    for (lab, T, s), (err, _) in runs.items():
        if lab == label:
            table.add(scenario=label, beta=1.0, T=T, seed=s, error=err)
    return table


def _median(runs, label, T, idx=0):
    return float(np.median([v[idx] for (lab, t, _), v in runs.items() if lab == label and t == T]))


def _in_window(slope):
    return SLOPE_WINDOW[0] <= slope <= SLOPE_WINDOW[1]


@pytest.mark.slow
def test_criterion_1_matched_prior_rate(rate_runs, report_criterion):
    slope, se = fit_rate_slope(_table(rate_runs[0], "fixed"))
    ok = _in_window(slope)
    report_criterion(1, "matched-prior rate", ok, f"slope {slope:.3f} +/- {se:.3f}, window {SLOPE_WINDOW}")
    assert ok


@pytest.mark.slow
def test_criterion_2_scale_adaptation(rate_runs, report_criterion):
    runs = rate_runs[0]
    slope, se = fit_rate_slope(_table(runs, "scale"))
    med_scale = _median(runs, "scale", 8000.0)
    med_mis = _median(runs, "mismatched", 8000.0)
    ok = _in_window(slope) and med_scale < med_mis
    report_criterion(2, "scale-prior adaptation", ok,
                     f"slope {slope:.3f} +/- {se:.3f}; median error at T=8000 {med_scale:.4f} "
                     f"vs mismatched alpha=2 {med_mis:.4f}")
    assert ok


@pytest.mark.slow
def test_criterion_3_regularity_adaptation(rate_runs, report_criterion):
    b1, b2 = rate_runs
    slope, se = fit_rate_slope(_table(b1, "alpha"))
    e1, e2 = _median(b1, "alpha", 32000.0), _median(b2, "alpha", 32000.0)
    a1, a2 = _median(b1, "alpha", 32000.0, 1), _median(b2, "alpha", 32000.0, 1)
    ok = _in_window(slope) and e2 < e1 and a2 > a1
    report_criterion(3, "regularity-prior adaptation", ok,
                     f"slope {slope:.3f} +/- {se:.3f}; T=32000 median error beta=2 {e2:.4f} vs beta=1 "
                     f"{e1:.4f}; median posterior alpha {a2:.2f} vs {a1:.2f}")
    assert ok


@pytest.mark.slow
def test_criterion_4_small_ball_exponent(report_criterion):
    ladders = {0.5: [0.5, 0.35, 0.25, 0.18], 1.0: [0.1, 0.07, 0.05, 0.035]}
    details, ok = [], True
    for alpha, eps in ladders.items():
        ests = [small_ball_mc(alpha, 1.0, e, n=100_000, seed=1000 * i + int(10 * alpha))
                for i, e in enumerate(eps)]
        slope, se, mc_se = fit_small_ball_exponent(ests)
        rel = abs(slope * alpha - 1)
        ok &= rel <= 0.15 and not any(e.flagged for e in ests)
        details.append(f"alpha={alpha}: exponent {slope:.3f} (target {1 / alpha:g}, "
                       f"dev {100 * rel:.1f}%, mc se {mc_se:.1e})")
    report_criterion(4, "small-ball exponent", ok, "; ".join(details))
    assert ok


def test_criterion_5_rkhs_lemma(report_criterion):
    cases = failures = tail_cases = 0
    for beta in (0.5, 1.0, 1.5):
        b0 = make_test_drift(beta, 1.0, 1000)
        for alpha in (0.5, 1.0, 2.0):
            if beta > alpha + 0.5:
                continue
            for L in (0.5, 2.0):
                for eps in (0.2, 0.1, 0.05, 0.02):
                    r = rkhs_approximation(b0, beta, alpha, L, eps)
                    cases += 1
                    tail_cases += r.tail_ok
                    # recompute the RKHS side from the returned truncation
                    rk = rkhs_norm(r.h, alpha, L) ** 2
                    if not (r.l2_err <= eps and rk <= r.bound and r.I == math.floor(eps ** (-1 / beta) + 1e-9)):
                        failures += 1
    ok = failures == 0 and cases == 64
    report_criterion(5, "RKHS approximation", ok,
                     f"{cases - failures}/{cases} cases satisfy l2_err <= eps and rkhs_sq <= bound; "
                     f"tail condition holds in {tail_cases}")
    assert ok


def test_criterion_6_conjugacy_oracles(report_criterion):
    worst_sigma, worst_lm, ok = 0.0, 0.0, True
    for K in (1, 2, 3):
        for seed in range(5):
            stats = random_stats(K, 10 * K + seed, scale=0.7 if K == 3 else 3.0)
            alpha, L = 0.5 + 0.5 * seed, 0.5 + 0.4 * seed
            post = posterior_fixed(stats, alpha, L)
            if K <= 2:
                mean, cov, log_ev = quadrature_oracle(stats, alpha, L, n=4001 if K == 1 else 801)
                dev = max(np.max(np.abs(post.mean - mean)), np.max(np.abs(post.cov - cov)))
                ok &= dev < 1e-6
                lm = abs(post.log_marginal - log_ev)
                worst_lm = max(worst_lm, lm)
                ok &= lm < 1e-6
            else:
                mean, se_m, cov, se_c, _ = importance_oracle(stats, alpha, L, 400_000,
                                                             np.random.default_rng(seed))
                z = max(np.max(np.abs(post.mean - mean) / se_m), np.max(np.abs(post.cov - cov) / se_c))
                worst_sigma = max(worst_sigma, z)
                ok &= z < 3
    report_criterion(6, "conjugacy oracles", ok,
                     f"max |log_marginal - quadrature| {worst_lm:.1e}; worst IS deviation {worst_sigma:.2f} se")
    assert ok


@pytest.mark.slow
def test_criterion_7_local_time_lln(report_criterion):
    b = DriftSpec([1.0])
    rho = invariant_density(b, 256).values
    meds = []
    for T in (500.0, 2000.0, 8000.0):
        sups = [np.max(np.abs(periodic_local_time(simulate_path(b, T, 1e-3, 7000 + s), 256).normalized().values - rho))
                for s in range(20)]
        meds.append(float(np.median(sups)))
    ok = meds[0] > meds[1] > meds[2] and meds[2] < 0.05
    report_criterion(7, "local-time LLN", ok, "median sup-distance " + ", ".join(f"{m:.4f}" for m in meds))
    assert ok


def test_criterion_8_normalizer_bounds(report_criterion):
    vals = [(T, *normalizer_bounds_check(T)) for T in (1e2, 1e3, 1e4, 1e5, 1e6)]
    ok = all(v[2] for v in vals)
    report_criterion(8, "normalizer bounds", ok, ", ".join(f"C_T({T:g})={c:.3f}" for T, c, _ in vals))
    assert ok


def test_criterion_9_scale_function_identity(report_criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(5):
        K = int(rng.integers(1, 21))
        b = DriftSpec(rng.standard_normal(K) / np.arange(1, K + 1))
        s1 = scale_function(b, 1.0)
        for x in (0.1, 0.5, 0.9):
            for k in (1, 2, 3):
                worst = max(worst, abs(scale_function(b, x + k) - scale_function(b, x) - k * s1))
    ok = worst < 1e-8
    report_criterion(9, "scale-function identity", ok, f"max residual {worst:.1e}")
    assert ok
