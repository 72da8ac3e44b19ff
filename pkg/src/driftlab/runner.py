"""Experiment stages behind the command-line interface."""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .basis import DriftSpec, make_test_drift
from .config import ExperimentConfig
from .inference import (
    default_inference_K,
    harmonic_moments,
    l2_error,
    posterior_alpha_mixture,
    posterior_ball_mass,
    posterior_fixed,
    posterior_scale_mixture,
    stats_from_moments,
    SuffStats,
)
from .sde import load_path, save_path, simulate_path
from .theory import (
    RateTable,
    fit_small_ball_exponent,
    normalizer_bounds_check,
    rate_epsilon,
    rkhs_approximation,
    small_ball_mc,
)

log = logging.getLogger("driftlab")


def derive_seed(*parts: int) -> int:
    """Deterministic 64-bit seed from integer parts."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def truth_drift(cfg: ExperimentConfig) -> DriftSpec:
    return make_test_drift(cfg.truth_beta, cfg.truth_norm, cfg.truth_K, cfg.truth_profile, cfg.truth_seed)


def path_file(out: Path, T: float, seed: int) -> Path:
    return Path(out) / "paths" / f"path_T{T:g}_seed{seed}.dlab"


def jobs(cfg: ExperimentConfig):
    for T in cfg.T_ladder:
        for s in cfg.seeds:
            yield T, s, derive_seed(cfg.seed_base, int(round(T)), s)


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_manifest(cfg: ExperimentConfig, stage: str, wall: float, rows: list) -> None:
    fname = Path(cfg.out) / "manifest.json"
    manifest = json.loads(fname.read_text()) if fname.exists() else {}
    h = cfg.config_hash()
    manifest["tool_version"] = __version__
    manifest["environment"] = (f"python {platform.python_version()}, numpy {np.__version__}, "
                               f"{platform.platform()}")
    manifest.setdefault("configs", {})[h] = cfg.to_dict()
    manifest.setdefault("stages", {})[stage] = {"config_hash": h, "wall_time_s": round(wall, 3),
                                                "rows": rows}
    fname.write_text(json.dumps(manifest, indent=2, sort_keys=True))


# -- simulate --------------------------------------------------------------------

def _simulate_one(args):
    drift_json, T, dt, seed, path_seed, fname = args
    t0 = time.perf_counter()
    path = simulate_path(DriftSpec.from_json(drift_json), T, dt, path_seed)
    save_path(path, fname)
    wall = time.perf_counter() - t0
    log.info("simulated T=%g seed=%d -> %s (%.1fs)", T, seed, fname, wall)
    return {"T": T, "seed": seed, "path_seed": path_seed, "file": str(fname), "wall_time_s": round(wall, 3)}


def cmd_simulate(cfg: ExperimentConfig) -> list:
    """Write one path file per (T, seed); returns the file names."""
    t0 = time.perf_counter()
    out = Path(cfg.out)
    (out / "paths").mkdir(parents=True, exist_ok=True)
    b0 = truth_drift(cfg).to_json()
    work = [(b0, T, cfg.dt, s, ps, str(path_file(out, T, s))) for T, s, ps in jobs(cfg)]
    rows = _map(_simulate_one, work, cfg.workers)
    _write_manifest(cfg, "simulate", time.perf_counter() - t0, rows)
    return [Path(r["file"]) for r in rows]


# -- infer -------------------------------------------------------------------------

def scenario_K(cfg: ExperimentConfig, scenario: str, T: float) -> int:
    if cfg.K_policy != "auto":
        return int(cfg.K_policy)
    a_min = cfg.alpha_lo if scenario == "alpha_hier" else cfg.prior_alpha
    return min(cfg.K_cap, default_inference_K(T, a_min))


def scenario_posterior(stats: SuffStats, scenario: str, T: float, cfg: ExperimentConfig):
    if scenario == "fixed_prior":
        return posterior_fixed(stats, cfg.prior_alpha, cfg.prior_L)
    if scenario == "scale_hier":
        return posterior_scale_mixture(stats, cfg.prior_alpha, T, cfg.grid_size)
    if scenario == "alpha_hier":
        return posterior_alpha_mixture(stats, T, cfg.grid_size, cfg.alpha_lo)
    raise ValueError(f"unknown scenario {scenario!r}")


def evaluate(post, b0: DriftSpec, T: float, beta: float, M: float, n: int, rng) -> dict:
    """Posterior-mean L2 error and posterior mass outside the ball of radius M eps_T."""
    radius = M * rate_epsilon(beta, T)
    mass, se = posterior_ball_mass(post, b0, radius, n, rng)
    hyper_mean = post.hyper_mean() if hasattr(post, "hyper_mean") else math.nan
    return {"error": l2_error(post.mean, b0), "mass_outside": mass, "mass_se": se,
            "radius": radius, "K": post.K, "hyper_mean": hyper_mean}


def _infer_one(args):
    cfg, scenario, T, seed, path_seed, fname = args
    fname = Path(fname)
    if not fname.exists():
        raise FileNotFoundError(f"missing path file {fname}")
    t0 = time.perf_counter()
    path = load_path(fname)
    K = scenario_K(cfg, scenario, T)
    stats = stats_from_moments(harmonic_moments(path, K), K)
    post = scenario_posterior(stats, scenario, T, cfg)
    rng = np.random.default_rng(derive_seed(path_seed, 1))
    res = evaluate(post, path.drift, T, cfg.truth_beta, cfg.ball_M, cfg.ball_samples, rng)
    hyper = {"fixed_prior": f"alpha={cfg.prior_alpha};L={cfg.prior_L}",
             "scale_hier": f"alpha={cfg.prior_alpha};L~weibull",
             "alpha_hier": "alpha~lambda_T;L=1"}[scenario]
    row = dict(scenario=scenario, beta=cfg.truth_beta, T=T, seed=seed, hyper=hyper,
               config_hash=cfg.config_hash(), **res)
    summary = post.summary()
    summary.update({"T": T, "seed": seed, "path_seed": path_seed, "scenario": scenario,
                    "error": res["error"]})
    log.info("inferred %s T=%g seed=%d error=%.4g (%.1fs)", scenario, T, seed, res["error"],
             time.perf_counter() - t0)
    return row, summary


def cmd_infer(cfg: ExperimentConfig) -> RateTable:
    """Posterior summaries and RateTable rows for every path of the config."""
    t0 = time.perf_counter()
    out = Path(cfg.out)
    scenario = cfg.scenario
    work = [(cfg, scenario, T, s, ps, str(path_file(out, T, s))) for T, s, ps in jobs(cfg)]
    for w in work:
        if not Path(w[-1]).exists():
            raise FileNotFoundError(f"missing path file {w[-1]}")
    results = _map(_infer_one, work, cfg.workers)
    (out / "posteriors").mkdir(parents=True, exist_ok=True)
    for row, summary in results:
        fname = out / "posteriors" / f"{scenario}_T{row['T']:g}_seed{row['seed']}.json"
        fname.write_text(json.dumps(summary))
    rates_file = out / "rates.csv"
    table = RateTable.from_csv(rates_file) if rates_file.exists() else RateTable()
    new_keys = {(r["scenario"], float(r["T"]), int(r["seed"])) for r, _ in results}
    table = RateTable([r for r in table.rows
                       if (r["scenario"], float(r["T"]), int(r["seed"])) not in new_keys])
    for row, _ in results:
        table.add(**row)
    table = table.sorted()
    table.check()
    table.to_csv(rates_file)
    _write_manifest(cfg, f"infer:{scenario}", time.perf_counter() - t0,
                    [{"T": r["T"], "seed": r["seed"], "config_hash": r["config_hash"]} for r, _ in results])
    return table


# -- theory ------------------------------------------------------------------------------

def cmd_theory(cfg: ExperimentConfig) -> dict:
    """Small-ball ladders, RKHS inequality grid and normalizer bounds; CSV + summary JSON."""
    t0 = time.perf_counter()
    out = Path(cfg.out) / "theory"
    out.mkdir(parents=True, exist_ok=True)
    summary = {"config_hash": cfg.config_hash(), "checks": {}}

    sb_rows = []
    for alpha_key, eps_list in sorted(cfg.small_ball.items()):
        alpha = float(alpha_key)
        ests = []
        for i, eps in enumerate(eps_list):
            seed = derive_seed(cfg.seed_base, 17, int(alpha * 1000), i)
            e = small_ball_mc(alpha, 1.0, float(eps), n=cfg.small_ball_samples, seed=seed)
            log.info("small ball alpha=%g eps=%g p=%.3g (%s)", alpha, eps, e.p_hat, e.method)
            ests.append(e)
            sb_rows.append(e.to_row())
        slope, se, mc_se = fit_small_ball_exponent(ests)
        rel = abs(slope * alpha - 1.0)
        summary["checks"][f"small_ball_alpha_{alpha:g}"] = {
            "exponent": slope, "target": 1.0 / alpha, "stderr": se, "mc_stderr": mc_se,
            "ci95": [slope - 1.96 * max(se, mc_se), slope + 1.96 * max(se, mc_se)],
            "relative_deviation": rel, "pass": rel <= 0.15}
    _write_csv(out / "small_ball.csv", sb_rows)

    rk_rows = []
    for beta in cfg.rkhs_beta:
        b0 = make_test_drift(beta, 1.0, 1000, "power_decay")
        for alpha in cfg.rkhs_alpha:
            if beta > alpha + 0.5:
                continue
            for L in cfg.rkhs_L:
                for eps in cfg.rkhs_eps:
                    r = rkhs_approximation(b0, beta, alpha, L, eps)
                    rk_rows.append({"beta": beta, "alpha": alpha, "L": L, "epsilon": eps, "I": r.I,
                                    "l2_err": r.l2_err, "rkhs_sq": r.rkhs_sq, "bound": r.bound,
                                    "tail": r.tail, "tail_ok": r.tail_ok,
                                    "l2_ok": r.l2_err <= eps, "rkhs_ok": r.rkhs_sq <= r.bound,
                                    "seed": 0})
    _write_csv(out / "rkhs.csv", rk_rows)
    summary["checks"]["rkhs"] = {
        "cases": len(rk_rows),
        "l2_ok": sum(r["l2_ok"] for r in rk_rows),
        "rkhs_ok": sum(r["rkhs_ok"] for r in rk_rows),
        "tail_condition_holds": sum(r["tail_ok"] for r in rk_rows),
        "pass": all(r["l2_ok"] and r["rkhs_ok"] for r in rk_rows)}

    nz_rows = []
    for T in cfg.normalizer_T:
        c, ok = normalizer_bounds_check(T)
        nz_rows.append({"T": T, "C_T": c, "lower": math.log(T) / (2 * math.exp(math.e)),
                        "upper": math.log(T), "ok": ok, "seed": 0})
    _write_csv(out / "normalizer.csv", nz_rows)
    summary["checks"]["normalizer"] = {"pass": all(r["ok"] for r in nz_rows)}
    summary["pass"] = all(c["pass"] for c in summary["checks"].values())
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _write_manifest(cfg, "theory", time.perf_counter() - t0, [])
    return summary


def _write_csv(fname: Path, rows: list) -> None:
    with open(fname, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
