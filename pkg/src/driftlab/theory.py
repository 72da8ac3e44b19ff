"""Numerical checks of rates, small-ball bounds, RKHS approximation and prior mass."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .basis import DriftSpec, sobolev_norm
from .prior import HyperPriorSpec, alpha_normalizer, prior_sd, rkhs_norm, scale_quantile

RARE_EVENT = 1e-3
_ROWS_PER_CHUNK = 4096


def rate_epsilon(beta: float, T: float) -> float:
    """Contraction rate T^(-beta/(1+2 beta))."""
    if not (beta > 0 and T > 0):
        raise ValueError("beta and T must be positive")
    return T ** (-beta / (1.0 + 2.0 * beta))


# -- Gaussian ball probabilities ----------------------------------------------------

def small_ball_truncation(alpha: float, L: float, epsilon: float) -> int:
    """Smallest K with L^2 sum_{k>K} k^(-1-2 alpha) < (epsilon/10)^2 (integral bound)."""
    return max(1, math.ceil((100.0 * L**2 / (2.0 * alpha * epsilon**2)) ** (1.0 / (2.0 * alpha))))


def _tilt(sd: np.ndarray, center: np.ndarray, r2: float) -> float:
    """Exponential tilt tau >= 0 making E_q ||theta - center||^2 = r2."""
    var = sd**2
    c2 = center**2

    def excess(tau):
        d = 1.0 + 2.0 * tau * var
        return float(np.sum(var / d + c2 / d**2)) - r2

    if excess(0.0) <= 0:
        return 0.0
    hi = 1.0
    while excess(hi) > 0:
        hi *= 4.0
    return optimize.brentq(excess, 0.0, hi, xtol=1e-14 * hi, rtol=1e-12)


def ball_probability(sd: np.ndarray, center: np.ndarray, epsilon: float, n: int,
                     rng: np.random.Generator, tau: float = 0.0):
    """Estimate P(||theta - center|| < epsilon), theta_k ~ N(0, sd_k^2) independent.

    With tau > 0 the draws come from the Gaussian proportional to
    p(theta) exp(-tau ||theta - center||^2) and are reweighted by
    M(tau) exp(tau ||theta - center||^2), M the Laplace transform at tau.
    Returns (estimate, standard error).
    """
    var = sd**2
    d = 1.0 + 2.0 * tau * var
    q_sd = sd / np.sqrt(d)
    q_mean = 2.0 * tau * var * center / d
    log_m = float(-0.5 * np.sum(np.log(d)) - tau * np.sum(center**2 / d))
    r2 = epsilon**2
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n:
        m = min(_ROWS_PER_CHUNK, n - done)
        theta = q_mean + q_sd * rng.standard_normal((m, sd.size))
        dist2 = np.sum((theta - center) ** 2, axis=1)
        w = np.where(dist2 < r2, np.exp(log_m + tau * dist2), 0.0)
        total += w.sum()
        total_sq += (w**2).sum()
        done += m
    mean = total / n
    var_hat = max(total_sq / n - mean**2, 0.0)
    return mean, math.sqrt(var_hat / n)


def wilson_interval(hits: int, n: int, z: float = 1.0):
    p = hits / n
    denom = 1.0 + z**2 / n
    centre = (p + z**2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return centre - half, centre + half


@dataclass
class SmallBallEstimate:
    alpha: float
    L: float
    epsilon: float
    K: int
    n_samples: int
    p_hat: float
    neg_log_p: float
    std_err: float
    method: str = "plain"
    flagged: bool = False
    seed: int | None = None

    def to_row(self) -> dict:
        return asdict(self)


def small_ball_mc(alpha: float, L: float, epsilon: float, K: int | None = None, n: int = 100_000,
                  rng: np.random.Generator | None = None, tilt: bool = True,
                  seed: int | None = None) -> SmallBallEstimate:
    """P(||W^{alpha,L}||_2 < epsilon) by Monte Carlo.

    Plain frequencies first; below ``RARE_EVENT`` the estimate is redone with the
    exponentially tilted proposal when ``tilt`` is set.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    if rng is None:
        rng = np.random.default_rng(seed)
    K = small_ball_truncation(alpha, L, epsilon) if K is None else K
    sd = prior_sd(alpha, L, K)
    center = np.zeros(K)
    p, _ = ball_probability(sd, center, epsilon, n, rng)
    hits = int(round(p * n))
    lo, hi = wilson_interval(hits, n)
    est = SmallBallEstimate(alpha, L, epsilon, K, n, p, -math.log(p) if p > 0 else math.inf,
                            0.5 * (hi - lo), "plain", False, seed)
    if p < RARE_EVENT and tilt:
        tau = _tilt(sd, center, epsilon**2)
        p, se = ball_probability(sd, center, epsilon, n, rng, tau)
        est = SmallBallEstimate(alpha, L, epsilon, K, n, p, -math.log(p) if p > 0 else math.inf,
                                se, "tilted", False, seed)
    if est.p_hat == 0.0:
        est.flagged = True
        est.std_err = hi  # Wilson upper bound stands in for the estimate
    return est


def fit_small_ball_exponent(estimates):
    """OLS slope of log(-log p) on log(1/epsilon); returns (slope, stderr, mc_stderr).

    ``stderr`` is the regression standard error, ``mc_stderr`` the slope error
    propagated from the per-point Monte Carlo errors.
    """
    est = [e for e in estimates if 0 < e.p_hat < 1]
    if len(est) < 3:
        raise ValueError("need at least three usable ladder points")
    x = np.log([1.0 / e.epsilon for e in est])
    y = np.log([e.neg_log_p for e in est])
    sy = np.array([e.std_err / (e.p_hat * e.neg_log_p) for e in est])
    X = np.column_stack([np.ones_like(x), x])
    coef, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    xc = x - x.mean()
    dof = len(x) - 2
    resid = y - X @ coef
    stderr = math.sqrt(float(resid @ resid) / dof / float(xc @ xc)) if dof > 0 else math.nan
    mc_stderr = math.sqrt(float(np.sum((xc / (xc @ xc)) ** 2 * sy**2)))
    return float(coef[1]), stderr, mc_stderr


# -- RKHS approximation ---------------------------------------------------------------

@dataclass
class RkhsApproximation:
    h: DriftSpec
    I: int
    epsilon: float
    l2_err: float
    rkhs_sq: float
    bound: float
    tail: float
    tail_ok: bool

    @property
    def passed(self) -> bool:
        return self.l2_err <= self.epsilon and self.rkhs_sq <= self.bound


def rkhs_approximation(b0: DriftSpec, beta: float, alpha: float, L: float,
                       epsilon: float) -> RkhsApproximation:
    """Truncate b0 at I = floor(epsilon^(-1/beta)) and compare against the RKHS bound.

    ``tail`` is sum_{k>I} b_k^2 k^(2 beta); when it is at most 1 the L2 error is
    guaranteed to be at most epsilon.  The RKHS inequality needs only
    beta <= alpha + 1/2.
    """
    if beta > alpha + 0.5:
        raise ValueError(f"RKHS approximation bound requires beta <= alpha + 1/2 (beta={beta}, alpha={alpha})")
    I = math.floor(epsilon ** (-1.0 / beta) * (1.0 + 1e-12))
    if I < 1:
        raise ValueError(f"epsilon={epsilon} too large: truncation level below 1")
    h = DriftSpec(b0.coeffs[:I], b0.basis)
    k = np.arange(1, b0.K + 1)
    tail = float(np.sum(b0.coeffs[I:] ** 2 * k[I:] ** (2.0 * beta)))
    l2_err = float(np.sqrt(np.sum(b0.coeffs[I:] ** 2)))
    rkhs_sq = rkhs_norm(h, alpha, L) ** 2
    bound = sobolev_norm(b0, beta) ** 2 / L**2 * epsilon ** ((2 * beta - 2 * alpha - 1) / beta)
    return RkhsApproximation(h, I, epsilon, l2_err, rkhs_sq, bound, tail, tail <= 1.0)


# -- prior mass of balls ------------------------------------------------------------------

def _default_mass_K(hyper: HyperPriorSpec, b0: DriftSpec, epsilon: float) -> int:
    if hyper.kind == "fixed":
        K = small_ball_truncation(hyper.alpha, hyper.L, epsilon)
    elif hyper.kind == "scale_weibull":
        K = small_ball_truncation(hyper.alpha, float(scale_quantile(0.999, hyper.alpha, hyper.T)), epsilon)
    else:
        K = 2000
    return max(K, b0.K)


def prior_mass_mc(hyper: HyperPriorSpec, b0: DriftSpec, epsilon: float, n: int = 100_000,
                  rng: np.random.Generator | None = None, K: int | None = None,
                  tilt: bool = True):
    """Prior mass Pi(||b - b0||_2 < epsilon); returns (estimate, std_err, flagged).

    Fixed hyperparameters use the tilted estimator when the event is rare;
    hierarchical priors draw hyperparameters and then coefficients.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    rng = np.random.default_rng() if rng is None else rng
    K = _default_mass_K(hyper, b0, epsilon) if K is None else K
    center = b0.padded(K)
    r2 = epsilon**2 - float(np.sum(b0.coeffs[K:] ** 2))
    if r2 <= 0:
        return 0.0, 0.0, True
    r_eff = math.sqrt(r2)
    if hyper.kind == "fixed":
        sd = prior_sd(hyper.alpha, hyper.L, K)
        p, se = ball_probability(sd, center, r_eff, n, rng)
        if p < RARE_EVENT and tilt:
            p, se = ball_probability(sd, center, r_eff, n, rng, _tilt(sd, center, r2))
        return p, se, p == 0.0
    k = np.arange(1, K + 1, dtype=float)
    hits = 0
    done = 0
    while done < n:
        m = min(_ROWS_PER_CHUNK, n - done)
        alphas, Ls = hyper.sample(rng, m)
        sd = Ls[:, None] * k[None, :] ** (-0.5 - alphas[:, None])
        theta = sd * rng.standard_normal((m, K))
        hits += int(np.sum(np.sum((theta - center) ** 2, axis=1) < r2))
        done += m
    p = hits / n
    return p, math.sqrt(p * (1 - p) / n), hits == 0


# -- normalizer of the regularity prior ------------------------------------------------

def normalizer_bounds_check(T: float):
    """C_T with the check log T / (2 e^e) <= C_T <= log T."""
    c = alpha_normalizer(float(T))
    lt = math.log(T)
    return c, bool(lt / (2.0 * math.exp(math.e)) <= c <= lt)


# -- rate tables ----------------------------------------------------------------------------

RATE_COLUMNS = ["scenario", "beta", "T", "seed", "error", "mass_outside", "mass_se", "radius",
                "K", "hyper_mean", "hyper", "config_hash"]


@dataclass
class RateTable:
    rows: list = field(default_factory=list)

    def add(self, **row):
        self.rows.append({c: row.get(c, "") for c in RATE_COLUMNS})

    def check(self):
        for r in self.rows:
            if not (np.isfinite(float(r["error"])) and float(r["error"]) >= 0):
                raise ValueError(f"non-finite error in row {r}")

    def sorted(self) -> "RateTable":
        return RateTable(sorted(self.rows, key=lambda r: (str(r["scenario"]), float(r["T"]), int(r["seed"]))))

    def select(self, **match) -> "RateTable":
        return RateTable([r for r in self.rows if all(str(r[k]) == str(v) for k, v in match.items())])

    def Ts(self) -> np.ndarray:
        return np.unique([float(r["T"]) for r in self.rows])

    def errors_at(self, T: float) -> np.ndarray:
        return np.array([float(r["error"]) for r in self.rows if float(r["T"]) == T])

    def medians(self):
        Ts = self.Ts()
        return Ts, np.array([np.median(self.errors_at(T)) for T in Ts])

    def to_csv(self, filename) -> None:
        with open(filename, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=RATE_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: _fmt(r[k]) for k in RATE_COLUMNS})

    @classmethod
    def from_csv(cls, filename) -> "RateTable":
        with open(filename, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != RATE_COLUMNS:
                raise ValueError(f"{filename}: unexpected columns {reader.fieldnames}")
            return cls(list(reader))


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def fit_rate_slope(table: RateTable, n_boot: int = 1000, seed: int = 0):
    """Slope of log median error against log T, with a bootstrap (over seeds) stderr."""
    Ts = table.Ts()
    if Ts.size < 3:
        raise ValueError("need at least three distinct horizons")
    groups = [table.errors_at(T) for T in Ts]
    if min(g.size for g in groups) < 5:
        raise ValueError("need at least five seeds per horizon")
    if any(np.any(g <= 0) for g in groups):
        raise ValueError("errors must be positive to fit a log-log slope")
    x = np.log(Ts)

    def slope(meds):
        return float(np.polyfit(x, np.log(meds), 1)[0])

    s = slope(np.array([np.median(g) for g in groups]))
    rng = np.random.default_rng(seed)
    boots = [slope(np.array([np.median(rng.choice(g, g.size)) for g in groups])) for _ in range(n_boot)]
    return s, float(np.std(boots, ddof=1))
