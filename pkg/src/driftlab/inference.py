"""Likelihood sufficient statistics and conjugate Gaussian posteriors.

For b = sum_k theta_k phi_k the Girsanov log-likelihood of a path is
theta' mu - theta' Sigma theta / 2 with

    mu_k      = int_0^T phi_k(X_t) dX_t
    Sigma_jk  = int_0^T phi_j(X_t) phi_k(X_t) dt.

Both are assembled from harmonic moments of the path, i.e. left-point sums of
exp(2 pi i m X_t) against dt and against dX_t.  Products of trigonometric
basis functions reduce to single harmonics, so moments up to frequency
2 ceil(K/2) determine Sigma exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .basis import DriftSpec, SQRT2
from .prior import alpha_log_density, prior_sd, scale_logpdf, scale_quantile
from .sde import PathRecord

EXACT_BUDGET = 1e9
BINNED_RESOLUTION = 1 << 22
INFERENCE_K_CAP = 2000


class NumericalError(ArithmeticError):
    pass


# -- harmonic moments ----------------------------------------------------------

@numba.njit(cache=True)
def _exact_moments(x, dt, m_occ, m_inc):
    oc = np.zeros(m_occ + 1)
    os_ = np.zeros(m_occ + 1)
    ic = np.zeros(m_inc + 1)
    is_ = np.zeros(m_inc + 1)
    for i in range(x.size - 1):
        xi = x[i]
        dx = x[i + 1] - xi
        th = 2.0 * np.pi * (xi - np.floor(xi))
        s1 = np.sin(th)
        c1 = np.cos(th)
        oc[0] += dt
        ic[0] += dx
        s = s1
        c = c1
        for m in range(1, m_occ + 1):
            oc[m] += c * dt
            os_[m] += s * dt
            if m <= m_inc:
                ic[m] += c * dx
                is_[m] += s * dx
            s, c = s * c1 + c * s1, c * c1 - s * s1
    return oc, os_, ic, is_


def _binned_moments(x, dt, m_occ, m_inc, resolution):
    frac = np.mod(x[:-1], 1.0)
    idx = np.minimum((frac * resolution).astype(np.int64), resolution - 1)
    w_occ = np.bincount(idx, minlength=resolution) * dt
    w_inc = np.bincount(idx, weights=np.diff(x), minlength=resolution)
    # sum_j w_j exp(2 pi i m (j + 1/2) / M)
    phase_occ = np.exp(1j * np.pi * np.arange(m_occ + 1) / resolution)
    phase_inc = phase_occ[: m_inc + 1]
    z_occ = np.conj(np.fft.rfft(w_occ)[: m_occ + 1]) * phase_occ
    z_inc = np.conj(np.fft.rfft(w_inc)[: m_inc + 1]) * phase_inc
    return z_occ.real, z_occ.imag, z_inc.real, z_inc.imag


@dataclass(frozen=True, eq=False)
class HarmonicMoments:
    """Left-point sums of cos/sin(2 pi m X) against dt (occ) and dX (inc)."""

    T: float
    dt: float
    occ_cos: np.ndarray
    occ_sin: np.ndarray
    inc_cos: np.ndarray
    inc_sin: np.ndarray
    method: str = "exact"

    @property
    def max_K(self) -> int:
        return min(2 * (self.inc_cos.size - 1), self.occ_cos.size - 1)


def harmonic_moments(path: PathRecord, K: int, method: str = "auto",
                     resolution: int = BINNED_RESOLUTION) -> HarmonicMoments:
    """Moments sufficient for truncation levels up to K."""
    F = (K + 1) // 2
    m_occ, m_inc = 2 * F, F
    if method == "auto":
        method = "exact" if path.N * m_occ <= EXACT_BUDGET else "binned"
    if method == "exact":
        parts = _exact_moments(path.x, path.dt, m_occ, m_inc)
    elif method == "binned":
        if resolution < 4 * m_occ:
            raise ValueError("binning resolution too coarse for the requested K")
        parts = _binned_moments(path.x, path.dt, m_occ, m_inc, resolution)
    else:
        raise ValueError(f"unknown moment method {method!r}")
    return HarmonicMoments(path.T, path.dt, *parts, method=method)


# -- sufficient statistics -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SuffStats:
    mu: np.ndarray
    sigma: np.ndarray
    T: float
    K: int
    dt: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.size != self.K or sigma.shape != (self.K, self.K):
            raise ValueError("mu/sigma shapes do not match K")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def truncate(self, K: int) -> "SuffStats":
        if K > self.K:
            raise ValueError(f"cannot extend statistics from K={self.K} to K={K}")
        return SuffStats(self.mu[:K], self.sigma[:K, :K], self.T, K, self.dt)

    def to_dict(self, full: bool = False) -> dict:
        d = {"T": self.T, "K": self.K, "dt": self.dt, "mu": self.mu.tolist(),
             "sigma_diag": np.diag(self.sigma).tolist()}
        if full:
            d["sigma"] = self.sigma.tolist()
        return d

    @classmethod
    def zero(cls, K: int, T: float = 0.0, dt: float = 0.0) -> "SuffStats":
        return cls(np.zeros(K), np.zeros((K, K)), T, K, dt)


def stats_from_moments(mom: HarmonicMoments, K: int) -> SuffStats:
    if K > mom.max_K:
        raise ValueError(f"moments support K <= {mom.max_K}, requested {K}")
    k = np.arange(1, K + 1)
    freq = (k + 1) // 2
    is_sin = (k % 2) == 1
    mu = SQRT2 * np.where(is_sin, mom.inc_sin[freq], mom.inc_cos[freq])

    fj, fl = freq[:, None], freq[None, :]
    diff = fj - fl
    C = mom.occ_cos
    S = mom.occ_sin
    c_diff = C[np.abs(diff)]
    c_sum = C[fj + fl]
    s_diff = np.sign(diff) * S[np.abs(diff)]
    s_sum = S[fj + fl]
    sj, sl = is_sin[:, None], is_sin[None, :]
    sigma = np.where(
        sj & sl, c_diff - c_sum,
        np.where(~sj & ~sl, c_diff + c_sum,
                 np.where(sj, s_sum + s_diff, s_sum - s_diff)))
    sigma = 0.5 * (sigma + sigma.T)
    return SuffStats(mu, sigma, mom.T, K, mom.dt)


def sufficient_stats(path: PathRecord, K: int, method: str = "auto") -> SuffStats:
    """Itô vector mu and occupation Gram matrix Sigma (left-point sums)."""
    if K < 1:
        raise ValueError("K must be at least 1")
    return stats_from_moments(harmonic_moments(path, K, method), K)


def default_inference_K(T: float, alpha_min: float) -> int:
    return min(INFERENCE_K_CAP, math.ceil(4.0 * T ** (1.0 / (1.0 + 2.0 * alpha_min))))


def log_likelihood(theta: DriftSpec, stats: SuffStats) -> float:
    """theta' mu - theta' Sigma theta / 2."""
    if theta.K > stats.K:
        raise ValueError(f"theta has {theta.K} coefficients but statistics only {stats.K}")
    t = theta.padded(stats.K)
    return float(t @ stats.mu - 0.5 * t @ stats.sigma @ t)


# -- fixed hyperparameters -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PosteriorGaussian:
    """Gaussian posterior of the first K coefficients.

    With prior sd vector s and A = I + diag(s) Sigma diag(s) = R R', the
    posterior covariance is diag(s) A^-1 diag(s).
    """

    mean: np.ndarray
    log_marginal: float
    hyper: dict
    prior_sd: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.mean.size

    @cached_property
    def cov(self) -> np.ndarray:
        inv_a = linalg.cho_solve((self.chol, True), np.eye(self.K))
        cov = self.prior_sd[:, None] * inv_a * self.prior_sd[None, :]
        return 0.5 * (cov + cov.T)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((self.K, n))
        w = linalg.solve_triangular(self.chol, z, lower=True, trans="T")
        return (self.mean[:, None] + self.prior_sd[:, None] * w).T

    def summary(self) -> dict:
        return {"hyper": self.hyper, "log_marginal": self.log_marginal,
                "mean": self.mean.tolist(), "cov_diag": np.diag(self.cov).tolist()}


def posterior_fixed(stats: SuffStats, alpha: float, L: float) -> PosteriorGaussian:
    """Conjugate posterior under b ~ L sum k^(-1/2-alpha) phi_k Z_k."""
    if not L > 0:
        raise ValueError("L must be positive")
    s = prior_sd(alpha, L, stats.K)
    a = np.eye(stats.K) + s[:, None] * stats.sigma * s[None, :]
    try:
        chol = linalg.cholesky(a, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky failed for alpha={alpha}, L={L}") from exc
    u = linalg.cho_solve((chol, True), s * stats.mu)
    mean = s * u
    log_marginal = 0.5 * float((s * stats.mu) @ u) - float(np.sum(np.log(np.diag(chol))))
    return PosteriorGaussian(mean, log_marginal, {"alpha": float(alpha), "L": float(L), "K": stats.K},
                             s, chol)


# -- hierarchical mixtures --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HierPosterior:
    """Mixture of PosteriorGaussians over a hyperparameter grid."""

    grid_name: str
    grid: np.ndarray
    log_weights: np.ndarray
    components: list

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def K(self) -> int:
        return max(c.K for c in self.components)

    @cached_property
    def mean(self) -> np.ndarray:
        out = np.zeros(self.K)
        for w, c in zip(self.weights, self.components):
            out[: c.K] += w * c.mean
        return out

    def hyper_mean(self) -> float:
        return float(np.sum(self.weights * self.grid))

    def argmax(self) -> float:
        return float(self.grid[np.argmax(self.log_weights)])

    def summary(self) -> dict:
        return {"grid_name": self.grid_name, "grid": self.grid.tolist(),
                "log_weights": self.log_weights.tolist(),
                "hyper_mean": self.hyper_mean(), "mean": self.mean.tolist(),
                "log_marginals": [c.log_marginal for c in self.components]}


def _normalize(log_w: np.ndarray, what: str) -> np.ndarray:
    total = logsumexp(log_w)
    if not np.isfinite(total):
        raise NumericalError(f"{what}: all grid weights underflow (max log weight {np.max(log_w)})")
    return log_w - total


def posterior_scale_mixture(stats: SuffStats, alpha: float, T: float, grid_size: int = 32,
                            pilot_size: int = 128, window: float = 30.0) -> HierPosterior:
    """Mixture over L with the Weibull scale prior, on a geometric grid.

    A geometric pilot grid spanning the prior quantiles 0.001..0.999 (widened a
    decade below and three above) locates the region where log(prior x marginal)
    is within ``window`` nats of its maximum; the final grid covers that region.
    Weights carry the Jacobian of the log-L coordinate.
    """
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    q_lo, q_hi = scale_quantile([0.001, 0.999], alpha, T)

    def log_post(L_values):
        comps = [posterior_fixed(stats, alpha, L) for L in L_values]
        lw = scale_logpdf(L_values, alpha, T) + np.log(L_values) + np.array([c.log_marginal for c in comps])
        return lw, comps

    pilot = np.geomspace(q_lo / 10.0, q_hi * 1e3, pilot_size)
    lw_pilot, _ = log_post(pilot)
    keep = np.flatnonzero(lw_pilot >= np.max(lw_pilot) - window)
    if keep.size == 0:
        raise NumericalError("scale mixture: pilot log weights are not finite")
    lo = pilot[max(keep[0] - 1, 0)]
    hi = pilot[min(keep[-1] + 1, pilot_size - 1)]
    grid = np.geomspace(lo, hi, grid_size)
    lw, comps = log_post(grid)
    return HierPosterior("L", grid, _normalize(lw, "scale mixture"), comps)


def posterior_alpha_mixture(stats: SuffStats, T: float, grid_size: int = 32,
                            alpha_lo: float = 0.01, alpha_max: float | None = None) -> HierPosterior:
    """Mixture over alpha with the truncated regularity prior; L = 1."""
    if not T > math.e:
        raise ValueError("T must exceed e")
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    upper = math.log(T) if alpha_max is None else alpha_max
    grid = np.linspace(alpha_lo, upper, grid_size)
    comps = [posterior_fixed(stats, a, 1.0) for a in grid]
    lw = alpha_log_density(grid, T, alpha_max) + np.array([c.log_marginal for c in comps])
    return HierPosterior("alpha", grid, _normalize(lw, "alpha mixture"), comps)


# -- posterior functionals ------------------------------------------------------------

def l2_error(coeffs: np.ndarray, b0: DriftSpec) -> float:
    """||sum coeffs_k phi_k - b0||_2 including b0's coefficients beyond len(coeffs)."""
    K = max(coeffs.size, b0.K)
    d = np.zeros(K)
    d[: coeffs.size] = coeffs
    d -= b0.padded(K)
    return float(np.sqrt(np.sum(d**2)))


def posterior_ball_mass(post, b0: DriftSpec, radius: float, n: int = 1000,
                        rng: np.random.Generator | None = None):
    """Monte Carlo estimate of Pi(||b - b0||_2 >= radius | data) and its standard error."""
    if n < 100:
        raise ValueError("n must be at least 100")
    rng = np.random.default_rng() if rng is None else rng
    if isinstance(post, HierPosterior):
        counts = rng.multinomial(n, post.weights / post.weights.sum())
        pairs = [(c, m) for c, m in zip(post.components, counts) if m > 0]
    else:
        pairs = [(post, n)]
    hits = 0
    for comp, m in pairs:
        draws = comp.sample(rng, m)
        K = comp.K
        tail = float(np.sum(b0.coeffs[K:] ** 2))
        d2 = np.sum((draws - b0.padded(K)[None, :]) ** 2, axis=1) + tail
        hits += int(np.sum(d2 >= radius**2))
    p = hits / n
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / n)
