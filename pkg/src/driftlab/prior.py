"""Gaussian series priors and the two hyperpriors (scale and regularity)."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .basis import DriftSpec, sobolev_norm


@dataclass(frozen=True)
class GpPriorSpec:
    """W = L * sum_k sqrt(lambda_k) phi_k Z_k truncated at K.

    ``eigen_mode="simplified"`` uses sqrt(lambda_k) = k^(-1/2-alpha); ``"laplacian"``
    uses the Laplacian eigenvalues ((4 pi^2 ceil(k/2)^2)^(alpha+1/2) + kappa)^-1.
    """

    alpha: float
    L: float = 1.0
    K: int = 1000
    eigen_mode: str = "simplified"
    kappa: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.L < 0:
            raise ValueError("L must be nonnegative")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.eigen_mode not in ("simplified", "laplacian"):
            raise ValueError(f"unknown eigen_mode {self.eigen_mode!r}")
        if self.eigen_mode == "laplacian" and not self.kappa > 0:
            raise ValueError("kappa must be positive")


def sqrt_lambda(k, spec: GpPriorSpec):
    """Prior standard deviation factor sqrt(lambda_k) (scalar or array k)."""
    ka = np.asarray(k)
    if np.any(ka < 1):
        raise ValueError("basis index must be >= 1")
    kf = ka.astype(float)
    if spec.eigen_mode == "simplified":
        out = kf ** (-0.5 - spec.alpha)
    else:
        j = np.ceil(kf / 2.0)
        out = ((4.0 * np.pi**2 * j**2) ** (spec.alpha + 0.5) + spec.kappa) ** -0.5
    return float(out) if out.ndim == 0 else out


def prior_sd(alpha: float, L: float, K: int) -> np.ndarray:
    """Coefficient standard deviations L k^(-1/2-alpha), k = 1..K (simplified mode)."""
    return L * np.arange(1, K + 1, dtype=float) ** (-0.5 - alpha)


def sample_gp(spec: GpPriorSpec, rng: np.random.Generator) -> DriftSpec:
    z = rng.standard_normal(spec.K)
    return DriftSpec(spec.L * sqrt_lambda(np.arange(1, spec.K + 1), spec) * z)


def default_prior_truncation(alpha: float, T: float) -> int:
    return max(1000, math.ceil(10.0 * T ** (1.0 / (1.0 + 2.0 * alpha))))


# -- scale hyperprior: L = E^(1/2+alpha) / sqrt(T), E ~ Exp(1) --------------

def _weibull_params(alpha: float, T: float):
    if not T > 0:
        raise ValueError("T must be positive")
    return 2.0 / (1.0 + 2.0 * alpha), T**-0.5


def sample_scale(alpha: float, T: float, rng: np.random.Generator, size=None):
    """Draw L = E^(1/2+alpha)/sqrt(T); Weibull(shape 2/(1+2 alpha), scale T^-1/2)."""
    _weibull_params(alpha, T)
    e = rng.standard_exponential(size)
    return e ** (0.5 + alpha) / math.sqrt(T)


def scale_logpdf(L, alpha: float, T: float):
    shape, scale = _weibull_params(alpha, T)
    z = np.asarray(L, dtype=float) / scale
    with np.errstate(divide="ignore"):
        out = np.log(shape / scale) + (shape - 1.0) * np.log(z) - z**shape
    return np.where(z > 0, out, -np.inf)


def scale_survival(L, alpha: float, T: float):
    shape, scale = _weibull_params(alpha, T)
    return np.exp(-(np.asarray(L, dtype=float) / scale) ** shape)


def scale_quantile(q, alpha: float, T: float):
    shape, scale = _weibull_params(alpha, T)
    return scale * (-np.log1p(-np.asarray(q, dtype=float))) ** (1.0 / shape)


# -- regularity hyperprior: density prop. to exp(-T^(1/(1+2x))) on [0, alpha_max]

def _check_T(T: float):
    if not T > math.e:
        raise ValueError(f"T must exceed e for the regularity prior, got {T}")


def _alpha_kernel(x, T: float):
    return np.exp(-(T ** (1.0 / (1.0 + 2.0 * np.asarray(x, dtype=float)))))


@functools.lru_cache(maxsize=256)
def alpha_normalizer(T: float, alpha_max: float | None = None) -> float:
    """C_T, the integral of exp(-T^(1/(1+2x))) over [0, alpha_max] (default log T)."""
    _check_T(T)
    upper = math.log(T) if alpha_max is None else float(alpha_max)
    val, _ = integrate.quad(lambda x: float(_alpha_kernel(x, T)), 0.0, upper,
                            epsabs=1e-10, epsrel=1e-12, limit=500)
    return val


def alpha_log_density(x, T: float, alpha_max: float | None = None):
    _check_T(T)
    upper = math.log(T) if alpha_max is None else float(alpha_max)
    xa = np.asarray(x, dtype=float)
    inside = (xa >= 0) & (xa <= upper)
    with np.errstate(over="ignore"):
        logk = -(T ** (1.0 / (1.0 + 2.0 * np.where(inside, xa, 1.0))))
    return np.where(inside, logk - math.log(alpha_normalizer(T, alpha_max)), -np.inf)


def alpha_density(x, T: float, alpha_max: float | None = None):
    """Return (density at x, normalizer C_T); density vanishes off [0, alpha_max]."""
    dens = np.exp(alpha_log_density(x, T, alpha_max))
    return (float(dens) if np.ndim(dens) == 0 else dens), alpha_normalizer(T, alpha_max)


@dataclass(frozen=True)
class HyperPriorSpec:
    """One of: fixed(alpha, L), scale_weibull(alpha, T), alpha_truncated(T, alpha_max)."""

    kind: str
    alpha: float | None = None
    L: float | None = None
    T: float | None = None
    alpha_max: float | None = None

    def __post_init__(self):
        if self.kind == "fixed":
            if self.alpha is None or self.L is None:
                raise ValueError("fixed hyperprior needs alpha and L")
        elif self.kind == "scale_weibull":
            if self.alpha is None or self.T is None:
                raise ValueError("scale_weibull hyperprior needs alpha and T")
        elif self.kind == "alpha_truncated":
            if self.T is None:
                raise ValueError("alpha_truncated hyperprior needs T")
            _check_T(self.T)
            if self.alpha_max is None:
                object.__setattr__(self, "alpha_max", math.log(self.T))
        else:
            raise ValueError(f"unknown hyperprior kind {self.kind!r}")

    def sample(self, rng: np.random.Generator, size: int):
        """Draw (alpha, L) arrays of hyperparameters."""
        if self.kind == "fixed":
            return np.full(size, float(self.alpha)), np.full(size, float(self.L))
        if self.kind == "scale_weibull":
            return np.full(size, float(self.alpha)), sample_scale(self.alpha, self.T, rng, size)
        return sample_alpha(self.T, rng, size, self.alpha_max), np.ones(size)

    def to_json(self) -> str:
        return json.dumps({k: v for k, v in asdict(self).items() if v is not None})

    @classmethod
    def from_json(cls, s: str) -> "HyperPriorSpec":
        return cls(**json.loads(s))


def sample_alpha(T: float, rng: np.random.Generator, size: int, alpha_max: float | None = None):
    """Inverse-CDF draws from the regularity prior (CDF tabulated by quadrature)."""
    upper = math.log(T) if alpha_max is None else float(alpha_max)
    grid = np.linspace(0.0, upper, 4001)
    dens = _alpha_kernel(grid, T)
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    u = rng.uniform(size=size)
    return np.interp(u, cdf, grid)


def rkhs_norm(h: DriftSpec, alpha: float, L: float) -> float:
    """RKHS norm of h for W^{alpha,L}: ||h||_{2,1/2+alpha} / L."""
    if not L > 0:
        raise ValueError("L must be positive")
    return sobolev_norm(h, 0.5 + alpha) / L
