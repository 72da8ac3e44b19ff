"""Trigonometric basis of zero-mean periodic L2 functions on [0, 1).

Basis functions are indexed from k = 1 with

    phi_{2j-1}(x) = sqrt(2) sin(2 pi j x)
    phi_{2j}(x)   = sqrt(2) cos(2 pi j x)

so the frequency of phi_k is ceil(k / 2).  A drift is a finite coefficient
vector in this basis; the truncation level is ``len(coeffs)``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)
POWER_DECAY_MARGIN = 0.01


class BasisConvention(str, enum.Enum):
    laplacian_trig = "laplacian_trig"
    custom = "custom"


@dataclass(frozen=True)
class DriftSpec:
    """Drift function sum_k coeffs[k-1] * phi_k."""

    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    basis: BasisConvention = BasisConvention.laplacian_trig

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("drift coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "basis", BasisConvention(self.basis))

    @property
    def K(self) -> int:
        return self.coeffs.size

    def padded(self, K: int) -> np.ndarray:
        """Coefficients zero-padded (or cut) to length K."""
        out = np.zeros(K)
        m = min(K, self.K)
        out[:m] = self.coeffs[:m]
        return out

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs**2)))

    def to_dict(self) -> dict:
        return {"basis": self.basis.value, "coeffs": [float(v) for v in self.coeffs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DriftSpec":
        return cls(np.asarray(d["coeffs"], dtype=float), BasisConvention(d.get("basis", "laplacian_trig")))

    @classmethod
    def from_json(cls, s: str) -> "DriftSpec":
        return cls.from_dict(json.loads(s))

    def __eq__(self, other):
        if not isinstance(other, DriftSpec):
            return NotImplemented
        return self.basis == other.basis and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.basis, self.coeffs.tobytes()))


def frequency(k):
    """Frequency ceil(k/2) of basis function k."""
    return (np.asarray(k) + 1) // 2


def _check_basis(b: DriftSpec):
    if b.basis is not BasisConvention.laplacian_trig:
        raise NotImplementedError("only the laplacian_trig basis is implemented")


def eval_basis(k: int, x):
    """Evaluate phi_k at x (scalar or array)."""
    if int(k) != k or k < 1:
        raise ValueError(f"basis index must be a positive integer, got {k}")
    k = int(k)
    j = (k + 1) // 2
    arg = 2.0 * np.pi * j * np.asarray(x, dtype=float)
    out = SQRT2 * (np.sin(arg) if k % 2 == 1 else np.cos(arg))
    return float(out) if out.ndim == 0 else out


def design_matrix(x, K: int) -> np.ndarray:
    """Matrix with entries phi_k(x_i), shape (len(x), K)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((x.size, K))
    if K == 0:
        return out
    F = (K + 1) // 2
    arg = 2.0 * np.pi * np.outer(x, np.arange(1, F + 1))
    out[:, 0::2] = SQRT2 * np.sin(arg)[:, : (K + 1) // 2]
    out[:, 1::2] = SQRT2 * np.cos(arg)[:, : K // 2]
    return out


def eval_drift(b: DriftSpec, x):
    """Evaluate the drift at x (scalar or array); the empty drift is zero."""
    _check_basis(b)
    xa = np.asarray(x, dtype=float)
    if b.K == 0:
        vals = np.zeros(xa.shape)
    else:
        # reduce mod 1 so the value is exactly periodic
        vals = (design_matrix(np.mod(xa.reshape(-1), 1.0), b.K) @ b.coeffs).reshape(xa.shape)
    return float(vals) if vals.ndim == 0 else vals


def sobolev_norm(b: DriftSpec, beta: float) -> float:
    """sqrt(sum_k b_k^2 k^(2 beta))."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    k = np.arange(1, b.K + 1)
    return float(np.sqrt(np.sum(b.coeffs**2 * k ** (2.0 * beta))))


def make_test_drift(beta: float, target_norm: float, K: int, profile: str = "power_decay",
                    seed: int = 0) -> DriftSpec:
    """Build a truth drift in the beta-Sobolev space with the given L2 norm.

    ``power_decay`` uses b_k proportional to k^(-1/2 - beta - 0.01); ``random_sign``
    uses the same magnitudes with iid random signs; ``single_mode`` puts all mass
    on phi_1.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if target_norm < 0:
        raise ValueError("target_norm must be nonnegative")
    k = np.arange(1, K + 1, dtype=float)
    if profile == "power_decay":
        c = k ** (-0.5 - beta - POWER_DECAY_MARGIN)
    elif profile == "random_sign":
        signs = np.random.default_rng(seed).choice([-1.0, 1.0], size=K)
        c = signs * k ** (-0.5 - beta - POWER_DECAY_MARGIN)
    elif profile == "single_mode":
        c = np.zeros(K)
        c[0] = 1.0
    else:
        raise ValueError(f"unknown drift profile {profile!r}")
    c = c * (target_norm / np.sqrt(np.sum(c**2)))
    return DriftSpec(c)
