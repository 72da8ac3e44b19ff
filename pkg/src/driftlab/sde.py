"""Simulation of dX = b(X) dt + dB, X_0 = 0, and path functionals.

Stochastic sums use left-point (Ito) evaluation throughout.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numba
import numpy as np

from .basis import DriftSpec, SQRT2, eval_drift

MAGIC = b"DLAB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHddQQQ")
_CHUNK = 1 << 20


class SimulationError(RuntimeError):
    pass


def trig_tables(b: DriftSpec):
    """Split coefficients into (sin, cos) amplitude arrays indexed by frequency 1..F."""
    F = (b.K + 1) // 2
    s = np.zeros(F)
    c = np.zeros(F)
    s[: (b.K + 1) // 2] = SQRT2 * b.coeffs[0::2]
    c[: b.K // 2] = SQRT2 * b.coeffs[1::2]
    return s, c


@numba.njit(cache=True, inline="always")
def _drift_at(x, s_amp, c_amp):
    th = 2.0 * np.pi * (x - np.floor(x))
    s1 = np.sin(th)
    c1 = np.cos(th)
    s = s1
    c = c1
    acc = 0.0
    for j in range(s_amp.size):
        acc += s_amp[j] * s + c_amp[j] * c
        s, c = s * c1 + c * s1, c * c1 - s * s1
    return acc


@numba.njit(cache=True)
def _em_chunk(x, start, noise, dt, s_amp, c_amp):
    sq = np.sqrt(dt)
    for n in range(noise.size):
        i = start + n
        xi = x[i]
        xn = xi + _drift_at(xi, s_amp, c_amp) * dt + sq * noise[n]
        if not np.isfinite(xn):
            return i + 1
        x[i + 1] = xn
    return -1


@numba.njit(cache=True)
def _drift_values(x, s_amp, c_amp):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = _drift_at(x[i], s_amp, c_amp)
    return out


@dataclass(frozen=True, eq=False)
class PathRecord:
    T: float
    dt: float
    x: np.ndarray
    drift: DriftSpec
    seed: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        N = x.size - 1
        if N < 1 or abs(N * self.dt - self.T) > 1e-12 * max(1.0, self.T):
            raise ValueError(f"inconsistent path: N={N}, dt={self.dt}, T={self.T}")
        if x[0] != 0.0:
            raise ValueError("paths start at X_0 = 0")
        if not np.all(np.isfinite(x)):
            raise SimulationError("path contains non-finite values")

    @property
    def N(self) -> int:
        return self.x.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt


def n_steps(T: float, dt: float) -> int:
    if not (dt > 0 and dt <= T):
        raise ValueError(f"need 0 < dt <= T, got dt={dt}, T={T}")
    N = int(round(T / dt))
    if abs(N * dt - T) > 1e-12 * max(1.0, T):
        raise ValueError(f"T={T} is not a whole number of steps of dt={dt}")
    return N


def simulate_path(b: DriftSpec, T: float, dt: float = 1e-3, seed: int = 0) -> PathRecord:
    """Euler-Maruyama path on [0, T]; deterministic given the seed."""
    N = n_steps(T, dt)
    s_amp, c_amp = trig_tables(b)
    rng = np.random.default_rng(np.uint64(seed))
    x = np.zeros(N + 1)
    for start in range(0, N, _CHUNK):
        noise = rng.standard_normal(min(_CHUNK, N - start))
        bad = _em_chunk(x, start, noise, dt, s_amp, c_amp)
        if bad >= 0:
            raise SimulationError(f"non-finite state at step {bad}")
    return PathRecord(T=float(T), dt=float(dt), x=x, drift=b, seed=int(seed))


def drift_along_path(b: DriftSpec, x: np.ndarray) -> np.ndarray:
    s_amp, c_amp = trig_tables(b)
    return _drift_values(np.ascontiguousarray(x, dtype=float), s_amp, c_amp)


# -- occupation measure ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OccupationDensity:
    """Piecewise-constant density on [0, 1) given at bin centers."""

    bins: int
    values: np.ndarray
    normalization: float

    @property
    def width(self) -> float:
        return 1.0 / self.bins

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) / self.bins

    def mass(self) -> float:
        return float(np.sum(self.values) * self.width)

    def normalized(self) -> "OccupationDensity":
        return OccupationDensity(self.bins, self.values / self.normalization, 1.0)


def periodic_local_time(path: PathRecord, bins: int = 256) -> OccupationDensity:
    """Histogram estimate of the periodic local time: mass dt per left point."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    frac = np.mod(path.x[:-1], 1.0)
    idx = np.minimum((frac * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    return OccupationDensity(bins, counts * path.dt * bins, path.N * path.dt)


def _cumulative_simpson(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral at even-indexed nodes of a uniform grid (Simpson)."""
    pieces = h / 3.0 * (y[:-2:2] + 4.0 * y[1:-1:2] + y[2::2])
    return np.concatenate(([0.0], np.cumsum(pieces)))


def invariant_density(b: DriftSpec, grid: int = 256) -> OccupationDensity:
    """Stationary density proportional to exp(2 int_0^x b), at ``grid`` bin centers."""
    if grid < 2:
        raise ValueError("grid must be at least 2")
    # fine lattice containing every bin edge and center
    refine = max(32, 4 * b.K)
    n = 2 * grid * refine
    xs = np.linspace(0.0, 1.0, n + 1)
    cum = _cumulative_simpson(eval_drift(b, xs), 1.0 / n)  # at xs[::2]
    centers = cum[refine // 2 :: refine][:grid]
    rho = np.exp(2.0 * centers)
    rho /= np.sum(rho) / grid
    return OccupationDensity(grid, rho, 1.0)


# -- scale function ------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _cumulative_integral(f, pts: np.ndarray, per_unit: int) -> np.ndarray:
    """int_0^p f for each p, composite 24-point Gauss-Legendre on a lattice of step 1/per_unit."""
    h = 1.0 / per_unit
    pts = np.asarray(pts, dtype=float)
    lo = min(0.0, float(pts.min()))
    hi = max(0.0, float(pts.max()))
    i0 = math.floor(lo / h)
    i1 = math.ceil(hi / h)
    edges = np.arange(i0, i1 + 1) * h
    mids = 0.5 * (edges[:-1] + edges[1:])
    nodes = mids[:, None] + 0.5 * h * _GL_X[None, :]
    piece = 0.5 * h * (f(nodes.ravel()).reshape(nodes.shape) @ _GL_W)
    cum_edges = np.concatenate(([0.0], np.cumsum(piece)))
    cum_edges -= cum_edges[-i0]  # origin at x = 0
    j = np.clip(np.floor(pts / h).astype(np.int64) - i0, 0, edges.size - 1)
    a = edges[j]
    half = 0.5 * (pts - a)
    part_nodes = (a + half)[:, None] + half[:, None] * _GL_X[None, :]
    part = half * (f(part_nodes.ravel()).reshape(part_nodes.shape) @ _GL_W)
    return cum_edges[j] + part


def scale_function(b: DriftSpec, x):
    """s(x) = int_0^x exp(-2 int_0^xi b) dxi, by nested composite quadrature."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    per_unit = max(4, (b.K + 1) // 2)

    def outer(xi):
        return np.exp(-2.0 * _cumulative_integral(lambda u: eval_drift(b, u), xi, per_unit))

    out = _cumulative_integral(outer, xa, per_unit)
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


# -- empirical L2 geometry -----------------------------------------------------

def _values_on_path(f, x: np.ndarray) -> np.ndarray:
    if isinstance(f, DriftSpec):
        return drift_along_path(f, x)
    return np.asarray(f(x), dtype=float) * np.ones_like(x)


def empirical_l2_distance(path: PathRecord, b, b0) -> float:
    """(1/T) int_0^T (b - b0)(X_t)^2 dt by a left-point Riemann sum.

    ``b`` and ``b0`` are DriftSpecs or vectorized callables.
    """
    if isinstance(b, DriftSpec) and isinstance(b0, DriftSpec):
        if b.basis != b0.basis:
            raise ValueError("drifts must share a basis")
        K = max(b.K, b0.K)
        diff = DriftSpec(b.padded(K) - b0.padded(K), b.basis)
        vals = drift_along_path(diff, path.x[:-1])
    else:
        xl = path.x[:-1]
        vals = _values_on_path(b, xl) - _values_on_path(b0, xl)
    return float(np.sum(vals**2) * path.dt / path.T)


# -- persistence ---------------------------------------------------------------

def save_path(path: PathRecord, filename) -> None:
    meta = path.drift.to_json().encode("utf-8")
    with open(filename, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, path.T, path.dt, path.N, path.seed, len(meta)))
        fh.write(meta)
        fh.write(np.ascontiguousarray(path.x, dtype="<f8").tobytes())


def load_path(filename) -> PathRecord:
    with open(filename, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{filename}: truncated header")
        magic, version, T, dt, N, seed, mlen = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{filename}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"{filename}: unsupported version {version}")
        drift = DriftSpec.from_json(fh.read(mlen).decode("utf-8"))
        x = np.frombuffer(fh.read(8 * (N + 1)), dtype="<f8")
    if x.size != N + 1:
        raise ValueError(f"{filename}: expected {N + 1} values, found {x.size}")
    return PathRecord(T=T, dt=dt, x=x.astype(float), drift=drift, seed=seed)


def export_csv(path: PathRecord, filename, stride: int = 1) -> None:
    with open(filename, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"])
        for t, v in zip(path.times[::stride], path.x[::stride]):
            w.writerow([repr(float(t)), repr(float(v))])
