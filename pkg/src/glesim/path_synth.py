"""Spectral synthesis of X(t) ensembles and their empirical statistics.

Each path is a finite sum over frequency cells,

    X(t) = sum_k sqrt(2 r_hat(w_k) dw_k) [xi_k (1 - cos(w_k t)) / w_k + eta_k sin(w_k t) / w_k],

with independent standard normal xi_k, eta_k.  Its variance is
4 sum_k r_hat(w_k) dw_k (1 - cos(w_k t)) / w_k^2, the midpoint rule for the
msd integral, so the construction works in every regime, including those
where the velocity process itself does not exist.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .msd_engine import CovarianceGrid, MSDCurve, msd

__all__ = [
    "SynthesisConfig",
    "FrequencyGrid",
    "PathEnsemble",
    "BudgetError",
    "frequency_grid",
    "synthesize",
    "empirical_msd",
    "empirical_covariance",
    "time_averaged_msd",
    "increment_variances",
    "write_summary_csv",
    "dump_paths",
    "load_paths",
]

_MAGIC = b"GLEP"
_VERSION = 1


class BudgetError(ValueError):
    """The frequency grid cannot represent the requested time horizon."""


@dataclass(frozen=True)
class SynthesisConfig:
    """Time grid and frequency discretisation.

    Parameters
    ----------
    dt, n_steps, n_paths
        Uniform time grid ``t_j = j dt`` for ``j = 0..n_steps``.
    omega_max
        Cutoff Omega.  ``None`` picks the smallest power of two (from 16)
        whose truncated tail passes ``tail_budget``.
    n_modes
        Upper bound on the number of cells M.  ``None`` sizes the linear
        step from ``max_cell_phase``.
    omega_min
        Width of the first cell [0, omega_min].  Defaults to the largest
        value allowed by the fidelity horizon, 0.2 pi / T.
    max_cell_phase
        Largest allowed ``dw * T`` for a cell; the midpoint rule has a
        relative bias of roughly ``(dw T)^2 / 24``.
    tail_budget
        Allowed ``8 int_Omega^inf r_hat / w^2`` relative to msd(dt).
    rule
        ``"midpoint"`` or ``"trapezoid"`` for the cell variance.
    chunk
        Paths per synthesis block.  Fixed, so results do not depend on
        the number of threads.
    """

    dt: float = 0.1
    n_steps: int = 100
    n_paths: int = 1000
    omega_max: Optional[float] = None
    n_modes: Optional[int] = None
    omega_min: Optional[float] = None
    max_cell_phase: float = 0.25
    tail_budget: float = 1e-3
    rule: str = "midpoint"
    chunk: int = 256

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) < 1 or int(self.n_paths) < 1:
            raise ValueError("n_steps and n_paths must be at least 1")
        if self.rule not in ("midpoint", "trapezoid"):
            raise ValueError(f"rule must be 'midpoint' or 'trapezoid', got {self.rule!r}")
        if self.omega_max is not None and not self.omega_max > 0:
            raise ValueError("omega_max must be positive")
        if self.n_modes is not None and int(self.n_modes) < 2:
            raise ValueError("n_modes must be at least 2")
        if self.omega_min is not None and not self.omega_min > 0:
            raise ValueError("omega_min must be positive")
        if not self.max_cell_phase > 0 or not self.tail_budget > 0 or int(self.chunk) < 1:
            raise ValueError("max_cell_phase, tail_budget and chunk must be positive")

    @property
    def horizon(self):
        return self.dt * self.n_steps

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class FrequencyGrid:
    """Cell edges, representative frequencies and cell variances."""

    edges: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray  # 2 r_hat(w_k) dw_k
    omega_min: float
    omega_max: float
    step: float
    tail_bound: float

    @property
    def n_modes(self):
        return len(self.nodes)


def _edges(omega_min, omega_max, h):
    """[0, omega_min], geometric cells with ratio 1+h up to 1, then linear
    cells of width h up to omega_max."""
    out = [0.0, omega_min]
    if omega_min < 1.0:
        n_geo = max(1, math.ceil(math.log(min(1.0, omega_max) / omega_min) / math.log1p(h)))
        out.extend(np.geomspace(omega_min, min(1.0, omega_max), n_geo + 1)[1:])
    if omega_max > out[-1]:
        n_lin = max(1, math.ceil((omega_max - out[-1]) / h))
        out.extend(np.linspace(out[-1], omega_max, n_lin + 1)[1:])
    return np.asarray(out)


def _tail_bound(sd, omega_max):
    f = lambda u: float(sd(1.0 / u)) if u > 0 else 0.0
    v, _ = integrate.quad(f, 0.0, 1.0 / omega_max, epsabs=0, epsrel=1e-8, limit=200)
    return 8.0 * v


def frequency_grid(sd, config: SynthesisConfig) -> FrequencyGrid:
    """Build the cell grid and check the spectral budgets before sampling.

    Raises :class:`BudgetError` when the first cell is too wide for the
    horizon, when a cell is too wide to resolve (1 - cos(w T)) or when the
    spectral mass above the cutoff is over budget.
    """
    T = config.horizon
    w_min_max = 0.2 * math.pi / T
    w_min = config.omega_min if config.omega_min is not None else w_min_max
    if w_min > w_min_max * (1 + 1e-12):
        raise BudgetError(f"horizon T={T:g} exceeds 0.1*2pi/omega_min={0.2 * math.pi / w_min:g}")
    ref = msd(sd, config.dt).value
    if config.omega_max is None:
        W = 16.0
        while _tail_bound(sd, W) > config.tail_budget * ref:
            W *= 2.0
            if W > 1e7:
                raise BudgetError("no cutoff below 1e7 meets the tail budget")
    else:
        W = float(config.omega_max)
    if W <= w_min:
        raise BudgetError("omega_max must exceed omega_min")
    tail = _tail_bound(sd, W)
    if tail > config.tail_budget * ref:
        raise BudgetError(
            f"spectral tail above omega_max={W:g} contributes up to {tail:.3e}, "
            f"over budget {config.tail_budget:g} x msd(dt)={ref:.3e}"
        )
    h = config.max_cell_phase / T
    if config.n_modes is not None:
        M = int(config.n_modes)
        count = lambda hh: len(_edges(w_min, W, hh)) - 1
        if count(h) > M:
            lo, hi = h, max(h, W)
            while count(hi) > M:
                hi *= 2.0
                if hi > 1e12:
                    raise BudgetError(f"n_modes={M} cannot cover [0, {W:g}]")
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if count(mid) > M:
                    lo = mid
                else:
                    hi = mid
            h = hi
    edges = _edges(w_min, W, h)
    widths = np.diff(edges)
    if float(np.max(widths[1:]) * T) > config.max_cell_phase * (1 + 1e-9):
        raise BudgetError(
            f"cell width {np.max(widths[1:]):.3g} times T={T:g} exceeds max_cell_phase={config.max_cell_phase:g}; "
            "raise n_modes or lower omega_max"
        )
    nodes = 0.5 * (edges[:-1] + edges[1:])
    if config.rule == "midpoint":
        dens = np.asarray(sd(nodes), dtype=float)
    else:
        # trapezoid on every cell except the first, where r_hat(0) may not exist
        r_edges = np.empty_like(edges)
        r_edges[1:] = sd(edges[1:])
        dens = 0.5 * (r_edges[:-1] + r_edges[1:])
        dens[0] = float(sd(nodes[0]))
    return FrequencyGrid(edges, nodes, 2.0 * dens * widths, w_min, W, h, tail)


@dataclass
class PathEnsemble:
    dt: float
    n_steps: int
    n_paths: int
    master_seed: int
    positions: np.ndarray
    omega_max: float = math.nan
    n_modes: int = 0
    config: Optional[SynthesisConfig] = None

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)


def _basis(grid: FrequencyGrid, times):
    a = np.sqrt(grid.weights)[:, None]
    wt = np.outer(grid.nodes, times)
    inv = (1.0 / grid.nodes)[:, None]
    # 1 - cos(x) = 2 sin^2(x/2) keeps small-x accuracy
    A = a * inv * (2.0 * np.sin(0.5 * wt) ** 2)
    B = a * inv * np.sin(wt)
    return np.vstack([A, B])


def _normals(master_seed, path, n):
    gen = np.random.Generator(np.random.Philox(key=np.array([master_seed, path], dtype=np.uint64)))
    return gen.standard_normal(n)


def synthesize(sd, config: SynthesisConfig, master_seed: int = 0, threads: int = 1) -> PathEnsemble:
    """Draw ``config.n_paths`` paths on the config's time grid.

    Path ``i`` draws its 2M normals (all xi, then all eta) from a Philox
    stream keyed by ``(master_seed, i)``, and blocks of ``config.chunk``
    paths are combined with the basis matrix independently, so the output is
    bitwise identical for any ``threads``.
    """
    if int(master_seed) < 0:
        raise ValueError("master_seed must be nonnegative")
    grid = frequency_grid(sd, config)
    times = config.times
    basis = _basis(grid, times)
    n, M2 = config.n_paths, basis.shape[0]
    out = np.empty((n, len(times)))
    starts = list(range(0, n, config.chunk))

    def block(s):
        e = min(n, s + config.chunk)
        Z = np.stack([_normals(int(master_seed), i, M2) for i in range(s, e)])
        out[s:e] = Z @ basis
        return s

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(block, starts))
    else:
        for s in starts:
            block(s)
    out[:, 0] = 0.0
    return PathEnsemble(config.dt, config.n_steps, n, int(master_seed), out, grid.omega_max, grid.n_modes, config)


# ---------------------------------------------------------------------------
# empirical statistics
# ---------------------------------------------------------------------------


@dataclass
class EmpiricalMSD(MSDCurve):
    se: np.ndarray = field(default_factory=lambda: np.empty(0))
    kurtosis: np.ndarray = field(default_factory=lambda: np.empty(0))
    kurtosis_se: float = math.nan


def empirical_msd(ens: PathEnsemble) -> EmpiricalMSD:
    """Per-time mean of X^2 with SE = std(X^2)/sqrt(n), and the kurtosis of
    X(t) (3 for a Gaussian, standard error about sqrt(24/n))."""
    X = np.asarray(ens.positions, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError("empirical statistics need at least two paths")
    sq = X * X
    mean = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        kurt = np.where(mean > 0, (sq * sq).mean(axis=0) / np.where(mean > 0, mean, 1.0) ** 2, np.nan)
    t = ens.times
    return EmpiricalMSD(t, mean, se.copy(), se=se, kurtosis=kurt, kurtosis_se=math.sqrt(24.0 / n))


def time_averaged_msd(ens: PathEnsemble, lags: Sequence[int]) -> np.ndarray:
    """Time-averaged msd per path, shape (n_paths, len(lags)); lags are in steps."""
    X = np.asarray(ens.positions, dtype=float)
    out = np.empty((X.shape[0], len(lags)))
    for j, L in enumerate(lags):
        L = int(L)
        if not 0 < L <= ens.n_steps:
            raise ValueError(f"lag {L} outside 1..{ens.n_steps}")
        d = X[:, L:] - X[:, :-L]
        out[:, j] = (d * d).mean(axis=1)
    return out


def increment_variances(ens: PathEnsemble, lag: int):
    """Sample variance of X(t+lag)-X(t) at every start index, with its SE."""
    X = np.asarray(ens.positions, dtype=float)
    d = X[:, lag:] - X[:, :-lag]
    sq = d * d
    return sq.mean(axis=0), sq.std(axis=0, ddof=1) / math.sqrt(X.shape[0])


def empirical_covariance(ens: PathEnsemble, times: Optional[Sequence[float]] = None) -> CovarianceGrid:
    """Sample E[X(t)X(s)] (the mean is zero by construction) with entrywise
    standard errors in ``err``."""
    X = np.asarray(ens.positions, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError("empirical statistics need at least two paths")
    all_t = ens.times
    if times is None:
        idx = np.arange(len(all_t))
    else:
        idx = np.rint(np.asarray(times, dtype=float) / ens.dt).astype(int)
        if np.any(idx < 0) or np.any(idx > ens.n_steps) or not np.allclose(idx * ens.dt, times, rtol=1e-9, atol=1e-12):
            raise ValueError("requested times must lie on the ensemble grid")
    Y = X[:, idx]
    k = len(idx)
    cov = np.empty((k, k))
    err = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            p = Y[:, i] * Y[:, j]
            cov[i, j] = cov[j, i] = p.mean()
            err[i, j] = err[j, i] = p.std(ddof=1) / math.sqrt(n)
    return CovarianceGrid(all_t[idx], cov, err)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _atomic_write(path, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_summary_csv(path, emp: EmpiricalMSD, quad: Optional[Sequence[float]] = None):
    """Columns t, empirical_msd, se, quadrature_msd (17 significant digits)."""
    lines = ["t,empirical_msd,se,quadrature_msd"]
    q = np.full(len(emp.times), np.nan) if quad is None else np.asarray(quad, dtype=float)
    for row in zip(emp.times, emp.values, emp.se, q):
        lines.append(",".join(f"{float(v):.17g}" for v in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def dump_paths(path, ens: PathEnsemble):
    """Raw binary layout, little endian: b"GLEP", u32 version, u64 n_paths,
    u64 n_steps, f64 dt, then n_paths x (n_steps+1) f64 positions row-major."""
    head = _MAGIC + struct.pack("<IQQd", _VERSION, ens.n_paths, ens.n_steps, ens.dt)
    body = np.ascontiguousarray(ens.positions, dtype="<f8").tobytes()
    _atomic_write(path, head + body)


def load_paths(path) -> PathEnsemble:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError("not a path dump (bad magic)")
    version, n_paths, n_steps, dt = struct.unpack_from("<IQQd", raw, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported dump version {version}")
    off = 4 + struct.calcsize("<IQQd")
    pos = np.frombuffer(raw, dtype="<f8", offset=off)
    if pos.size != n_paths * (n_steps + 1):
        raise ValueError("truncated path dump")
    return PathEnsemble(dt, int(n_steps), int(n_paths), -1, pos.reshape(n_paths, n_steps + 1).astype(float))
