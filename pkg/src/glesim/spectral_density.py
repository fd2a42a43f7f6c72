"""Spectral densities of the stationary velocity in the four (m, lambda) regimes.

With K_hat = 2 F_cos and K_hat_plus = F_cos - i F_sin the density is

    r_hat(w) = (2 lam + 2 beta F_cos) / (2 pi [(lam + beta F_cos)^2 + (m w - beta F_sin)^2])

for m > 0 or lam > 0, and

    r_hat(w) = (2 / (pi beta)) F_cos / (F_cos^2 + F_sin^2)

when m = lam = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .kernels import KernelSpec, PowerTail, classify_tail, satisfies_assumption2
from .oscillatory_transform import (
    TransformTable,
    _check_grid,
    _richardson3,
    fourier_cos,
    fourier_sin,
)

__all__ = [
    "Regime",
    "GLEParams",
    "SpectralDensity",
    "SpectralTable",
    "InadmissibleError",
    "rhat",
    "rhat_smallomega_scaled",
    "build_table",
    "l1_norm",
    "tail_slope",
]


class InadmissibleError(ValueError):
    """The kernel/parameter combination has no well-defined spectral density."""


class Regime(enum.Enum):
    MposLzero = "m>0,lambda=0"
    MposLpos = "m>0,lambda>0"
    MzeroLpos = "m=0,lambda>0"
    MzeroLzero = "m=0,lambda=0"


@dataclass(frozen=True)
class GLEParams:
    m: float = 1.0
    lam: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        for name, v in (("m", self.m), ("lambda", self.lam)):
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be >= 0 and finite, got {v}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be > 0 and finite, got {self.beta}")

    def regime(self) -> Regime:
        if self.m > 0:
            return Regime.MposLpos if self.lam > 0 else Regime.MposLzero
        return Regime.MzeroLpos if self.lam > 0 else Regime.MzeroLzero


class SpectralDensity:
    """r_hat for one kernel and parameter triple.

    Transform values are cached per frequency (keyed by the exact float),
    so repeated quadratures over the same nodes do not recompute them.
    """

    def __init__(self, kernel: KernelSpec, params: GLEParams, method: str = "auto", tol=None):
        if not isinstance(kernel, KernelSpec):
            kernel = KernelSpec(kernel)
        self.kernel = kernel
        self.params = params
        self.regime = params.regime()
        self.method = method
        self.tol = tol
        self._cache = {}
        if self.regime is Regime.MzeroLzero and not satisfies_assumption2(kernel):
            raise InadmissibleError("m = lambda = 0 requires a convex kernel satisfying condition V or VI")
        self._vectorised = method != "numeric" and kernel.has_closed_form

    # -- transforms ---------------------------------------------------------
    def transforms(self, omega):
        """(F_cos, F_sin) at |omega|; arrays in, arrays out."""
        w = np.abs(np.asarray(omega, dtype=float))
        if np.any(w == 0):
            raise ValueError("r_hat is evaluated at nonzero frequencies only; use rhat_smallomega_scaled for the limit")
        if self._vectorised:
            fc, fs = self.kernel.closed_form_transforms(w)
            return np.asarray(fc, dtype=float), np.asarray(fs, dtype=float)
        flat = w.ravel()
        fc = np.empty_like(flat)
        fs = np.empty_like(flat)
        for i, x in enumerate(flat):
            key = float(x)
            hit = self._cache.get(key)
            if hit is None:
                hit = (
                    fourier_cos(self.kernel, key, self.tol, self.method).value,
                    fourier_sin(self.kernel, key, self.tol, self.method).value,
                )
                self._cache[key] = hit
            fc[i], fs[i] = hit
        return fc.reshape(w.shape), fs.reshape(w.shape)

    def from_transforms(self, w, fc, fs):
        m, lam, beta = self.params.m, self.params.lam, self.params.beta
        w = np.abs(w)
        if self.regime is Regime.MzeroLzero:
            den = fc * fc + fs * fs
            num = (2.0 / (math.pi * beta)) * fc
        else:
            den = 2.0 * math.pi * ((lam + beta * fc) ** 2 + (m * w - beta * fs) ** 2)
            num = 2.0 * lam + 2.0 * beta * fc
        if np.any(den <= 0) or np.any(fc < 0):
            raise InadmissibleError("nonpositive F_cos or denominator: kernel is not admissible")
        return num / den

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        fc, fs = self.transforms(w)
        out = self.from_transforms(w, fc, fs)
        return float(out) if out.ndim == 0 else out

    @property
    def integrable(self):
        return self.params.m > 0

    @property
    def bound(self):
        """Uniform upper bound 1/(pi lambda) when lambda > 0."""
        return 1.0 / (math.pi * self.params.lam) if self.params.lam > 0 else math.inf

    def cache_size(self):
        return len(self._cache)


def rhat(sd: SpectralDensity, omega):
    """r_hat(omega) for omega != 0 (even in omega)."""
    return sd(omega)


def rhat_smallomega_scaled(sd: SpectralDensity, omegas=None):
    """Limit of r_hat(omega) (integrable K) or r_hat(omega)/omega**(1-alpha)
    (power tail) as omega -> 0, with the last extrapolation increment as
    its uncertainty.  Returns ``(limit, uncertainty, exponent)``."""
    tail = classify_tail(sd.kernel)
    om = np.asarray(omegas if omegas is not None else 1e-3 * 0.5 ** np.arange(12), dtype=float)
    vals = sd(om)
    expo = 0.0
    if isinstance(tail, PowerTail):
        expo = 1.0 - tail.alpha
        vals = vals / om**expo
    lim, unc = _richardson3(vals)
    return lim, unc, expo


@dataclass
class SpectralTable(TransformTable):
    rhat: np.ndarray = field(default_factory=lambda: np.empty(0))

    def columns(self):
        cols = super().columns()
        return {"omega": cols["omega"], "f_cos": cols["f_cos"], "f_sin": cols["f_sin"], "rhat": self.rhat, "err_est": cols["err_est"]}


def build_table(sd: SpectralDensity, omega_grid) -> SpectralTable:
    om = _check_grid(omega_grid)
    if om.size == 0:
        e = np.empty(0)
        return SpectralTable(e, e.copy(), e.copy(), e.copy(), e.copy())
    fc, fs = sd.transforms(om)
    r = sd.from_transforms(om, fc, fs)
    if sd._vectorised:
        err = 4 * np.finfo(float).eps * np.maximum(np.abs(fc), np.abs(fs))
    else:
        err = np.array([max(fourier_cos(sd.kernel, w, sd.tol, sd.method).err_est,
                            fourier_sin(sd.kernel, w, sd.tol, sd.method).err_est) for w in om])
    return SpectralTable(om, fc, fs, err, r)


def _panels(lo=1e-14, hi=1e6, per_decade=1):
    n = int(round(math.log10(hi / lo) * per_decade))
    return np.geomspace(lo, hi, n + 1)


def l1_norm(sd, lo=1e-14, hi=1e6):
    """int_R r_hat (or any even density exposing __call__).  Returns (value, err)."""
    edges = _panels(lo, hi)
    f = lambda w: float(sd(w))
    total = err = 0.0
    # [0, lo] by the midpoint value (r_hat is bounded near 0 for integrable regimes)
    total += lo * f(lo)
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)
        total += v
        err += e
    # [hi, inf) through u = 1/w, where r_hat(1/u)/u^2 stays bounded
    v, e = integrate.quad(lambda u: f(1.0 / u) / (u * u) if u > 0 else 0.0, 0.0, 1.0 / hi,
                          epsabs=0, epsrel=1e-10, limit=200)
    return 2 * (total + v), 2 * (err + e + lo * f(lo))


def tail_slope(sd: SpectralDensity, w_hi=1e6):
    """Log-log slope of r_hat over the decade [w_hi/10, w_hi]."""
    w = np.geomspace(w_hi / 10, w_hi, 11)
    r = sd(w)
    return float(np.polyfit(np.log(w), np.log(r), 1)[0])
