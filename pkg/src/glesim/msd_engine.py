"""Mean-squared displacement, covariance and velocity autocorrelation by
quadrature against the spectral density.

    E[X(t)^2] = 2 int_R (1 - cos(t w)) / w^2 r_hat(w) dw
              = 4 int_0^inf (1 - cos(t w)) / w^2 r_hat(w) dw

Below w* = 1/t the integrand is written as t^2/2 sinc^2(t w/2) r_hat(w),
which has no cancellation.  Above w* it is split into the plain part
int r_hat/w^2 and the oscillatory part int cos(t w) r_hat/w^2, each
integrated on geometric panels (QUADPACK's trigonometric weight handles the
oscillation), with QAWF for the final semi-infinite piece.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .kernels import Integrable, PowerTail, classify_tail, satisfies_assumption2
from .spectral_density import GLEParams, Regime, SpectralDensity

__all__ = [
    "MSDValue",
    "MSDCurve",
    "FitResult",
    "CovarianceGrid",
    "PredictionUnavailable",
    "msd",
    "msd_scaled",
    "msd_curve",
    "covariance",
    "covariance_grid",
    "fit_exponent",
    "predict_exponent",
    "acf_velocity",
    "acf_msd_crosscheck",
    "kolmogorov_constant",
]

_EPSREL = 1e-11
_W_HIGH = 1e4  # start of the semi-infinite tail (or w*, whichever is larger)


class PredictionUnavailable(ValueError):
    """The dichotomy theorem does not cover this kernel/regime pair."""


@dataclass(frozen=True)
class MSDValue:
    value: float
    err_est: float
    converged: bool = True

    def __float__(self):
        return float(self.value)


def _scalar(f):
    return lambda w: float(f(w))


def _quad(f, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, full_output=1, **kw)
    val, err = out[0], out[1]
    ok = len(out) < 4  # a fourth element carries a warning message
    return val, err, ok


def _low_part(f, t, w_star):
    """4 int_0^{w*} t^2/2 sinc^2(t w/2) f(w) dw on panels shrinking to 0."""

    def g(w):
        x = 0.5 * t * w
        s = math.sin(x) / x if x != 0 else 1.0
        return 0.5 * t * t * s * s * f(w) if w > 0 else 0.0

    edges = np.concatenate([[0.0], w_star * np.logspace(-12, 0, 13)])
    val = err = 0.0
    ok = True
    for a, b in zip(edges[:-1], edges[1:]):
        v, e, o = _quad(g, a, b, epsabs=0, epsrel=_EPSREL, limit=200)
        val, err, ok = val + v, err + e, ok and o
    return 4 * val, 4 * err, ok


def _high_part(f, t, w_star, w_high):
    """4 int_{w*}^inf (1 - cos(t w)) f(w)/w^2 dw, split into plain minus
    oscillatory parts."""
    h = lambda w: f(w) / (w * w)
    val = err = 0.0
    ok = True
    if w_high > w_star:
        n = max(1, math.ceil(math.log(w_high / w_star) / math.log(4.0)))
        edges = np.geomspace(w_star, w_high, n + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            p, ep, o1 = _quad(h, a, b, epsabs=0, epsrel=_EPSREL, limit=200)
            q, eq, o2 = _quad(h, a, b, weight="cos", wvar=t, epsabs=1e-300, epsrel=_EPSREL, limit=400)
            val += p - q
            err += ep + eq
            ok = ok and o1 and o2
    top = max(w_high, w_star)
    # plain tail through u = 1/w: int_0^{1/top} f(1/u) du
    p, ep, o1 = _quad(lambda u: f(1.0 / u) if u > 0 else 0.0, 0.0, 1.0 / top, epsabs=0, epsrel=_EPSREL, limit=200)
    q, eq = _fourier_tail(h, top, t, 1e-13 * max(abs(val), abs(p)))
    val += p - q
    err += ep + eq
    return 4 * val, 4 * err, ok and o1


def _fourier_tail(h, top, x, epsabs):
    """int_top^inf h(w) cos(x w) dw by QAWF, falling back on the
    second-mean-value bound 2 h(top)/x for a decreasing envelope."""
    bound = 2 * abs(h(top)) / x
    q, eq, ok = _quad(h, top, np.inf, weight="cos", wvar=x, epsabs=max(epsabs, 1e-300), limit=200, limlst=200)
    if not (math.isfinite(q) and math.isfinite(eq)) or eq > bound:
        return 0.0, bound
    return q, eq


def _msd_of_density(f: Callable, t: float, w_high: float = _W_HIGH) -> MSDValue:
    if t == 0:
        return MSDValue(0.0, 0.0)
    if not (t > 0 and math.isfinite(t)):
        raise ValueError(f"time must be positive and finite, got {t}")
    w_star = 1.0 / t
    lo, elo, _ = _low_part(f, t, w_star)
    hi, ehi, _ = _high_part(f, t, w_star, w_high)
    value, err = lo + hi, elo + ehi
    return MSDValue(value, err, bool(err <= 1e-8 * abs(value)))


def msd(sd, t: float, tol: Optional[float] = None) -> MSDValue:
    """E[X(t)^2] for a spectral density (any even callable works).

    ``converged`` is False when a quadrature reported trouble or the error
    estimate exceeds ``tol`` (absolute) when one is given.
    """
    res = _msd_of_density(_scalar(sd), float(t))
    if tol is not None and res.err_est > tol:
        return MSDValue(res.value, res.err_est, False)
    return res


def msd_scaled(sd, t: float) -> MSDValue:
    """E[X(t)^2] through the substitution z = t w:
    t * 4 int_0^inf (1 - cos z)/z^2 r_hat(z/t) dz."""
    t = float(t)
    f = _scalar(sd)
    g = lambda z: f(z / t)
    res = _msd_of_density(g, 1.0, w_high=max(_W_HIGH * t, 1e2))
    return MSDValue(t * res.value, t * res.err_est, res.converged)


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------


def covariance(sd, t: float, s: float, method: str = "identity") -> MSDValue:
    """E[X(t) X(s)] = int_R [cos((t-s)w) - cos(tw) - cos(sw) + 1]/w^2 r_hat dw.

    ``identity`` uses (msd(t) + msd(s) - msd(|t-s|))/2, which follows from
    the integrand; ``direct`` integrates the covariance integrand itself.
    """
    t, s = float(t), float(s)
    if t < 0 or s < 0:
        raise ValueError("covariance is defined for t, s >= 0")
    if t == 0 or s == 0:
        return MSDValue(0.0, 0.0)
    if method == "identity":
        a, b, c = msd(sd, t), msd(sd, s), msd(sd, abs(t - s))
        return MSDValue(0.5 * (a.value + b.value - c.value), 0.5 * (a.err_est + b.err_est + c.err_est),
                        a.converged and b.converged and c.converged)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    return _covariance_direct(_scalar(sd), t, s)


def _cov_kernel(t, s, w):
    """[cos((t-s)w) - cos(tw) - cos(sw) + 1] / w^2 without cancellation."""
    def v(x):
        y = 0.5 * x * w
        return 0.5 * x * x * (math.sin(y) / y) ** 2 if y != 0 else 0.5 * x * x
    return v(t) + v(s) - v(t - s)


def _covariance_direct(f, t, s):
    """Integrate the covariance integrand on panels up to a cutoff, then
    treat the tail with trigonometric weights."""
    tmax = max(t, s)
    w_cut = 64.0 * math.pi / tmax
    edges = np.concatenate([[0.0], w_cut * np.logspace(-12, 0, 25)])
    g = lambda w: _cov_kernel(t, s, w) * f(w) if w > 0 else 0.5 * (t * t + s * s - (t - s) ** 2) * f(1e-300)
    val = err = 0.0
    ok = True
    for a, b in zip(edges[:-1], edges[1:]):
        v, e, o = _quad(g, a, b, epsabs=0, epsrel=_EPSREL, limit=500)
        val, err, ok = val + v, err + e, ok and o
    h = lambda w: f(w) / (w * w)
    top = max(_W_HIGH, w_cut)
    if top > w_cut:
        n = max(1, math.ceil(math.log(top / w_cut) / math.log(4.0)))
        pe = np.geomspace(w_cut, top, n + 1)
        for a, b in zip(pe[:-1], pe[1:]):
            p, ep, _ = _quad(h, a, b, epsabs=0, epsrel=_EPSREL, limit=200)
            parts = [p]
            errs = ep
            for x, sign in ((t - s, 1.0), (t, -1.0), (s, -1.0)):
                if x == 0:
                    q, eq = p, 0.0
                else:
                    q, eq, _ = _quad(h, a, b, weight="cos", wvar=abs(x), epsabs=1e-300, epsrel=_EPSREL, limit=400)
                parts.append(sign * q)
                errs += eq
            val += sum(parts)
            err += errs
    p, ep, _ = _quad(lambda u: f(1.0 / u) if u > 0 else 0.0, 0.0, 1.0 / top, epsabs=0, epsrel=_EPSREL, limit=200)
    tail = p
    for x, sign in ((t - s, 1.0), (t, -1.0), (s, -1.0)):
        if x == 0:
            tail += sign * p
            continue
        q, eq = _fourier_tail(h, top, abs(x), 1e-13 * max(abs(val), abs(p)))
        tail += sign * q
        err += eq
    val += tail
    return MSDValue(2 * val, 2 * (err + ep), ok)


@dataclass
class CovarianceGrid:
    times: np.ndarray
    cov: np.ndarray
    err: Optional[np.ndarray] = None

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.cov).min())

    def is_psd(self, rel_tol=1e-9):
        return self.min_eigenvalue() >= -rel_tol * float(np.trace(self.cov))

    def cauchy_schwarz_violation(self):
        d = np.diag(self.cov)
        return float(np.max(self.cov**2 - np.outer(d, d)))


def covariance_grid(sd, times: Sequence[float], msd_cache: Optional[dict] = None) -> CovarianceGrid:
    """Covariance matrix on a time grid from msd at every needed lag.

    Each unordered pair is computed once and mirrored, so the matrix is
    exactly symmetric.
    """
    ts = np.asarray(times, dtype=float)
    cache = {} if msd_cache is None else msd_cache

    def m(x):
        key = float(x)
        if key not in cache:
            cache[key] = msd(sd, key) if key > 0 else MSDValue(0.0, 0.0)
        return cache[key]

    n = len(ts)
    cov = np.zeros((n, n))
    err = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            if ts[i] == 0 or ts[j] == 0:
                c, e = 0.0, 0.0
            else:
                a, b, d = m(ts[i]), m(ts[j]), m(abs(ts[i] - ts[j]))
                c = 0.5 * (a.value + b.value - d.value)
                e = 0.5 * (a.err_est + b.err_est + d.err_est)
            cov[i, j] = cov[j, i] = c
            err[i, j] = err[j, i] = e
    return CovarianceGrid(ts, cov, err)


# ---------------------------------------------------------------------------
# curves and exponents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    eta: float
    halfwidth: float
    se_ols: float
    se_quad: float
    n_points: int
    window: tuple
    bias: float = 0.0
    eta_extrapolated: float = math.nan

    def contains(self, value):
        return abs(self.eta - value) <= self.halfwidth


@dataclass
class MSDCurve:
    times: np.ndarray
    values: np.ndarray
    err: np.ndarray = field(default_factory=lambda: np.empty(0))
    fit: Optional[FitResult] = None
    predicted: Optional[float] = None
    regime: Optional[Regime] = None

    @property
    def fitted_exponent(self):
        return None if self.fit is None else self.fit.eta


def _ols(x, y):
    xm = x.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - y.mean())).sum() / sxx)
    return slope, y.mean() - slope * xm, xm, sxx


def _truncation_bias(x, ly, slope):
    """Estimate how far the window slope sits from the t -> infinity limit.

    The window is cut into three equal log-sub-windows.  If their slopes
    s1, s2, s3 approach a limit geometrically (the signature of a power-law
    correction t^-gamma, which makes consecutive differences shrink by a
    fixed ratio r), the limit is extrapolated as s3 + d2 r / (1 - r) with
    d2 = s3 - s2.  Otherwise the distance to the top sub-window slope is
    used.  Returns (bias, extrapolated slope).
    """
    edges = np.linspace(x[0], x[-1], 4)
    subs = []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (x >= a - 1e-12) & (x <= b + 1e-12)
        if sel.sum() < 3:
            return 0.0, math.nan
        subs.append(_ols(x[sel], ly[sel])[0])
    s1, s2, s3 = subs
    d1, d2 = s2 - s1, s3 - s2
    if d1 != 0 and d2 * d1 > 0 and abs(d2) < abs(d1):
        r = d2 / d1
        ext = s3 + d2 * r / (1.0 - r)
    else:
        ext = s3
    return abs(slope - ext), float(ext)


def fit_exponent(curve: MSDCurve, window: Optional[Sequence[float]] = None) -> FitResult:
    """Least-squares slope of log msd against log t over ``window``.

    The default window is the top two decades of the curve.  The halfwidth
    is twice the standard error plus a truncation-bias term.  The standard
    error combines the OLS residual error with the propagated quadrature
    error of each point.  The bias term accounts for the slope of a finite
    window still drifting towards its asymptote; see
    :func:`_truncation_bias`.
    """
    t = np.asarray(curve.times, dtype=float)
    y = np.asarray(curve.values, dtype=float)
    if window is None:
        window = (t.max() / 100.0, t.max())
    lo, hi = float(window[0]), float(window[1])
    if lo < t.min() * (1 - 1e-12) or hi > t.max() * (1 + 1e-12) or lo >= hi:
        raise ValueError("fit window must lie inside the curve support")
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    n = int(sel.sum())
    if n < 8:
        raise ValueError(f"fit window holds {n} points; at least 8 are required")
    if np.any(y[sel] <= 0):
        raise ValueError("msd values in the fit window must be positive")
    x = np.log(t[sel])
    ly = np.log(y[sel])
    slope, icpt, xm, sxx = _ols(x, ly)
    resid = ly - (icpt + slope * x)
    se_ols = math.sqrt(float((resid**2).sum()) / (n - 2) / sxx)
    se_quad = 0.0
    if curve.err is not None and len(curve.err) == len(t):
        rel = np.asarray(curve.err, dtype=float)[sel] / y[sel]
        se_quad = math.sqrt(float((((x - xm) / sxx * rel) ** 2).sum()))
    bias, ext = _truncation_bias(x, ly, slope)
    se = math.hypot(se_ols, se_quad)
    return FitResult(slope, 2.0 * se + bias, se_ols, se_quad, n, (lo, hi), bias, ext)


def predict_exponent(tail, params: GLEParams, assumption2: bool = True) -> float:
    """eta = 1 for an integrable kernel, alpha for a power tail.

    When m = lambda = 0 the prediction needs Assumption 2 (convexity plus
    condition V or VI); otherwise :class:`PredictionUnavailable` is raised.
    """
    if params.regime() is Regime.MzeroLzero and not assumption2:
        raise PredictionUnavailable("m = lambda = 0 with a kernel failing Assumption 2 is not covered")
    if isinstance(tail, Integrable):
        return 1.0
    if isinstance(tail, PowerTail):
        return float(tail.alpha)
    raise TypeError(f"unknown tail class {tail!r}")


def msd_curve(sd: SpectralDensity, times: Sequence[float], window=None, fit: bool = True) -> MSDCurve:
    ts = np.asarray(times, dtype=float)
    if np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
        raise ValueError("times must be positive and strictly increasing")
    vals = np.empty_like(ts)
    errs = np.empty_like(ts)
    for i, t in enumerate(ts):
        r = msd(sd, t)
        vals[i], errs[i] = r.value, r.err_est
    curve = MSDCurve(ts, vals, errs, regime=getattr(sd, "regime", None))
    if isinstance(sd, SpectralDensity):
        try:
            curve.predicted = predict_exponent(classify_tail(sd.kernel), sd.params, satisfies_assumption2(sd.kernel))
        except PredictionUnavailable:
            curve.predicted = None
    if fit and len(ts) >= 8:
        try:
            curve.fit = fit_exponent(curve, window)
        except ValueError:
            curve.fit = None
    return curve


# ---------------------------------------------------------------------------
# velocity autocorrelation
# ---------------------------------------------------------------------------


def _require_velocity(sd):
    if isinstance(sd, SpectralDensity) and sd.regime in (Regime.MzeroLpos, Regime.MzeroLzero):
        raise ValueError("V(t) is not well-defined when m = 0; the velocity ACF does not exist")


def acf_velocity(sd, t: float) -> MSDValue:
    """r(t) = int_R e^{i t w} r_hat(w) dw = 2 int_0^inf cos(t w) r_hat(w) dw."""
    _require_velocity(sd)
    f = _scalar(sd)
    t = abs(float(t))
    edges = np.concatenate([[0.0], np.logspace(-14, 6, 21)])
    val = err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if t == 0:
            v, e, _ = _quad(f, a, b, epsabs=0, epsrel=_EPSREL, limit=200)
        else:
            v, e, _ = _quad(f, a, b, weight="cos", wvar=t, epsabs=1e-300, epsrel=_EPSREL, limit=400)
        val, err = val + v, err + e
    if t == 0:
        v, e, _ = _quad(lambda u: f(1.0 / u) / (u * u) if u > 0 else 0.0, 0.0, 1e-6, epsabs=0, epsrel=1e-10, limit=200)
    else:
        v, e, _ = _quad(f, 1e6, np.inf, weight="cos", wvar=t, epsabs=1e-16, limit=200, limlst=200)
    return MSDValue(2 * (val + v), 2 * (err + e))


def acf_msd_crosscheck(sd, t: float):
    """Return (2 int_0^t (t-s) r(s) ds, msd(t), combined error estimate)."""
    _require_velocity(sd)
    t = float(t)
    errs = []

    def r(s):
        res = acf_velocity(sd, s)
        errs.append(res.err_est)
        return res.value

    val, qerr = integrate.quad(lambda s: (t - s) * r(s), 0.0, t, epsabs=1e-12, epsrel=1e-10, limit=100)
    m = msd(sd, t)
    inner = 2 * t * max(errs) * t if errs else 0.0
    return 2 * val, m.value, 10 * (2 * qerr + inner + m.err_est)


def kolmogorov_constant(sd, T: float, kappa: float) -> float:
    """C with E|X(t)-X(s)|^2 <= C |t-s|^kappa for t, s in [0, T].

    Uses 1 - cos x <= c_kappa |x|^kappa, with c_kappa = sup_x (1-cos x)/|x|^kappa,
    on |w| >= 1, and 1 - cos x <= x^2/2 with |t-s| <= T on |w| < 1:
    E|X(t)-X(s)|^2 = 4 int_0^inf (1-cos(w d))/w^2 r_hat dw
                  <= 4 [T^(2-kappa)/2 int_0^1 r_hat + c_kappa int_1^inf w^(kappa-2) r_hat] d^kappa.
    """
    f = _scalar(sd)
    xs = np.linspace(1e-6, 10.0, 200001)
    c_kappa = float(np.max((1 - np.cos(xs)) / xs**kappa))
    a, _, _ = _quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-10, limit=200)
    b1, _, _ = _quad(lambda w: w ** (kappa - 2) * f(w), 1.0, 1e4, epsabs=0, epsrel=1e-10, limit=400)
    b2, _, _ = _quad(lambda u: u ** (-kappa) * f(1.0 / u) if u > 0 else 0.0, 0.0, 1e-4, epsabs=0, epsrel=1e-10, limit=200)
    return 4.0 * (0.5 * T ** (2 - kappa) * a + c_kappa * (b1 + b2)) * 1.001
