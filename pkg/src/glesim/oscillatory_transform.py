"""Improper Fourier cosine and sine transforms of memory kernels.

The numeric path splits [0, inf) into three parts:

* a head [0, h] that, for kernels with K(0) = inf, is mapped through
  t = u**q with q = 1/(1 - sigma) so the t**-sigma singularity disappears;
* a middle [h, A'] integrated with QUADPACK's trigonometric weight;
* an oscillatory tail [A', inf) summed half-period by half-period with
  Gauss-Legendre rules, accelerated by Wynn's epsilon algorithm.

A' is the first zero of the trigonometric factor beyond the onset of
monotone decrease of K.  The remainder after the last summed half-period
is bounded by 4 K(A')/omega, which is reported as ``certified_bound``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from .kernels import (
    KernelDomainError,
    KernelSpec,
    PowerTail,
    _family,
    _onset_of_decrease,
    classify_tail,
    satisfies_assumption2,
)

__all__ = [
    "TransformValue",
    "TransformTable",
    "fourier_cos",
    "fourier_sin",
    "fourier_cos_convex",
    "transform_table",
    "abelian_small_omega",
    "abelian_large_omega",
    "AbelianReport",
    "wynn_epsilon",
    "default_tol",
]

_GL_CACHE = {}


def _gauss_legendre(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


@dataclass(frozen=True)
class TransformValue:
    value: float
    err_est: float
    certified_bound: float = 0.0
    converged: bool = True
    method: str = "closed"
    cutoff: float = math.nan

    def __float__(self):
        return float(self.value)


def wynn_epsilon(seq):
    """Wynn's epsilon algorithm applied to a sequence of partial sums.

    Returns ``(estimate, error)`` where ``error`` is the difference between
    the two most recent even-column estimates.
    """
    s = np.asarray(seq, dtype=float)
    n = len(s)
    if n < 3:
        return float(s[-1]), float(abs(s[-1] - s[-2])) if n > 1 else math.inf
    prev = np.zeros(n + 1)
    cur = s.copy()
    evens = [cur]
    for k in range(1, n):
        diff = cur[1:] - cur[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = prev[1 : len(cur)] + 1.0 / diff
        if not np.all(np.isfinite(nxt)):
            break
        prev, cur = cur, nxt
        if k % 2 == 0:
            evens.append(cur)
    est = [col[-1] for col in evens]
    best = est[-1]
    if len(est) > 1:
        err = abs(est[-1] - est[-2])
    else:
        err = abs(s[-1] - s[-2])
    # the last few diagonal entries should also agree
    if len(evens[-1]) > 1:
        err = max(err, abs(evens[-1][-1] - evens[-1][-2]))
    return float(best), float(err)


def default_tol(spec, omega):
    """1e-9 for omega >= 1, relaxed like omega**(alpha-1) below."""
    if omega >= 1:
        return 1e-9
    fam = _family(spec)
    tail = fam.tail()
    if isinstance(tail, PowerTail):
        return 1e-9 * omega ** (tail.alpha - 1)
    return 1e-9


def _check_decays(fam):
    far = fam.value(np.array([1e8, 1e12, 1e16]))
    if not (far[0] == 0 or (far[2] < far[1] < far[0])):
        raise KernelDomainError("kernel does not decay to zero; its improper transforms do not exist")


def _onset(fam):
    t = np.geomspace(1e-6, 1e3, 91)
    return _onset_of_decrease(t, fam.value(t))


def _first_zero(start, omega, kind):
    """Smallest zero of cos/sin(omega t) at or after ``start``."""
    shift = 0.5 if kind == "cos" else 0.0
    k = math.ceil(start * omega / math.pi - shift)
    return (k + shift) * math.pi / omega


def _trig(kind):
    return np.cos if kind == "cos" else np.sin


def _osc_tail(func, a, omega, kind, tol, envelope, max_half_periods=1 << 15, block=64):
    """Sum int_a^inf func(t) trig(omega t) dt over half-periods from a zero a."""
    trig = _trig(kind)
    half = math.pi / omega
    x1, w1 = _gauss_legendre(24)
    x2, w2 = _gauss_legendre(48)
    partial = [0.0]
    gl_err = 0.0
    total = 0.0
    done = 0
    estimate = err = 0.0
    converged = False
    while done < max_half_periods:
        starts = a + half * np.arange(done, done + block)
        mids = starts + 0.5 * half

        def rule(x, w):
            t = mids[:, None] + 0.5 * half * x[None, :]
            return (func(t) * trig(omega * t)) @ w * (0.5 * half)

        coarse, fine = rule(x1, w1), rule(x2, w2)
        gl_err += float(np.abs(fine - coarse).sum())
        csum = total + np.cumsum(fine)
        total = float(csum[-1])
        partial.extend(csum.tolist())
        done += block
        bound = 4.0 * envelope(a + done * half) / omega
        last_terms = np.abs(fine[-4:]).max()
        window = partial[-min(len(partial), 40) :]
        estimate, err = wynn_epsilon(window)
        goal = max(tol * 1e-3, 1e-15 * abs(estimate))
        if bound <= goal or last_terms == 0:
            estimate, err = total, max(bound, 0.0) if last_terms else 0.0
            converged = True
            break
        if err <= goal:
            converged = True
            break
    cert = 4.0 * envelope(a + done * half) / omega
    if not converged and cert < err:
        estimate, err = total, cert
    return estimate, err + gl_err, cert, converged, a + done * half


def _head(func, h, sigma, omega, kind, epsabs):
    """int_0^h func(t) trig(omega t) dt with the t**-sigma singularity removed."""
    if h <= 0:
        return 0.0, 0.0
    trig = math.cos if kind == "cos" else math.sin
    q = 1.0 / (1.0 - sigma)
    top = h ** (1.0 / q)

    def g(u):
        if u == 0.0:
            return 0.0 if sigma > 0 else float(func(0.0)) * trig(0.0)
        t = u**q
        return float(func(t)) * trig(omega * t) * q * u ** (q - 1.0)

    val, err = integrate.quad(g, 0.0, top, epsabs=epsabs, epsrel=1e-13, limit=500)
    return val, err


def _middle(func, a, b, omega, kind, epsabs):
    """QUADPACK with trigonometric weight on geometric panels of [a, b].

    Panels grow by a factor of 10 away from ``a`` so that kernel features
    near the origin are resolved even when b is many periods long.
    """
    if b <= a:
        return 0.0, 0.0
    first = min(1e-3, b - a)
    n_panels = max(1, math.ceil(math.log10((b - a) / first)) + 1)
    edges = a + np.concatenate([[0.0], np.geomspace(first, b - a, n_panels)])
    edges[-1] = b
    val = err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        v, e = integrate.quad(
            lambda t: float(func(t)), lo, hi, weight=kind, wvar=omega,
            epsabs=epsabs / n_panels, epsrel=1e-13, limit=500,
        )
        val += v
        err += e
    return val, err


def _numeric_transform(spec, omega, kind, tol):
    fam = _family(spec)
    _check_decays(fam)
    onset = _onset(fam)
    singular = math.isinf(fam.k0)
    h = min(1.0, math.pi / omega) if singular else 0.0
    sigma = fam.sigma0 if singular else 0.0
    func = fam.value
    a_prime = _first_zero(max(onset, h, 0.0), omega, kind)
    epsabs = tol * 1e-3
    v_head, e_head = _head(func, h, sigma, omega, kind, epsabs)
    v_mid, e_mid = _middle(func, h, a_prime, omega, kind, epsabs)
    v_tail, e_tail, cert, ok, stop = _osc_tail(func, a_prime, omega, kind, tol, lambda t: float(fam.value(t)))
    value = v_head + v_mid + v_tail
    err = e_head + e_mid + e_tail
    return TransformValue(value, err, cert, bool(ok and err <= tol), "numeric", a_prime)


def _closed(spec, omega, kind):
    fc, fs = spec.closed_form_transforms(np.asarray(omega, dtype=float))
    v = float(fc if kind == "cos" else fs)
    return TransformValue(v, 4 * np.finfo(float).eps * abs(v), 0.0, True, "closed")


def _transform(spec, omega, tol, method, kind):
    if not isinstance(spec, KernelSpec):
        spec = KernelSpec(spec)
    omega = float(omega)
    if not (omega > 0 and math.isfinite(omega)):
        raise ValueError(f"frequency must be positive and finite, got {omega}")
    if tol is None:
        tol = default_tol(spec, omega)
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if method not in ("auto", "closed", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" or (method == "auto" and spec.has_closed_form):
        if not spec.has_closed_form:
            raise ValueError("no closed-form transform is available for this kernel")
        _check_decays(_family(spec))
        return _closed(spec, omega, kind)
    return _numeric_transform(spec, omega, kind, tol)


def fourier_cos(spec, omega, tol=None, method="auto") -> TransformValue:
    """F_cos(omega) = int_0^inf K(t) cos(omega t) dt."""
    return _transform(spec, omega, tol, method, "cos")


def fourier_sin(spec, omega, tol=None, method="auto") -> TransformValue:
    """F_sin(omega) = int_0^inf K(t) sin(omega t) dt."""
    return _transform(spec, omega, tol, method, "sin")


def fourier_cos_convex(spec, omega, tol=1e-11) -> TransformValue:
    """F_cos through the convex representation
    (1/omega**2) int_0^inf K''(t) (1 - cos(omega t)) dt.

    Only defined for convex kernels with t K(t) -> 0 at the origin.
    """
    fam = _family(spec)
    omega = float(omega)
    if not (omega > 0):
        raise ValueError("frequency must be positive")
    if not getattr(fam, "convex", False) or not satisfies_assumption2(fam):
        raise KernelDomainError("convex representation requires a convex kernel")
    _check_decays(fam)
    singular = math.isinf(fam.k0)
    sigma = fam.sigma0 if singular else 0.0
    if sigma >= 1:
        raise KernelDomainError("t K(t) does not vanish at the origin")

    def d2(t):
        return fam.derivative(t, 2)

    h = _first_zero(min(1.0, math.pi / omega), omega, "cos")
    q = 1.0 / (1.0 - sigma)
    top = h ** (1.0 / q)

    def head(u):
        if u == 0.0:
            return 0.0
        t = u**q
        return float(d2(t)) * 2.0 * math.sin(0.5 * omega * t) ** 2 * q * u ** (q - 1.0)

    v_head, e_head = integrate.quad(head, 0.0, top, epsabs=tol * 1e-2, epsrel=1e-13, limit=500)
    plain = -float(fam.derivative(h, 1))  # int_h^inf K'' = -K'(h)
    v_osc, e_osc, cert, ok, _ = _osc_tail(d2, h, omega, "cos", tol, lambda t: float(d2(t)))
    value = (v_head + plain - v_osc) / omega**2
    err = (e_head + e_osc + 4 * np.finfo(float).eps * abs(plain)) / omega**2
    return TransformValue(value, err, cert / omega**2, bool(ok), "convex", h)


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


@dataclass
class TransformTable:
    omegas: np.ndarray
    f_cos: np.ndarray
    f_sin: np.ndarray
    err_est: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        if om.size and (np.any(om <= 0) or np.any(np.diff(om) <= 0)):
            raise ValueError("omegas must be positive and strictly increasing")

    def __len__(self):
        return len(self.omegas)

    def columns(self):
        return {"omega": self.omegas, "f_cos": self.f_cos, "f_sin": self.f_sin, "err_est": self.err_est}


def _check_grid(omegas):
    om = np.asarray(omegas, dtype=float).ravel()
    if om.size and (np.any(~np.isfinite(om)) or np.any(om <= 0)):
        raise ValueError("frequency grid must be positive and finite")
    if om.size > 1 and np.any(np.diff(om) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    return om


def transform_table(spec, omegas, tol=None, method="auto") -> TransformTable:
    """Evaluate F_cos and F_sin on a sorted positive grid."""
    if not isinstance(spec, KernelSpec):
        spec = KernelSpec(spec)
    om = _check_grid(omegas)
    if om.size == 0:
        e = np.empty(0)
        return TransformTable(e, e.copy(), e.copy(), e.copy())
    if method != "numeric" and spec.has_closed_form:
        _check_decays(_family(spec))
        fc, fs = spec.closed_form_transforms(om)
        fc, fs = np.asarray(fc, dtype=float), np.asarray(fs, dtype=float)
        err = 4 * np.finfo(float).eps * np.maximum(np.abs(fc), np.abs(fs))
        return TransformTable(om, fc, fs, err)
    fc = np.empty_like(om)
    fs = np.empty_like(om)
    err = np.empty_like(om)
    for i, w in enumerate(om):
        c = fourier_cos(spec, w, tol, "numeric")
        s = fourier_sin(spec, w, tol, "numeric")
        fc[i], fs[i], err[i] = c.value, s.value, max(c.err_est, s.err_est)
    return TransformTable(om, fc, fs, err)


# ---------------------------------------------------------------------------
# Abelian limits
# ---------------------------------------------------------------------------


@dataclass
class AbelianReport:
    omegas: np.ndarray
    scaled_cos: np.ndarray
    scaled_sin: np.ndarray
    limit_cos: float
    limit_sin: float
    unc_cos: float
    unc_sin: float
    target_cos: Optional[float]
    target_sin: Optional[float]
    label_cos: str = ""
    label_sin: str = ""


def _richardson3(g):
    """Three-point extrapolation of a sequence on a ratio-2 geometric grid.

    The error is assumed to shrink geometrically with an unknown rate (the
    Aitken form); the uncertainty is the last increment of the
    extrapolated sequence.
    """
    g = np.asarray(g, dtype=float)
    ext = []
    for i in range(len(g) - 2):
        a, b, c = g[i], g[i + 1], g[i + 2]
        d1, d2 = b - a, c - b
        den = d2 - d1
        if den == 0 or abs(den) < 1e-14 * max(abs(c), 1e-300) or d1 * d2 <= 0:
            ext.append(c)
        else:
            ext.append(c - d2 * d2 / den)
    if not ext:
        return float(g[-1]), float(abs(g[-1] - g[-2])) if len(g) > 1 else math.inf
    unc = abs(ext[-1] - ext[-2]) if len(ext) > 1 else abs(g[-1] - g[-2])
    return float(ext[-1]), float(unc)


def abelian_small_omega(spec, alpha=None, omegas: Optional[Sequence[float]] = None, method="auto", tol=None):
    """omega**(1-alpha) F(omega) as omega -> 0 for power-tailed kernels."""
    if not isinstance(spec, KernelSpec):
        spec = KernelSpec(spec)
    tail = classify_tail(spec)
    if not isinstance(tail, PowerTail):
        raise KernelDomainError("small-frequency Abelian limit needs a power-law tail")
    a = tail.alpha if alpha is None else float(alpha)
    om = np.asarray(omegas if omegas is not None else 1e-2 * 0.5 ** np.arange(10), dtype=float)
    fc = np.array([fourier_cos(spec, w, tol, method).value for w in om])
    fs = np.array([fourier_sin(spec, w, tol, method).value for w in om])
    gc, gs = om ** (1 - a) * fc, om ** (1 - a) * fs
    lc, uc = _richardson3(gc)
    ls, us = _richardson3(gs)
    amp = tail.c * special.gamma(1 - a)
    return AbelianReport(
        om, gc, gs, lc, ls, uc, us,
        amp * math.sin(math.pi * a / 2), amp * math.cos(math.pi * a / 2),
        "omega^(1-alpha) F_cos", "omega^(1-alpha) F_sin",
    )


def abelian_large_omega(spec, sigma=None, omegas: Optional[Sequence[float]] = None, method="auto", tol=None):
    """Scaled transforms as omega -> inf under condition V or VI.

    Condition V (K(0) finite): omega**(2-sigma1) F_cos -> 0 and
    omega F_sin -> K(0).  Condition VI (K(0) infinite):
    omega**(1-sigma2) F_cos and omega**(1-sigma2) F_sin tend to finite
    positive constants.
    """
    if not isinstance(spec, KernelSpec):
        spec = KernelSpec(spec)
    fam = _family(spec)
    if not satisfies_assumption2(fam):
        raise KernelDomainError("large-frequency Abelian limits need a convex kernel (condition IV)")
    om = np.asarray(omegas if omegas is not None else 10.0 * 2.0 ** np.arange(8), dtype=float)
    fc = np.array([fourier_cos(spec, w, tol, method).value for w in om])
    fs = np.array([fourier_sin(spec, w, tol, method).value for w in om])
    if math.isfinite(fam.k0):
        s1 = 0.5 if sigma is None else float(sigma)
        gc, gs = om ** (2 - s1) * fc, om * fs
        lc, uc = _richardson3(gc)
        ls, us = _richardson3(gs)
        return AbelianReport(om, gc, gs, lc, ls, uc, us, 0.0, float(fam.k0),
                             f"omega^{2 - s1:g} F_cos", "omega F_sin")
    s2 = fam.sigma0 if sigma is None else float(sigma)
    gc, gs = om ** (1 - s2) * fc, om ** (1 - s2) * fs
    lc, uc = _richardson3(gc)
    ls, us = _richardson3(gs)
    tc = ts = None
    if isinstance(fam.tail(), PowerTail) and hasattr(fam, "alpha") and abs(fam.alpha - s2) < 1e-12:
        amp = fam.c * special.gamma(1 - s2)
        tc, ts = amp * math.sin(math.pi * s2 / 2), amp * math.cos(math.pi * s2 / 2)
    return AbelianReport(om, gc, gs, lc, ls, uc, us, tc, ts,
                         f"omega^{1 - s2:g} F_cos", f"omega^{1 - s2:g} F_sin")
