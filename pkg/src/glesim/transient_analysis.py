"""Convergence of covariances along kernel sequences K_n -> K, and detection
of transient anomalous-diffusion windows in msd curves.

For any two spectral densities the covariance deviation is controlled by

    |E[X_n(t)X_n(s)] - E[X(t)X(s)]| <= int |cos((t-s)w) - cos(tw) - cos(sw) + 1| / w^2 |r_n - r| dw
                                    <= 2 T^2 sup_w (1 - cos w)/w^2 int |r_n - r| dw
                                     = T^2 int_R |r_n - r| dw

on [0, T]^2, using |cos(x-y) - cos x - cos y + 1| <= 2 - cos x - cos y.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .kernels import (
    CheckResult,
    Integrable,
    KernelSpec,
    PowerTail,
    UnclassifiedTailError,
    _convexity_margin,
    _family,
    _positivity,
    classify_tail,
)
from .msd_engine import MSDCurve, msd, msd_curve
from .spectral_density import GLEParams, Regime, SpectralDensity, l1_norm

__all__ = [
    "HypothesisReport",
    "DeviationResult",
    "TransientReport",
    "trig_lhs",
    "trig_rhs",
    "check_hypotheses_thm4",
    "sup_covariance_deviation",
    "local_slopes",
    "detect_tad_window",
    "transient_report",
    "squared_cm_power_sequence",
]

SUP_RATIO = 0.5  # sup over w != 0 of (1 - cos w) / w^2


def trig_lhs(x, y):
    """|cos(x-y) - cos x - cos y + 1|, written with half-angle sines to keep
    small arguments accurate."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = lambda u: 2.0 * np.sin(0.5 * u) ** 2  # 1 - cos u
    return np.abs(s(x) + s(y) - s(x - y))


def trig_rhs(x, y):
    """2 - cos x - cos y."""
    s = lambda u: 2.0 * np.sin(0.5 * np.asarray(u, dtype=float)) ** 2
    return s(x) + s(y)


# ---------------------------------------------------------------------------
# hypotheses for sequences with m > 0, lambda = 0
# ---------------------------------------------------------------------------


@dataclass
class HypothesisReport:
    """Pass/fail per hypothesis, labelled (a)-(e):

    (a) every K_n is C^2, positive, decaying and integrable;
    (b) K is C^2 with a power tail t^-alpha, alpha in (0, 1);
    (c) every K_n is convex;
    (d) K_n -> K pointwise on the sampling grid;
    (e) sup_n sup_{t in (0,1]} t^kappa K_n(t) is finite.
    """

    checks: Dict[str, CheckResult]
    kappa: float
    uniform_bound: float
    pointwise_dev: List[float]

    @property
    def ok(self):
        return all(c.status == "pass" for c in self.checks.values())

    def rows(self):
        for name, res in self.checks.items():
            yield name, res.status, res.margin, res.detail


def _is_c2(fam, t):
    try:
        d2 = np.asarray(fam.derivative(t, 2), dtype=float)
    except (ValueError, NotImplementedError):
        return False
    return bool(np.all(np.isfinite(d2)))


def check_hypotheses_thm4(seq: Sequence, K_limit, kappa: float,
                          t_grid: Optional[np.ndarray] = None) -> HypothesisReport:
    """Check the hypotheses of the covariance-convergence theorem for the
    sequence ``seq`` (ordered by increasing n) and limit kernel ``K_limit``.

    Every hypothesis gets a status; nothing raises.  Pointwise convergence
    (d) passes when the sup-norm relative deviation on the compact part
    [1e-2, 1e2] of ``t_grid`` never increases along the sequence and ends
    below its first value.  The uniform bound (e) passes when the limit's
    sup of t^kappa K over (0, 1] is attained away from t -> 0 (so it is
    finite) and no member exceeds it by more than 10%.
    """
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    if len(seq) == 0:
        raise ValueError("empty kernel sequence")
    t = np.geomspace(1e-3, 1e3, 121) if t_grid is None else np.asarray(t_grid, dtype=float)
    fams = [_family(k) for k in seq]
    lim = _family(K_limit)
    checks = {}

    bad = []
    for i, f in enumerate(fams):
        try:
            tail = classify_tail(f)
        except UnclassifiedTailError as exc:
            bad.append(f"#{i}: {exc}")
            continue
        k = f.value(t)
        if not isinstance(tail, Integrable):
            bad.append(f"#{i}: tail is {tail}, not integrable")
        elif _positivity(k).status != "pass" or not _is_c2(f, t):
            bad.append(f"#{i}: not positive C^2 on the grid")
    checks["(a)"] = CheckResult("fail" if bad else "pass", float(len(bad)), "; ".join(bad) or "all members integrable")

    try:
        lt = classify_tail(lim)
        ok = isinstance(lt, PowerTail) and _is_c2(lim, t)
        checks["(b)"] = CheckResult("pass" if ok else "fail", getattr(lt, "alpha", math.nan), str(lt))
    except UnclassifiedTailError as exc:
        checks["(b)"] = CheckResult("fail", math.nan, str(exc))

    margins = [float(_convexity_margin(f, t[(t > t[0] * 1.05) & (t < t[-1] / 1.05)]).min()) for f in fams]
    worst = min(margins)
    checks["(c)"] = CheckResult("pass" if worst >= -1e-10 else "fail", worst, "minimum scaled second difference")

    tc = t[(t >= 1e-2) & (t <= 1e2)]
    if tc.size == 0:
        tc = t
    ref = lim.value(tc)
    devs = [float(np.max(np.abs(f.value(tc) - ref) / ref)) for f in fams]
    mono = all(b <= a * (1 + 1e-12) for a, b in zip(devs[:-1], devs[1:]))
    ok = len(devs) >= 2 and mono and devs[-1] < devs[0]
    checks["(d)"] = CheckResult("pass" if ok else "fail", devs[-1], "relative sup deviations " + ", ".join(f"{d:.3g}" for d in devs))

    tu = np.geomspace(1e-8, 1.0, 161)
    sups = [float(np.max(tu**kappa * f.value(tu))) for f in fams]
    bound = max(sups)
    env = tu**kappa * lim.value(tu)
    lim_sup = float(np.max(env))
    lim_bounded = math.isfinite(lim_sup) and int(np.argmax(env)) > 0
    ok = lim_bounded and all(math.isfinite(s) for s in sups) and bound <= 1.1 * lim_sup
    checks["(e)"] = CheckResult("pass" if ok else "fail", bound, f"sup t^kappa K_n on (0,1], kappa={kappa:g}")
    return HypothesisReport(checks, kappa, bound, devs)


# ---------------------------------------------------------------------------
# covariance deviation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviationResult:
    sup_dev: float
    bound: float
    l1_dev: float
    argmax: Tuple[float, float]
    err_est: float

    @property
    def within_bound(self):
        return self.sup_dev <= self.bound


def _as_density(k, params):
    if isinstance(k, SpectralDensity):
        return k
    return SpectralDensity(k if isinstance(k, KernelSpec) else KernelSpec(k), params)


def sup_covariance_deviation(K_n, K_limit, params: GLEParams, T: float, n_grid: int = 64) -> DeviationResult:
    """Sampled sup over an ``n_grid`` x ``n_grid`` grid on [0, T]^2 of the
    covariance deviation, with the analytic bound T^2 * int |r_n - r|.

    The msd of the difference density r_n - r is integrated directly at
    every lag on the grid, then the covariance identity
    cov(t, s) = (msd(t) + msd(s) - msd(|t - s|)) / 2 is applied.
    """
    if params.m == 0 and params.lam == 0:
        raise ValueError("no convergence result is available for m = lambda = 0")
    if not (T > 0 and math.isfinite(T)):
        raise ValueError("T must be positive and finite")
    if n_grid < 2:
        raise ValueError("n_grid must be at least 2")
    sd_n = _as_density(K_n, params)
    sd = _as_density(K_limit, params)
    diff = lambda w: float(sd_n(w)) - float(sd(w))
    l1, l1_err = l1_norm(lambda w: abs(diff(w)))
    bound = 2.0 * T * T * SUP_RATIO * l1
    if l1 == 0:
        return DeviationResult(0.0, 0.0, 0.0, (0.0, 0.0), 0.0)
    h = T / (n_grid - 1)
    dm = np.zeros(n_grid)
    de = np.zeros(n_grid)
    for j in range(1, n_grid):
        r = msd(diff, j * h)
        dm[j], de[j] = r.value, r.err_est
    i, j = np.meshgrid(np.arange(n_grid), np.arange(n_grid), indexing="ij")
    dev = 0.5 * np.abs(dm[i] + dm[j] - dm[np.abs(i - j)])
    k = np.unravel_index(int(np.argmax(dev)), dev.shape)
    return DeviationResult(float(dev[k]), float(bound), float(l1), (k[0] * h, k[1] * h), float(1.5 * de.max() + l1_err))


# ---------------------------------------------------------------------------
# transient windows
# ---------------------------------------------------------------------------


def local_slopes(curve: MSDCurve, half_span_decades: float = 0.25) -> np.ndarray:
    """Centred log-log slope at every curve time.

    The slope at t uses log-linear interpolation at t * 10**(+-d), with d
    the half span shrunk near the ends of the curve so both points stay
    inside; at the end points a one-sided difference with the neighbour is
    used.
    """
    t = np.asarray(curve.times, dtype=float)
    y = np.asarray(curve.values, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two points")
    lt, ly = np.log10(t), np.log10(y)
    out = np.empty_like(lt)
    for k, x in enumerate(lt):
        d = min(half_span_decades, x - lt[0], lt[-1] - x)
        if d <= 1e-12:
            a, b = (0, 1) if k == 0 else (len(t) - 2, len(t) - 1)
            out[k] = (ly[b] - ly[a]) / (lt[b] - lt[a])
        else:
            out[k] = (np.interp(x + d, lt, ly) - np.interp(x - d, lt, ly)) / (2 * d)
    return out


def detect_tad_window(curve: MSDCurve, alpha_target: float, tol_slope: float = 0.05,
                      half_span_decades: float = 0.25, min_decades: float = 0.5):
    """Largest contiguous interval (t_lo, t_hi) on which the local slope is
    within ``alpha_target +- tol_slope``; ``None`` when it spans fewer than
    ``min_decades`` decades."""
    t = np.asarray(curve.times, dtype=float)
    if len(t) < 2:
        return None
    s = local_slopes(curve, half_span_decades)
    inside = np.abs(s - alpha_target) <= tol_slope
    best = None
    k = 0
    while k < len(t):
        if not inside[k]:
            k += 1
            continue
        j = k
        while j + 1 < len(t) and inside[j + 1]:
            j += 1
        width = math.log10(t[j] / t[k])
        if best is None or width > best[0]:
            best = (width, t[k], t[j])
        k = j + 1
    if best is None or best[0] < min_decades:
        return None
    return float(best[1]), float(best[2])


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class TransientReport:
    N_values: List[int]
    sup_dev: List[float]
    bound: List[float]
    l1_dev: List[float]
    slope_profile: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    tad_window: Dict[int, Optional[Tuple[float, float]]] = field(default_factory=dict)
    hypotheses: Optional[HypothesisReport] = None

    def deviation_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "sup_dev", "bound", "l1_dev"])
        for row in zip(self.N_values, self.sup_dev, self.bound, self.l1_dev):
            w.writerow([row[0]] + [f"{v:.17g}" for v in row[1:]])
        return buf.getvalue()

    def slope_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "t", "slope"])
        for n in self.N_values:
            if n not in self.slope_profile:
                continue
            ts, ss = self.slope_profile[n]
            for a, b in zip(ts, ss):
                w.writerow([n, f"{a:.17g}", f"{b:.17g}"])
        return buf.getvalue()


def transient_report(N_values: Sequence[int], make_kernel, K_limit, params: GLEParams, T: float,
                     n_grid: int = 64, curve_times=None, alpha_target: Optional[float] = None,
                     tol_slope: float = 0.05, kappa: Optional[float] = None) -> TransientReport:
    """Run the deviation study for ``make_kernel(N)`` over ``N_values``.

    When ``curve_times`` is given, an msd curve, its slope profile and the
    transient window around ``alpha_target`` (default: the limit's tail
    exponent) are added for every N.
    """
    Ns = [int(n) for n in N_values]
    if not Ns:
        raise ValueError("N list is empty")
    kernels = [make_kernel(n) for n in Ns]
    rep = TransientReport(Ns, [], [], [])
    sd_lim = _as_density(K_limit, params)
    for n, k in zip(Ns, kernels):
        d = sup_covariance_deviation(k, sd_lim, params, T, n_grid)
        rep.sup_dev.append(d.sup_dev)
        rep.bound.append(d.bound)
        rep.l1_dev.append(d.l1_dev)
    if curve_times is not None:
        if alpha_target is None:
            tail = classify_tail(K_limit)
            alpha_target = tail.alpha if isinstance(tail, PowerTail) else 1.0
        for n, k in zip(Ns, kernels):
            curve = msd_curve(_as_density(k, params), curve_times, fit=False)
            rep.slope_profile[n] = (curve.times, local_slopes(curve))
            rep.tad_window[n] = detect_tad_window(curve, alpha_target, tol_slope)
    if kappa is not None and params.regime() is Regime.MposLzero:
        rep.hypotheses = check_hypotheses_thm4(kernels, K_limit, kappa)
    return rep


def squared_cm_power_sequence(c: float, alpha: float, decades: int, per_decade: int = 4) -> KernelSpec:
    """Non-convex approximation of c t^-alpha by Gaussian atoms.

    c t^-alpha = c / Gamma(alpha/2) int_0^inf exp(-t^2 x) x^(alpha/2 - 1) dx;
    the measure is lumped into atoms on a geometric x grid spanning
    10**-decades .. 10**decades (the cell [0, 10**-decades] joins the first
    atom).  Members converge pointwise to the power law as ``decades`` grows.
    """
    if not 0 < alpha < 1 or not c > 0 or decades < 1:
        raise ValueError("need c > 0, alpha in (0, 1) and decades >= 1")
    from scipy.special import gamma

    a = alpha / 2.0
    edges = np.logspace(-decades, decades, 2 * decades * per_decade + 1)
    mass = c / gamma(a) / a * np.diff(edges**a)
    mass[0] += c / gamma(a) / a * edges[0] ** a
    nodes = np.sqrt(edges[:-1] * edges[1:])
    return KernelSpec.squared_cm(list(zip(mass, nodes)))
