"""Memory kernel families and their admissibility checks.

Every family is an immutable dataclass exposing vectorised evaluation of
K(|t|) and its first two derivatives, the value K(0) (possibly infinite),
the small-t singularity exponent, an analytic tail classification and,
when available, closed-form Fourier cosine/sine transforms.

A :class:`KernelSpec` wraps one family together with an optional override
for the closed-form transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import special

__all__ = [
    "KernelDomainError",
    "UnclassifiedTailError",
    "SumOfExponentials",
    "GeneralizedRouse",
    "PowerLawH",
    "PowerLawAlpha",
    "CompletelyMonotoneAtoms",
    "SquaredArgumentCM",
    "KernelSpec",
    "Integrable",
    "PowerTail",
    "CheckResult",
    "AdmissibilityReport",
    "SamplingPlan",
    "eval_kernel",
    "eval_derivative",
    "classify_tail",
    "check_admissibility",
    "satisfies_assumption2",
]


class KernelDomainError(ValueError):
    """Raised when a kernel is evaluated where it is not finite (t=0 for
    kernels with K(0)=inf) or when a family is given invalid parameters."""


class UnclassifiedTailError(RuntimeError):
    """Raised when a numeric tail fit is too poor to classify the kernel."""


def _pairs(items, name):
    out = []
    for pair in items:
        if len(pair) != 2:
            raise KernelDomainError(f"{name}: expected (weight, rate) pairs")
        a, b = float(pair[0]), float(pair[1])
        out.append((a, b))
    if not out:
        raise KernelDomainError(f"{name}: at least one term is required")
    return tuple(out)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SumOfExponentials:
    """K(t) = sum_k c_k exp(-lambda_k |t|) with c_k > 0 and lambda_k > 0."""

    terms: tuple

    def __post_init__(self):
        terms = _pairs(self.terms, "SumOfExponentials")
        for c, lam in terms:
            if not (c > 0 and math.isfinite(c)):
                raise KernelDomainError(f"SumOfExponentials: weight {c} must be > 0")
            if not (lam > 0 and math.isfinite(lam)):
                raise KernelDomainError(f"SumOfExponentials: rate {lam} must be > 0")
        object.__setattr__(self, "terms", terms)

    @property
    def weights(self):
        return np.array([c for c, _ in self.terms])

    @property
    def rates(self):
        return np.array([lam for _, lam in self.terms])

    k0 = property(lambda self: float(self.weights.sum()))
    sigma0 = 0.0

    def value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return np.exp(-np.multiply.outer(t, self.rates)) @ self.weights

    def derivative(self, t, order=1):
        t = np.abs(np.asarray(t, dtype=float))
        coef = self.weights * (-self.rates) ** order
        return np.exp(-np.multiply.outer(t, self.rates)) @ coef

    def transforms(self, omega):
        w = np.asarray(omega, dtype=float)
        lam, c = self.rates, self.weights
        den = np.add.outer(w * w, lam * lam)
        return (c * lam / den).sum(axis=-1), (np.multiply.outer(w, c) / den).sum(axis=-1)

    def integral(self):
        return float((self.weights / self.rates).sum())

    def tail(self):
        return Integrable()

    convex = True


@dataclass(frozen=True)
class GeneralizedRouse:
    """Generalised Rouse kernel with exponent ``p`` and time scale ``tau0``.

    ``n=None`` selects the N -> infinity limit, the integral of
    exp(-|t/tau0| x**p) over x in [0, 1].  For finite ``n`` the kernel is
    (1/n) * sum_k exp(-|t/tau0| (k/n)**p) with k = 0..n-1, or k = 1..n-1
    when ``drop_zero`` is set.  The k = 0 term is the constant 1, which
    keeps the full sum from decaying.
    """

    p: float
    tau0: float = 1.0
    n: Optional[int] = None
    drop_zero: bool = False

    def __post_init__(self):
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise KernelDomainError(f"GeneralizedRouse: p={self.p} must be >= 1")
        if not (self.tau0 > 0 and math.isfinite(self.tau0)):
            raise KernelDomainError(f"GeneralizedRouse: tau0={self.tau0} must be > 0")
        if self.n is not None:
            if int(self.n) != self.n or self.n < 1:
                raise KernelDomainError(f"GeneralizedRouse: N={self.n} must be a positive integer")
            object.__setattr__(self, "n", int(self.n))
            if self.drop_zero and self.n < 2:
                raise KernelDomainError("GeneralizedRouse: dropping k=0 needs N >= 2")

    @property
    def is_limit(self):
        return self.n is None

    def _rates(self):
        k = np.arange(1 if self.drop_zero else 0, self.n)
        return (k / self.n) ** self.p / self.tau0

    def as_exponentials(self):
        """Finite-N kernel with strictly positive rates as a sum of exponentials."""
        rates = self._rates()
        if self.is_limit or np.any(rates == 0):
            raise KernelDomainError("kernel contains a non-decaying constant term")
        return SumOfExponentials(tuple((1.0 / self.n, r) for r in rates))

    @property
    def k0(self):
        if self.is_limit:
            return 1.0
        return len(self._rates()) / self.n

    sigma0 = 0.0

    def value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        if not self.is_limit:
            return np.exp(-np.multiply.outer(t, self._rates())).sum(axis=-1) / self.n
        return self._limit_moment(t, 0)

    def derivative(self, t, order=1):
        t = np.abs(np.asarray(t, dtype=float))
        if not self.is_limit:
            r = self._rates()
            return np.exp(-np.multiply.outer(t, r)) @ ((-r) ** order) / self.n
        return (-1.0 / self.tau0) ** order * self._limit_moment(t, order)

    def _limit_moment(self, t, j):
        """int_0^1 x**(j p) exp(-s x**p) dx with s = t / tau0.

        Equals (1/p) s**(-j-1/p) * lower_gamma(j + 1/p, s); a power series
        is used for small s where the closed form loses precision.
        """
        p = self.p
        s = np.asarray(t, dtype=float) / self.tau0
        a = j + 1.0 / p
        out = np.empty_like(s)
        small = s < 1e-3
        ss = s[small]
        # sum_n (-s)^n / (n! (p (j+n) + 1))
        acc = np.zeros_like(ss)
        term = np.ones_like(ss)
        for n in range(12):
            acc += term / (p * (j + n) + 1.0)
            term = term * (-ss) / (n + 1)
        out[small] = acc
        sb = s[~small]
        out[~small] = special.gammainc(a, sb) * special.gamma(a) / (p * sb**a)
        return out

    def transforms(self, omega):
        if not self.is_limit:
            return self.as_exponentials().transforms(omega)
        w = np.asarray(omega, dtype=float)
        p, tau0 = self.p, self.tau0
        x = tau0 * w
        v = 1.0 / (1.0 + x * x)
        u = x * x / (1.0 + x * x)

        def reg_beta(a):
            b = 1.0 - a
            # I_v(a, b); switch to the complement when v is close to 1
            return np.where(v <= 0.5, special.betainc(a, b, v), special.betaincc(b, a, u))

        pref = x ** (1.0 / p) / (2.0 * p * w)
        a_c = (p + 1.0) / (2.0 * p)
        a_s = 1.0 / (2.0 * p)
        f_cos = pref * math.pi / math.sin(math.pi * a_c) * reg_beta(a_c)
        f_sin = pref * math.pi / math.sin(math.pi * a_s) * reg_beta(a_s)
        return f_cos, f_sin

    def integral(self):
        if self.is_limit:
            return math.inf
        return self.as_exponentials().integral()

    def tail(self):
        if not self.is_limit:
            if not self.drop_zero:
                return None  # constant term: not decaying, hence no tail class
            return Integrable()
        alpha = 1.0 / self.p
        if not alpha < 1:
            return None
        return PowerTail(alpha, self.tau0**alpha / self.p * math.gamma(alpha))

    convex = True


@dataclass(frozen=True)
class PowerLawAlpha:
    """K(t) = c |t|**(-alpha) with alpha in (0, 1)."""

    c: float
    alpha: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise KernelDomainError(f"PowerLawAlpha: c={self.c} must be > 0")
        if not (0 < self.alpha < 1):
            raise KernelDomainError(f"PowerLawAlpha: alpha={self.alpha} must lie in (0, 1)")

    k0 = math.inf

    @property
    def sigma0(self):
        return self.alpha

    def value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore"):
            return self.c * t ** (-self.alpha)

    def derivative(self, t, order=1):
        t = np.abs(np.asarray(t, dtype=float))
        a = self.alpha
        coef = self.c * (-1) ** order * special.poch(a, order)
        with np.errstate(divide="ignore"):
            return coef * t ** (-a - order)

    def transforms(self, omega):
        w = np.asarray(omega, dtype=float)
        a = self.alpha
        amp = self.c * special.gamma(1 - a) * w ** (a - 1)
        return amp * math.sin(math.pi * a / 2), amp * math.cos(math.pi * a / 2)

    def integral(self):
        return math.inf

    def tail(self):
        return PowerTail(self.alpha, self.c)

    convex = True


def PowerLawH(H: float) -> PowerLawAlpha:
    """Kou's kernel 2H(2H-1)|t|**(2H-2), for H in (1/2, 1)."""
    if not (0.5 < H < 1):
        raise KernelDomainError(f"PowerLawH: H={H} must lie in (1/2, 1)")
    return PowerLawAlpha(2 * H * (2 * H - 1), 2 - 2 * H)


@dataclass(frozen=True)
class CompletelyMonotoneAtoms:
    """K(t) = sum_j w_j exp(-x_j |t|): Laplace transform of a finite atomic
    measure with weights w_j > 0 and rates x_j >= 0."""

    atoms: tuple

    def __post_init__(self):
        atoms = _pairs(self.atoms, "CompletelyMonotoneAtoms")
        for w, x in atoms:
            if not (w > 0 and math.isfinite(w)):
                raise KernelDomainError(f"CompletelyMonotoneAtoms: weight {w} must be > 0")
            if not (x >= 0 and math.isfinite(x)):
                raise KernelDomainError(f"CompletelyMonotoneAtoms: rate {x} must be >= 0")
        object.__setattr__(self, "atoms", atoms)

    @property
    def weights(self):
        return np.array([w for w, _ in self.atoms])

    @property
    def rates(self):
        return np.array([x for _, x in self.atoms])

    @property
    def decays(self):
        return bool(np.all(self.rates > 0))

    k0 = property(lambda self: float(self.weights.sum()))
    sigma0 = 0.0

    def value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return np.exp(-np.multiply.outer(t, self.rates)) @ self.weights

    def derivative(self, t, order=1):
        t = np.abs(np.asarray(t, dtype=float))
        return np.exp(-np.multiply.outer(t, self.rates)) @ (self.weights * (-self.rates) ** order)

    def transforms(self, omega):
        if not self.decays:
            raise KernelDomainError("constant atom: the improper transforms do not exist")
        return SumOfExponentials(self.atoms).transforms(omega)

    def integral(self):
        return float((self.weights / self.rates).sum()) if self.decays else math.inf

    def tail(self):
        return Integrable() if self.decays else None

    convex = True


@dataclass(frozen=True)
class SquaredArgumentCM:
    """K(t) = phi(t**2) with phi a completely monotone atomic kernel,
    i.e. K(t) = sum_j w_j exp(-x_j t**2).  Not convex near the origin."""

    base: CompletelyMonotoneAtoms

    k0 = property(lambda self: self.base.k0)
    sigma0 = 0.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return self.base.value(t * t)

    def derivative(self, t, order=1):
        t = np.abs(np.asarray(t, dtype=float))
        x, w = self.base.rates, self.base.weights
        e = np.exp(-np.multiply.outer(t * t, x))
        tt = t[..., None]
        if order == 1:
            return (e * (-2 * x * tt)) @ w
        if order == 2:
            return (e * (4 * x * x * tt * tt - 2 * x)) @ w
        if order == 3:
            return (e * (12 * x * x * tt - 8 * x**3 * tt**3)) @ w
        raise ValueError("derivatives up to order 3 are supported")

    def transforms(self, omega):
        if not self.base.decays:
            raise KernelDomainError("constant atom: the improper transforms do not exist")
        w = np.asarray(omega, dtype=float)[..., None]
        x, c = self.base.rates, self.base.weights
        sx = np.sqrt(x)
        f_cos = (c * 0.5 * np.sqrt(np.pi / x) * np.exp(-w * w / (4 * x))).sum(axis=-1)
        f_sin = (c / sx * special.dawsn(w / (2 * sx))).sum(axis=-1)
        return f_cos, f_sin

    def integral(self):
        if not self.base.decays:
            return math.inf
        return float((self.base.weights * 0.5 * np.sqrt(np.pi / self.base.rates)).sum())

    def tail(self):
        return Integrable() if self.base.decays else None

    convex = False


Family = Union[SumOfExponentials, GeneralizedRouse, PowerLawAlpha, CompletelyMonotoneAtoms, SquaredArgumentCM]


@dataclass(frozen=True)
class KernelSpec:
    """A memory kernel: a family plus optional closed-form transforms.

    ``closed_form_transforms`` maps an array of frequencies to the pair
    (F_cos, F_sin).  By default the family's own formulas are used;
    pass ``use_closed_form=False`` to force numeric quadrature everywhere.
    """

    family: Family
    closed_form_transforms: Optional[Callable] = field(default=None, compare=False)
    use_closed_form: bool = True

    def __post_init__(self):
        if self.closed_form_transforms is None and self.use_closed_form:
            object.__setattr__(self, "closed_form_transforms", self.family.transforms)

    # convenience constructors -------------------------------------------
    @classmethod
    def exp_sum(cls, terms: Sequence):
        return cls(SumOfExponentials(tuple(terms)))

    @classmethod
    def rouse(cls, p, tau0=1.0, n=None, drop_zero=False):
        return cls(GeneralizedRouse(p, tau0, n, drop_zero))

    @classmethod
    def power_h(cls, H):
        return cls(PowerLawH(H))

    @classmethod
    def power_alpha(cls, c, alpha):
        return cls(PowerLawAlpha(c, alpha))

    @classmethod
    def cm_atoms(cls, atoms: Sequence):
        return cls(CompletelyMonotoneAtoms(tuple(atoms)))

    @classmethod
    def squared_cm(cls, atoms: Sequence):
        return cls(SquaredArgumentCM(CompletelyMonotoneAtoms(tuple(atoms))))

    def numeric(self):
        """The same kernel with closed forms disabled."""
        return KernelSpec(self.family, None, use_closed_form=False)

    @property
    def k0(self):
        return self.family.k0

    @property
    def has_closed_form(self):
        return self.closed_form_transforms is not None

    def __call__(self, t):
        return eval_kernel(self, t)


# ---------------------------------------------------------------------------
# tail classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Integrable:
    """K is integrable on (0, inf)."""

    def __str__(self):
        return "Integrable"


@dataclass(frozen=True)
class PowerTail:
    """K(t) ~ c t**(-alpha) as t -> inf with alpha in (0, 1)."""

    alpha: float
    c: float

    def __post_init__(self):
        if not (0 < self.alpha < 1):
            raise ValueError(f"PowerTail exponent {self.alpha} must lie strictly in (0, 1)")

    def __str__(self):
        return f"PowerTail(alpha={self.alpha:.6g}, c={self.c:.6g})"


TailClass = Union[Integrable, PowerTail]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _family(spec):
    return spec.family if isinstance(spec, KernelSpec) else spec


def eval_kernel(spec, t):
    """Evaluate K(|t|).  Scalars in, scalars out.

    Raises
    ------
    KernelDomainError
        At t = 0 for kernels with K(0) = inf, or for non-finite t.
    """
    fam = _family(spec)
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise KernelDomainError("kernel time argument must be finite")
    if math.isinf(fam.k0) and np.any(t_arr == 0):
        raise KernelDomainError("K(0) is infinite for this kernel; t=0 is outside its domain")
    out = fam.value(t_arr)
    return float(out) if np.ndim(out) == 0 else out


def eval_derivative(spec, t, order=1):
    """Derivative d^order K / dt^order for t > 0."""
    fam = _family(spec)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise KernelDomainError("derivatives are evaluated on t > 0 only")
    out = fam.derivative(t_arr, order)
    return float(out) if np.ndim(out) == 0 else out


def _loglog_fit(x, y):
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    ss_res = float(((ly - pred) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef[0], coef[1], r2


def classify_tail(spec, t0: float = 1e4, numeric: bool = False, r2_min: float = 0.999) -> TailClass:
    """Integrable or PowerTail(alpha, c).

    The family's analytic answer is used unless ``numeric`` is set or the
    family cannot decide, in which case log K is regressed on log t over
    the geometric grid [t0, 1e4 t0].
    """
    fam = _family(spec)
    if not numeric:
        cls = fam.tail()
        if cls is not None:
            return cls
    t = np.geomspace(t0, 1e4 * t0, 81)
    k = fam.value(t)
    if np.any(k <= 0) or not np.all(np.isfinite(k)):
        # exponential decay underflowed: clearly integrable
        if np.all(k >= 0) and k[-1] == 0:
            return Integrable()
        raise UnclassifiedTailError("kernel is not positive on the tail grid")
    slope, icpt, r2 = _loglog_fit(t, k)
    if r2 < r2_min:
        # exponential-type decay bends the log-log line downwards
        local = np.diff(np.log(k)) / np.diff(np.log(t))
        if local[-1] < -3 and np.all(np.diff(local) <= 1e-9):
            return Integrable()
        raise UnclassifiedTailError(f"log-log tail fit is ambiguous (R^2={r2:.4f})")
    alpha = -slope
    if abs(alpha - 1) < 0.02:
        raise UnclassifiedTailError(f"tail exponent {alpha:.4f} is indistinguishable from 1")
    if alpha > 1:
        return Integrable()
    if alpha <= 0:
        raise UnclassifiedTailError(f"kernel does not decay on the tail grid (slope {slope:.3g})")
    return PowerTail(float(alpha), float(k[-1] * t[-1] ** alpha))


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingPlan:
    """Grid parameters for :func:`check_admissibility`."""

    t_min: float = 1e-6
    t_max: float = 1e4
    n_points: int = 401
    onset_window: float = 1e3
    omegas: tuple = tuple(np.geomspace(1e-3, 1e3, 25))
    log_b: Optional[float] = None

    def grid(self):
        if not (0 < self.t_min < self.t_max):
            raise ValueError("sampling plan needs 0 < t_min < t_max")
        return np.geomspace(self.t_min, self.t_max, self.n_points)


@dataclass(frozen=True)
class CheckResult:
    status: str  # "pass" | "fail" | "inapplicable"
    margin: float = math.nan
    detail: str = ""

    @property
    def ok(self):
        return self.status != "fail"


@dataclass
class AdmissibilityReport:
    checks: dict
    onset: float = 0.0
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None

    def __getitem__(self, key):
        return self.checks[key]

    @property
    def assumption1(self):
        return all(self.checks[k].status == "pass" for k in ("I.a.symmetry", "I.a.positivity", "I.b", "I.c", "I.d"))

    @property
    def assumption2(self):
        return self.checks["IV"].status == "pass" and (
            self.checks["V"].status == "pass" or self.checks["VI"].status == "pass"
        )

    def rows(self):
        for name, res in self.checks.items():
            yield name, res.status, res.margin, res.detail


def _positivity(vals):
    """Strict positivity of samples ordered towards the decaying end.

    A trailing run of exact zeros after positive samples is float
    underflow of a positive quantity, not a sign violation.
    """
    vals = np.asarray(vals, dtype=float)
    pos = vals[vals > 0]
    if np.any(vals < 0) or not np.all(np.isfinite(vals)) or pos.size == 0:
        return CheckResult("fail", float(np.nanmin(vals)))
    zeros = np.nonzero(vals == 0)[0]
    if zeros.size == 0:
        return CheckResult("pass", float(pos.min()))
    if zeros[0] > 0 and np.all(vals[zeros[0]:] == 0):
        return CheckResult("pass", float(pos.min()), f"underflow to 0 from sample {zeros[0]}")
    return CheckResult("fail", 0.0, "zero before the decaying end")


def _onset_of_decrease(t, k):
    """First grid time after which the samples never increase."""
    inc = np.nonzero(np.diff(k) > 0)[0]
    if inc.size == 0:
        return float(t[0])
    return float(t[inc[-1] + 1])


def _convexity_margin(fam, t):
    """Minimum of centred second differences, scaled by max(1, K)."""
    # step adapted to the local curvature scale: a fixed fraction of t
    h = 1e-2 * t
    k_m, k_0, k_p = fam.value(t - h), fam.value(t), fam.value(t + h)
    d2 = (k_p - 2 * k_0 + k_m) / (h * h)
    # analytic second derivative where the family has one
    try:
        d2a = fam.derivative(t, 2)
        d2 = np.where(np.isfinite(d2a), d2a, d2)
    except (NotImplementedError, ValueError):
        pass
    scale = np.maximum(1.0, np.abs(k_0))
    return d2 / scale


def _sigma_fit(t, y):
    slope, _, r2 = _loglog_fit(t, np.abs(y))
    return -slope, r2


def check_admissibility(spec, grid: Optional[SamplingPlan] = None) -> AdmissibilityReport:
    """Numerically check Assumption 1 (I.a-I.d) and Assumption 2 (IV-VI)."""
    plan = grid or SamplingPlan()
    fam = _family(spec)
    t = plan.grid()
    k = fam.value(t)
    checks = {}

    k_neg = fam.value(-t)
    sym_dev = float(np.max(np.abs(k - k_neg)))
    checks["I.a.symmetry"] = CheckResult("pass" if sym_dev == 0 else "fail", sym_dev)
    checks["I.a.positivity"] = _positivity(k)

    # I.b: decay to zero and eventual monotone decrease
    window = t[t <= plan.onset_window]
    onset = _onset_of_decrease(t, k)
    decreasing_after = bool(np.all(np.diff(k[t >= onset]) <= 0))
    far = np.geomspace(plan.t_max, plan.t_max * 1e8, 9)
    kf = fam.value(far)
    decays = bool(kf[0] == 0 or (kf[-1] < kf[0] and np.all(np.diff(kf) <= 0)))
    onset_ok = onset <= window[-1]
    status = "pass" if decays and decreasing_after and onset_ok else "fail"
    checks["I.b"] = CheckResult(status, float(kf[-1]), f"onset={onset:.3g}; K(1e8 t_max)={kf[-1]:.3g}")

    # I.c: local integrability near 0 by refinement of int_{eps}^{1} K
    from scipy import integrate

    vals = []
    for eps in (1e-4, 1e-6, 1e-8, 1e-10):
        v, _ = integrate.quad(lambda s: float(fam.value(s)), eps, 1.0, limit=200)
        vals.append(v)
    incr = np.abs(np.diff(vals))
    # increments must shrink geometrically (t^-1 would give constant ones)
    tiny = incr[-1] <= 1e-12 * max(1.0, abs(vals[-1]))
    ratios = incr[1:] / np.maximum(incr[:-1], 1e-300)
    ok = bool(np.all(np.isfinite(vals)) and (tiny or ratios.max() < 0.99))
    checks["I.c"] = CheckResult("pass" if ok else "fail", float(incr[-1]), "increments of int_eps^1 K")

    # I.d: positivity of F_cos on a frequency grid
    if not decays:
        checks["I.d"] = CheckResult("fail", math.nan, "transform undefined: kernel does not decay")
    else:
        from .oscillatory_transform import fourier_cos

        vals = np.array([fourier_cos(spec if isinstance(spec, KernelSpec) else KernelSpec(fam), w).value for w in plan.omegas])
        checks["I.d"] = _positivity(vals)

    # IV: convexity via second differences
    tc = t[(t > plan.t_min * 1.05) & (t < plan.t_max / 1.05)]
    marg = _convexity_margin(fam, tc)
    worst = float(marg.min())
    if worst >= -1e-10:
        checks["IV"] = CheckResult("pass", worst)
    else:
        bad = tc[marg < -1e-10]
        checks["IV"] = CheckResult("fail", worst, f"negative curvature on [{bad.min():.3g}, {bad.max():.3g}]")

    # V / VI: behaviour near the origin
    ts = np.geomspace(1e-6, 1e-2, 41)
    sigma1 = sigma2 = None
    if math.isfinite(fam.k0):
        d1 = np.abs(fam.derivative(ts, 1))
        s_est = 0.0 if np.all(d1 == 0) else max(_sigma_fit(ts, d1)[0], 0.0)
        if s_est < 1:
            # K' ~ t^(-s) near 0, so any sigma1 in (s, 1) sends t^sigma1 K' to 0
            sigma1 = 0.5 * (1.0 + s_est)
            scaled = ts**sigma1 * d1
            ok = bool(scaled[0] < scaled[-1] or scaled[0] < 1e-12)
            checks["V"] = CheckResult("pass" if ok else "fail", float(scaled[0]), f"sigma1={sigma1:.3g}")
        else:
            checks["V"] = CheckResult("fail", s_est, "K' too singular at 0")
        checks["VI"] = CheckResult("inapplicable", detail="K(0) finite")
    else:
        s_est, r2 = _sigma_fit(ts, fam.value(ts))
        sigma2 = float(s_est)
        scaled = ts**sigma2 * fam.value(ts)
        ok = 0 < sigma2 < 1 and r2 > 0.999 and np.all(np.isfinite(scaled)) and scaled.min() > 0
        checks["VI"] = CheckResult("pass" if ok else "fail", sigma2, f"sigma2={sigma2:.4g}")
        checks["V"] = CheckResult("inapplicable", detail="K(0) infinite")

    # optional differentiability diagnostic K(0)-K(t) = O(|log t|^{-b})
    if plan.log_b is not None:
        if math.isfinite(fam.k0):
            tt = np.geomspace(1e-12, 1e-2, 21)
            ratio = (fam.k0 - fam.value(tt)) * np.abs(np.log(tt)) ** plan.log_b
            ok = bool(np.all(np.isfinite(ratio)) and ratio[0] <= ratio.max() and ratio[0] <= 10 * ratio[-1])
            checks["log-modulus"] = CheckResult("pass" if ok else "fail", float(ratio.max()), f"b={plan.log_b}")
        else:
            checks["log-modulus"] = CheckResult("inapplicable", detail="K(0) infinite")

    return AdmissibilityReport(checks, onset=onset, sigma1=sigma1, sigma2=sigma2)


def satisfies_assumption2(spec) -> bool:
    """Cheap test of convexity plus condition V or VI (no transforms)."""
    fam = _family(spec)
    if not getattr(fam, "convex", False):
        t = np.geomspace(1e-6, 1e4, 201)
        return bool(_convexity_margin(fam, t).min() >= -1e-10)
    if math.isfinite(fam.k0):
        return True  # bounded K' at the origin for every convex family here
    return 0 < fam.sigma0 < 1
