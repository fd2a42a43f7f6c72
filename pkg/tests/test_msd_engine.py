import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from glesim.kernels import Integrable, KernelSpec, PowerTail
from glesim.msd_engine import (
    MSDCurve,
    PredictionUnavailable,
    acf_msd_crosscheck,
    acf_velocity,
    covariance,
    covariance_grid,
    fit_exponent,
    kolmogorov_constant,
    msd,
    msd_curve,
    msd_scaled,
    predict_exponent,
)
from glesim.spectral_density import GLEParams, SpectralDensity, l1_norm
from glesim.transient_analysis import trig_lhs, trig_rhs


def _power_msd_exact(c, alpha, t):
    """m = lambda = 0, K = c t^-alpha: msd = 4 C t^alpha Gamma(1-alpha) cos(pi alpha/2) / alpha
    with C the limit of w^(alpha-1) r_hat, which is exact at every w by scale invariance."""
    amp = c * special.gamma(1 - alpha)
    fc = amp * math.sin(math.pi * alpha / 2)
    fs = amp * math.cos(math.pi * alpha / 2)
    C = (2 / math.pi) * fc / (fc * fc + fs * fs)
    return 4 * C * t**alpha * special.gamma(1 - alpha) * math.cos(math.pi * alpha / 2) / alpha


class TestMSD:
    def test_small_time_taylor_bound(self, sd_exp):
        total, _ = l1_norm(sd_exp)
        v = msd(sd_exp, 1e-4).value
        assert 0 < v <= 1e-8 * (total + 1)

    def test_diffusive_constant(self, sd_exp):
        assert msd(sd_exp, 1e3).value / 1e3 == pytest.approx(2.0, rel=0.02)
        assert msd(sd_exp, 1e6).value / 1e6 == pytest.approx(2.0, rel=1e-6)

    def test_against_direct_quadrature(self, sd_exp):
        t = 3.0
        f = lambda w: 4 * (2 * math.sin(t * w / 2) ** 2) / w**2 * sd_exp(w) if w > 0 else 2 * t * t * sd_exp(1e-300)
        edges = np.concatenate([[0.0], np.geomspace(0.01, 1e4, 49)])
        ref = sum(integrate.quad(f, a, b, limit=5000, epsabs=0, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:]))
        ref += integrate.quad(lambda u: 8 * sd_exp(1 / u) if u > 0 else 0.0, 0, 1e-4)[0]  # crude tail, tiny
        assert msd(sd_exp, t).value == pytest.approx(ref, rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
    @pytest.mark.parametrize("t", [1e-3, 1.0, 1e4])
    def test_scale_invariant_power_law(self, alpha, t):
        sd = SpectralDensity(KernelSpec.power_alpha(1.0, alpha), GLEParams(0, 0, 1))
        assert msd(sd, t).value == pytest.approx(_power_msd_exact(1.0, alpha, t), rel=1e-10)

    def test_zero_time_and_errors(self, sd_exp):
        assert msd(sd_exp, 0.0).value == 0.0
        with pytest.raises(ValueError):
            msd(sd_exp, -1.0)
        with pytest.raises(ValueError):
            msd(sd_exp, math.inf)

    def test_converged_flag_and_tolerance(self, sd_exp):
        r = msd(sd_exp, 1.0)
        assert r.converged and r.err_est < 1e-10
        assert not msd(sd_exp, 1.0, tol=1e-30).converged

    @pytest.mark.parametrize("t", [1.0, 10.0, 100.0])
    def test_scaling_identity(self, t):
        sd = SpectralDensity(KernelSpec.power_h(0.75), GLEParams(1, 0, 1))
        a, b = msd(sd, t), msd_scaled(sd, t)
        assert abs(a.value - b.value) <= 10 * (a.err_est + b.err_est) + 1e-10 * a.value

    def test_kou_subdiffusive(self):
        sd = SpectralDensity(KernelSpec.power_h(0.75), GLEParams(1, 0, 1))
        curve = msd_curve(sd, np.geomspace(1e2, 1e4, 21))
        assert curve.fit.eta == pytest.approx(0.5, abs=0.03)
        assert curve.predicted == 0.5


class TestCovariance:
    def test_zero_argument(self, sd_exp):
        assert covariance(sd_exp, 3.0, 0.0).value == 0.0
        assert covariance(sd_exp, 0.0, 3.0, method="direct").value == 0.0

    def test_diagonal_equals_msd(self, sd_exp):
        m = msd(sd_exp, 1.0).value
        assert covariance(sd_exp, 1.0, 1.0).value == pytest.approx(m, rel=1e-8)
        assert covariance(sd_exp, 1.0, 1.0, method="direct").value == pytest.approx(m, rel=1e-8)

    @pytest.mark.parametrize("t,s", [(1.0, 0.5), (10.0, 3.0), (7.0, 6.5)])
    def test_direct_equals_identity(self, sd_exp, t, s):
        a = covariance(sd_exp, t, s).value
        b = covariance(sd_exp, t, s, method="direct").value
        assert a == pytest.approx(b, rel=1e-9)

    def test_unknown_method(self, sd_exp):
        with pytest.raises(ValueError):
            covariance(sd_exp, 1.0, 1.0, method="fft")

    def test_grid_invariants(self):
        sd = SpectralDensity(KernelSpec.power_h(0.75), GLEParams(1, 0, 1))
        times = np.linspace(0.5, 16.0, 32)
        cache = {}
        g = covariance_grid(sd, times, cache)
        assert np.array_equal(g.cov, g.cov.T)
        np.testing.assert_allclose(np.diag(g.cov), [cache[float(t)].value for t in times], rtol=0)
        assert g.is_psd()
        assert g.cauchy_schwarz_violation() <= 1e-9 * float(np.max(np.diag(g.cov))) ** 2


@settings(max_examples=200, deadline=None)
@given(t=st.floats(-50, 50), s=st.floats(-50, 50), w=st.floats(-20, 20))
def test_covariance_integrand_trig_bound(t, s, w):
    assert trig_lhs(t * w, s * w) <= trig_rhs(t * w, s * w) + 1e-12


class TestFit:
    def _curve(self, eta, n=21):
        t = np.geomspace(1, 1e4, n)
        return MSDCurve(t, 3.0 * t**eta, np.zeros(n))

    def test_exact_power(self):
        f = fit_exponent(self._curve(0.37))
        assert f.eta == pytest.approx(0.37, abs=1e-12)
        assert f.window == (100.0, 1e4)
        assert f.contains(0.37)

    def test_needs_eight_points(self):
        with pytest.raises(ValueError):
            fit_exponent(self._curve(0.5, n=9))  # top two decades hold 5 points
        with pytest.raises(ValueError):
            fit_exponent(self._curve(0.5), window=(0.5, 10))

    def test_bias_term_covers_power_correction(self):
        t = np.geomspace(1e2, 1e4, 21)
        y = t**0.5 * (1 + 0.3 * t**-0.4)
        f = fit_exponent(MSDCurve(t, y, np.zeros_like(t)))
        assert abs(f.eta - 0.5) > 2 * math.hypot(f.se_ols, f.se_quad)
        assert f.contains(0.5)
        assert f.eta_extrapolated == pytest.approx(0.5, abs=1e-3)
        assert not f.contains(0.6)

    def test_exponential_curve(self, sd_exp):
        c = msd_curve(sd_exp, np.geomspace(1e2, 1e4, 21))
        assert c.fit.eta == pytest.approx(1.0, abs=0.02)
        assert c.predicted == 1.0


class TestPredict:
    def test_table(self):
        assert predict_exponent(Integrable(), GLEParams(1, 0)) == 1.0
        assert predict_exponent(Integrable(), GLEParams(0, 1)) == 1.0
        assert predict_exponent(PowerTail(0.5, 1.0), GLEParams(1, 0)) == 0.5

    def test_unavailable_without_assumption2(self):
        with pytest.raises(PredictionUnavailable):
            predict_exponent(Integrable(), GLEParams(0, 0), assumption2=False)

    def test_squared_cm_curve_has_no_prediction(self):
        sd = SpectralDensity(KernelSpec.squared_cm([(1, 1)]), GLEParams(1, 0, 1))
        c = msd_curve(sd, np.geomspace(1, 100, 8), fit=False)
        assert c.predicted == 1.0  # m > 0: Assumption 2 is not needed


class TestVelocityACF:
    def test_variance_is_total_mass(self, sd_exp):
        total, _ = l1_norm(sd_exp)
        r0 = acf_velocity(sd_exp, 0.0).value
        assert r0 == pytest.approx(total, rel=1e-8)
        assert r0 == pytest.approx(1.0, rel=1e-8)

    def test_crosscheck(self, sd_exp):
        lhs, m, tol = acf_msd_crosscheck(sd_exp, 1.0)
        assert abs(lhs - m) <= tol

    def test_rejected_without_mass(self, exp1):
        sd = SpectralDensity(exp1, GLEParams(0, 1, 1))
        with pytest.raises(ValueError, match="not well-defined"):
            acf_velocity(sd, 1.0)


def _pairs(T, n, seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, T, n)
    s = rng.uniform(0, T, n)
    return t, s


def test_kolmogorov_mzero_lpos():
    sd = SpectralDensity(KernelSpec.exp_sum([(1, 1)]), GLEParams(0, 1, 1))
    T, kappa = 10.0, 0.5
    C = kolmogorov_constant(sd, T, kappa)
    t, s = _pairs(T, 200, 7)
    for a, b in zip(t, s):
        d = abs(a - b)
        if d == 0:
            continue
        inc = msd(sd, d).value  # stationary increments: E|X(t)-X(s)|^2 = msd(|t-s|)
        assert inc <= C * d**kappa
