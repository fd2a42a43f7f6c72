import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from glesim.kernels import KernelDomainError, KernelSpec
from glesim.oscillatory_transform import (
    TransformTable,
    abelian_large_omega,
    abelian_small_omega,
    fourier_cos,
    fourier_cos_convex,
    fourier_sin,
    transform_table,
    wynn_epsilon,
)

FRESNEL = math.sqrt(math.pi / 2)  # int_0^inf cos(t)/sqrt(t) dt = int_0^inf sin(t)/sqrt(t) dt
ROUSE_SMALL_OMEGA = (math.sqrt(math.pi) / 2) * math.sqrt(math.pi / 2)  # ~ 1.1107


class TestFourierCos:
    def test_exponential_closed_and_numeric(self, exp1):
        assert fourier_cos(exp1, 1.0).value == pytest.approx(0.5, abs=1e-15)
        assert fourier_cos(exp1, 1.0, method="numeric").value == pytest.approx(0.5, abs=1e-10)

    def test_fresnel(self):
        spec = KernelSpec.power_alpha(1.0, 0.5)
        assert fourier_cos(spec, 1.0).value == pytest.approx(FRESNEL, rel=1e-12)
        v = fourier_cos(spec, 1.0, method="numeric")
        assert v.value == pytest.approx(FRESNEL, abs=1e-8)
        assert v.method == "numeric"

    def test_rouse_with_constant_term_is_rejected(self):
        with pytest.raises(KernelDomainError):
            fourier_cos(KernelSpec.rouse(2.0, 1.0, 4), 1.0)

    def test_numeric_matches_direct_quadrature_for_rouse_limit(self):
        spec = KernelSpec.rouse(2.0)
        ref, _ = integrate.quad(lambda t: float(spec(t)), 0, np.inf, weight="cos", wvar=2.0)
        assert fourier_cos(spec, 2.0, method="numeric").value == pytest.approx(ref, abs=1e-9)
        assert fourier_cos(spec, 2.0).value == pytest.approx(ref, abs=1e-9)

    def test_rejects_nonpositive_frequency(self, exp1):
        with pytest.raises(ValueError):
            fourier_cos(exp1, 0.0)
        with pytest.raises(ValueError):
            fourier_sin(exp1, -1.0)


class TestFourierSin:
    def test_exponential(self, exp1):
        assert fourier_sin(exp1, 1.0).value == pytest.approx(0.5, abs=1e-15)
        assert fourier_sin(exp1, 1.0, method="numeric").value == pytest.approx(0.5, abs=1e-10)

    def test_exponential_high_frequency(self, exp1):
        # w / (1 + w^2) at w = 1e6
        assert fourier_sin(exp1, 1e6).value == pytest.approx(1e6 / (1 + 1e12), rel=1e-12)
        assert fourier_sin(exp1, 1e6).value < 1.1e-6

    def test_fresnel(self):
        spec = KernelSpec.power_alpha(1.0, 0.5)
        assert fourier_sin(spec, 1.0, method="numeric").value == pytest.approx(FRESNEL, abs=1e-8)


@pytest.mark.parametrize("spec", [
    KernelSpec.exp_sum([(2, 1), (1, 3)]),
    KernelSpec.rouse(2.0),
    KernelSpec.rouse(3.0, 2.0, 16, drop_zero=True),
    KernelSpec.power_alpha(1.0, 0.3),
    KernelSpec.squared_cm([(1, 1), (0.3, 0.05)]),
], ids=["exp", "rouse_limit", "rouse16", "power", "squared_cm"])
@pytest.mark.parametrize("omega", [1e-3, 0.1, 1.0, 30.0])
def test_numeric_equals_closed_form(spec, omega):
    for fn in (fourier_cos, fourier_sin):
        closed = fn(spec, omega, method="closed").value
        num = fn(spec, omega, method="numeric")
        assert num.value == pytest.approx(closed, rel=1e-7, abs=1e-10), fn.__name__


class TestConvexRepresentation:
    def test_exponential(self, exp1):
        assert fourier_cos_convex(exp1, 1.0).value == pytest.approx(0.5, abs=1e-12)

    def test_power_law_matches_fourier_cos(self):
        spec = KernelSpec.power_alpha(1.0, 0.5)
        a = fourier_cos_convex(spec, 2.0).value
        b = fourier_cos(spec, 2.0, method="numeric").value
        assert a == pytest.approx(b, abs=1e-8)
        # scale invariance: F_cos(2) = sqrt(pi/2) / sqrt(2)
        assert a == pytest.approx(FRESNEL / math.sqrt(2), abs=1e-8)

    def test_non_convex_rejected(self):
        with pytest.raises(KernelDomainError):
            fourier_cos_convex(KernelSpec.squared_cm([(1, 1)]), 1.0)


class TestAbelian:
    def test_small_omega_power_law(self):
        rep = abelian_small_omega(KernelSpec.power_alpha(1.0, 0.5), 0.5, method="numeric")
        assert rep.limit_cos == pytest.approx(FRESNEL, rel=1e-6)
        assert rep.limit_sin == pytest.approx(FRESNEL, rel=1e-6)
        assert rep.target_cos == pytest.approx(FRESNEL, rel=1e-12)

    def test_small_omega_rouse_limit(self):
        rep = abelian_small_omega(KernelSpec.rouse(2.0), 0.5)
        assert rep.limit_cos == pytest.approx(ROUSE_SMALL_OMEGA, rel=1e-4)
        assert rep.limit_cos == pytest.approx(1.1107, abs=1e-4)

    def test_small_omega_rejects_integrable(self, exp1):
        with pytest.raises(KernelDomainError):
            abelian_small_omega(exp1)

    def test_large_omega_exponential(self, exp1):
        rep = abelian_large_omega(exp1, 0.5)
        assert rep.limit_sin == pytest.approx(1.0, rel=1e-6)
        assert rep.target_sin == 1.0
        # w^1.5 / (1 + w^2) -> 0
        assert rep.scaled_cos[-1] < rep.scaled_cos[0]
        assert rep.target_cos == 0.0

    def test_large_omega_power_law(self):
        rep = abelian_large_omega(KernelSpec.power_alpha(1.0, 0.5), 0.5)
        assert rep.limit_cos == pytest.approx(FRESNEL, rel=1e-10)


class TestTable:
    def test_columns_and_validation(self, exp1):
        tab = transform_table(exp1, [0.5, 1.0, 2.0])
        assert isinstance(tab, TransformTable)
        np.testing.assert_allclose(tab.f_cos, 1 / (1 + np.array([0.25, 1, 4])), rtol=1e-14)
        assert list(tab.columns()) == ["omega", "f_cos", "f_sin", "err_est"]
        with pytest.raises(ValueError):
            transform_table(exp1, [2.0, 1.0])
        assert len(transform_table(exp1, [])) == 0


def test_wynn_epsilon_accelerates_alternating_series():
    # partial sums of log 2 = 1 - 1/2 + 1/3 - ...
    s = np.cumsum([(-1) ** k / (k + 1) for k in range(20)])
    est, err = wynn_epsilon(s)
    assert est == pytest.approx(math.log(2), abs=1e-12)
    assert abs(s[-1] - math.log(2)) > 1e-3


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.1, 5), lam=st.floats(0.05, 20), w=st.floats(1e-3, 1e3))
def test_exponential_numeric_transform_property(c, lam, w):
    spec = KernelSpec.exp_sum([(c, lam)])
    fc = fourier_cos(spec, w, method="numeric").value
    fs = fourier_sin(spec, w, method="numeric").value
    assert fc == pytest.approx(c * lam / (lam**2 + w**2), rel=1e-6, abs=1e-12)
    assert fs == pytest.approx(c * w / (lam**2 + w**2), rel=1e-6, abs=1e-12)
