import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glesim.kernels import KernelSpec, check_admissibility
from glesim.spectral_density import (
    GLEParams,
    InadmissibleError,
    Regime,
    SpectralDensity,
    build_table,
    l1_norm,
    rhat,
    rhat_smallomega_scaled,
    tail_slope,
)

POWER_MZLZ_LIMIT = (2 / math.pi) * (1 / (2 * math.sqrt(math.pi / 2)))  # ~ 0.2539745


def test_regime_is_total():
    assert GLEParams(1, 0).regime() is Regime.MposLzero
    assert GLEParams(1, 2).regime() is Regime.MposLpos
    assert GLEParams(0, 2).regime() is Regime.MzeroLpos
    assert GLEParams(0, 0).regime() is Regime.MzeroLzero


@pytest.mark.parametrize("kw", [dict(m=-1), dict(lam=-0.1), dict(beta=0), dict(m=math.inf)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        GLEParams(**kw)


class TestRhat:
    def test_value_at_one(self, sd_exp):
        # F_cos = F_sin = 1/2: (1/pi) * 0.5 / (0.25 + 0.25)
        assert rhat(sd_exp, 1.0) == pytest.approx(1 / math.pi, rel=1e-15)

    def test_even(self, sd_exp):
        w = np.geomspace(1e-3, 1e3, 31)
        np.testing.assert_array_equal(sd_exp(w), sd_exp(-w))

    def test_zero_frequency_rejected(self, sd_exp):
        with pytest.raises(ValueError):
            sd_exp(0.0)

    def test_small_omega_limit_exp(self, sd_exp):
        lim, unc, expo = rhat_smallomega_scaled(sd_exp)
        assert expo == 0
        assert lim == pytest.approx(1 / math.pi, rel=1e-9)
        assert unc < 1e-9

    def test_small_omega_limit_mzero_lpos(self, exp1):
        sd = SpectralDensity(exp1, GLEParams(0, 1, 1))
        lim, _, _ = rhat_smallomega_scaled(sd)
        assert lim == pytest.approx(1 / (2 * math.pi), rel=1e-9)

    def test_bound_lambda_two(self, exp1):
        sd = SpectralDensity(exp1, GLEParams(0, 2, 1))
        w = np.geomspace(1e-4, 1e4, 400)
        assert np.all(sd(w) <= 1 / (2 * math.pi) + 1e-15)
        assert sd.bound == pytest.approx(1 / (2 * math.pi))

    def test_power_law_vanishes_at_origin(self):
        sd = SpectralDensity(KernelSpec.power_alpha(1, 0.5), GLEParams(1, 0, 1))
        assert sd(1e-4) < 0.02
        assert sd(1e-8) < sd(1e-4)

    def test_power_law_mzero_lzero_scaled_limit(self):
        sd = SpectralDensity(KernelSpec.power_alpha(1, 0.5), GLEParams(0, 0, 1))
        lim, unc, expo = rhat_smallomega_scaled(sd)
        assert expo == pytest.approx(0.5)
        assert lim == pytest.approx(POWER_MZLZ_LIMIT, rel=1e-9)

    def test_mzero_lzero_needs_assumption2(self):
        with pytest.raises(InadmissibleError):
            SpectralDensity(KernelSpec.squared_cm([(1, 1)]), GLEParams(0, 0, 1))

    def test_closed_equals_numeric(self):
        spec = KernelSpec.exp_sum([(2, 1), (1, 3)])
        a = SpectralDensity(spec, GLEParams(1, 0.5, 2))
        b = SpectralDensity(spec, GLEParams(1, 0.5, 2), method="numeric")
        for w in (1e-3, 0.3, 5.0, 100.0):
            assert b(w) == pytest.approx(a(w), rel=1e-8)
        assert b.cache_size() == 4
        b(0.3)
        assert b.cache_size() == 4

    def test_beta_enters_formula(self, exp1):
        # general formula by hand at w = 1 with beta = 2, lambda = 0.5, m = 1
        fc = fs = 0.5
        ref = (2 * 0.5 + 2 * 2 * fc) / (2 * math.pi * ((0.5 + 2 * fc) ** 2 + (1 - 2 * fs) ** 2))
        assert SpectralDensity(exp1, GLEParams(1, 0.5, 2))(1.0) == pytest.approx(ref, rel=1e-15)


@pytest.mark.parametrize("spec", [
    KernelSpec.exp_sum([(1, 1)]),
    KernelSpec.rouse(2.0),
    KernelSpec.power_h(0.75),
    KernelSpec.rouse(2, 1.0, 16, drop_zero=True),
])
@pytest.mark.parametrize("m,lam", [(1, 0), (1, 1), (2, 0.5)])
def test_equipartition(spec, m, lam):
    """int r_hat = 1/m whenever m > 0."""
    sd = SpectralDensity(spec, GLEParams(m, lam, 1))
    v, err = l1_norm(sd)
    assert v == pytest.approx(1 / m, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.05, 10), m=st.floats(0, 5), w=st.floats(1e-4, 1e4))
def test_boundedness_property(lam, m, w):
    sd = SpectralDensity(KernelSpec.rouse(2.0), GLEParams(m, lam, 1.0))
    v = sd(w)
    assert 0 <= v <= 1 / (math.pi * lam) * (1 + 1e-12)


def test_mpos_tail_decays_like_inverse_square():
    sd = SpectralDensity(KernelSpec.exp_sum([(1, 1)]), GLEParams(1, 0, 1))
    w = np.geomspace(1e2, 1e4, 20)
    assert np.all(sd(w) * w**2 < 1.0)


def test_condition_vi_growth():
    # K = t^-0.5 (sigma2 = 0.5) with m = lambda = 0: r_hat ~ w^(1 - sigma2)
    spec = KernelSpec.power_alpha(1, 0.5)
    sigma2 = check_admissibility(spec).sigma2
    sd = SpectralDensity(spec, GLEParams(0, 0, 1))
    assert tail_slope(sd) == pytest.approx(1 - sigma2, abs=0.05)


class TestTable:
    def test_single_point(self, sd_exp):
        tab = build_table(sd_exp, [1.0])
        assert tab.rhat[0] == pytest.approx(1 / math.pi, rel=1e-15)
        assert list(tab.columns()) == ["omega", "f_cos", "f_sin", "rhat", "err_est"]

    def test_empty(self, sd_exp):
        assert len(build_table(sd_exp, [])) == 0

    def test_descending(self, sd_exp):
        with pytest.raises(ValueError):
            build_table(sd_exp, [2.0, 1.0])
