import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from glesim.kernels import (
    CompletelyMonotoneAtoms,
    GeneralizedRouse,
    Integrable,
    KernelDomainError,
    KernelSpec,
    PowerLawAlpha,
    PowerLawH,
    PowerTail,
    SamplingPlan,
    UnclassifiedTailError,
    check_admissibility,
    classify_tail,
    eval_derivative,
    eval_kernel,
    satisfies_assumption2,
)

# frozen oracle values
SQRT_PI_HALF = math.sqrt(math.pi) / 2  # (1/2) Gamma(1/2)


class TestEvalKernel:
    def test_rouse_single_term_is_constant(self):
        assert eval_kernel(KernelSpec.rouse(2, 1.0, 1), 3.7) == 1.0

    def test_kou_kernel_at_one(self):
        # 2 H (2H - 1) t^(2H-2) with H = 0.75, t = 1
        assert eval_kernel(KernelSpec.power_h(0.75), 1.0) == pytest.approx(0.75, abs=1e-15)

    def test_exponential_at_zero(self):
        assert eval_kernel(KernelSpec.exp_sum([(1, 1)]), 0.0) == 1.0

    def test_power_law_at_zero_is_domain_error(self):
        with pytest.raises(KernelDomainError):
            eval_kernel(KernelSpec.power_alpha(1.0, 0.5), 0.0)
        assert not issubclass(KernelDomainError, OverflowError)

    def test_rouse_limit_matches_direct_quadrature(self):
        spec = KernelSpec.rouse(2.0, 1.5)
        for t in (1e-5, 0.3, 2.0, 40.0, 3e3):
            ref, _ = integrate.quad(lambda x: math.exp(-(t / 1.5) * x**2), 0, 1, epsabs=0, epsrel=1e-13)
            assert eval_kernel(spec, t) == pytest.approx(ref, rel=1e-12)

    def test_rouse_limit_incomplete_gamma_form(self):
        # (tau0^(1/p) / (p t^(1/p))) * lower_gamma(1/p, t/tau0)
        p, tau0, t = 3.0, 2.0, 5.0
        ref = tau0 ** (1 / p) / (p * t ** (1 / p)) * special.gammainc(1 / p, t / tau0) * special.gamma(1 / p)
        assert eval_kernel(KernelSpec.rouse(p, tau0), t) == pytest.approx(ref, rel=1e-13)

    def test_finite_rouse_sum(self):
        N, p, t = 4, 2.0, 1.3
        ref = sum(math.exp(-t * (k / N) ** p) for k in range(N)) / N
        assert eval_kernel(KernelSpec.rouse(p, 1.0, N), t) == pytest.approx(ref, rel=1e-15)
        ref1 = sum(math.exp(-t * (k / N) ** p) for k in range(1, N)) / N
        assert eval_kernel(KernelSpec.rouse(p, 1.0, N, drop_zero=True), t) == pytest.approx(ref1, rel=1e-15)

    def test_squared_cm_is_gaussian(self):
        assert eval_kernel(KernelSpec.squared_cm([(1, 1)]), 0.7) == pytest.approx(math.exp(-0.49), rel=1e-15)

    def test_derivatives_against_finite_differences(self):
        for spec in (KernelSpec.rouse(2.0), KernelSpec.power_alpha(1.0, 0.3),
                     KernelSpec.exp_sum([(2, 1), (1, 3)]), KernelSpec.squared_cm([(1, 2)])):
            t, h = 0.8, 1e-5
            fd = (eval_kernel(spec, t + h) - eval_kernel(spec, t - h)) / (2 * h)
            assert eval_derivative(spec, t, 1) == pytest.approx(fd, rel=1e-7)

    @pytest.mark.parametrize("bad", [
        lambda: KernelSpec.exp_sum([(-1, 1)]),
        lambda: KernelSpec.exp_sum([(1, 0)]),
        lambda: KernelSpec.rouse(0.5),
        lambda: KernelSpec.rouse(2, -1.0),
        lambda: KernelSpec.rouse(2, 1.0, 0),
        lambda: KernelSpec.power_h(0.5),
        lambda: KernelSpec.power_h(1.0),
        lambda: KernelSpec.power_alpha(1.0, 1.0),
        lambda: KernelSpec.power_alpha(0.0, 0.5),
        lambda: KernelSpec.cm_atoms([(1, -1)]),
    ])
    def test_domain_validation(self, bad):
        with pytest.raises(KernelDomainError):
            bad()


FAMILIES = [
    KernelSpec.exp_sum([(2, 1), (1, 3)]),
    KernelSpec.rouse(2.0),
    KernelSpec.rouse(3.0, 0.5, 8),
    KernelSpec.power_h(0.8),
    KernelSpec.power_alpha(1.5, 0.4),
    KernelSpec.cm_atoms([(1, 0.5), (0.2, 4)]),
    KernelSpec.squared_cm([(1, 1), (0.5, 0.1)]),
]


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: type(s.family).__name__)
@settings(max_examples=50, deadline=None)
@given(t=st.floats(1e-6, 1e6))
def test_symmetry_is_exact(spec, t):
    assert eval_kernel(spec, t) == eval_kernel(spec, -t)


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: type(s.family).__name__)
def test_positive_on_grid(spec):
    # capped so exponential terms stay above the float underflow threshold
    t = np.geomspace(1e-6, 50.0, 200)
    assert np.all(spec(t) > 0)


@settings(max_examples=40, deadline=None)
@given(atoms=st.lists(st.tuples(st.floats(0.01, 10), st.floats(0.0, 5)), min_size=1, max_size=5))
def test_cm_atoms_alternating_derivative_signs(atoms):
    fam = CompletelyMonotoneAtoms(tuple(atoms))
    t = np.linspace(0.0, 20.0, 101)
    for order in (1, 2, 3):
        d = fam.derivative(t, order)
        assert np.all((-1) ** order * d >= -1e-300)
    assert np.all(np.diff(fam.value(t)) <= 0)


def test_rouse_finite_converges_monotonically_to_limit():
    t = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 300)])
    lim = GeneralizedRouse(2.0).value(t)
    sups = [float(np.max(np.abs(GeneralizedRouse(2.0, 1.0, N).value(t) - lim))) for N in (4, 8, 16, 32, 64, 128)]
    assert all(b < a for a, b in zip(sups[:-1], sups[1:]))


class TestClassifyTail:
    def test_rouse_limit(self):
        tail = classify_tail(KernelSpec.rouse(2.0, 1.0))
        assert isinstance(tail, PowerTail)
        assert tail.alpha == pytest.approx(0.5)
        assert tail.c == pytest.approx(SQRT_PI_HALF, rel=1e-12)
        assert tail.c == pytest.approx(0.8862, abs=1e-4)

    def test_kou(self):
        tail = classify_tail(KernelSpec.power_h(0.75))
        assert isinstance(tail, PowerTail)
        assert tail.alpha == pytest.approx(0.5)
        assert tail.c == pytest.approx(0.75)

    def test_exp_sum(self):
        assert isinstance(classify_tail(KernelSpec.exp_sum([(2, 1), (1, 3)])), Integrable)

    def test_finite_rouse_and_atoms(self):
        assert isinstance(classify_tail(KernelSpec.rouse(2, 1.0, 16, drop_zero=True)), Integrable)
        assert isinstance(classify_tail(KernelSpec.cm_atoms([(1, 1), (2, 0.1)])), Integrable)

    @pytest.mark.parametrize("spec", [KernelSpec.rouse(2.0), KernelSpec.rouse(4.0, 2.0),
                                      KernelSpec.power_alpha(1, 0.3), KernelSpec.power_h(0.6)])
    def test_numeric_agrees_with_analytic(self, spec):
        a = classify_tail(spec)
        n = classify_tail(spec, numeric=True)
        assert isinstance(n, PowerTail)
        assert abs(n.alpha - a.alpha) <= 0.02

    def test_numeric_exponential_is_integrable(self):
        assert isinstance(classify_tail(KernelSpec.exp_sum([(1, 1e-3)]), t0=10.0, numeric=True), Integrable)

    def test_constant_kernel_is_unclassified(self):
        with pytest.raises(UnclassifiedTailError):
            classify_tail(KernelSpec.rouse(2, 1.0, 1))

    def test_power_tail_validates_alpha(self):
        with pytest.raises(ValueError):
            PowerTail(1.0, 1.0)


class TestAdmissibility:
    def test_exponential(self):
        rep = check_admissibility(KernelSpec.exp_sum([(1, 1)]))
        for k in ("I.a.symmetry", "I.a.positivity", "I.b", "I.c", "I.d", "IV", "V"):
            assert rep[k].status == "pass", k
        assert rep["VI"].status == "inapplicable"
        assert rep.assumption1 and rep.assumption2

    def test_kou(self):
        rep = check_admissibility(KernelSpec.power_h(0.75))
        for k in ("I.a.symmetry", "I.a.positivity", "I.b", "I.c", "I.d", "IV", "VI"):
            assert rep[k].status == "pass", k
        assert rep["V"].status == "inapplicable"
        assert rep.sigma2 == pytest.approx(0.5, abs=1e-6)

    def test_gaussian_fails_convexity_only(self):
        rep = check_admissibility(KernelSpec.squared_cm([(1, 1)]))
        assert rep["IV"].status == "fail"
        assert rep["I.d"].status == "pass"
        # the sampled region of negative curvature sits inside (0, 1/sqrt 2)
        lo, hi = (float(x) for x in rep["IV"].detail.split("[")[1].rstrip("]").split(","))
        assert 0 < lo and hi < 1 / math.sqrt(2)

    def test_constant_kernel_fails_decay(self):
        rep = check_admissibility(KernelSpec.rouse(2, 1.0, 4))
        assert rep["I.b"].status == "fail"
        assert rep["I.d"].status == "fail"

    def test_log_modulus_diagnostic(self):
        rep = check_admissibility(KernelSpec.exp_sum([(1, 1)]), SamplingPlan(log_b=1.0))
        assert rep["log-modulus"].status == "pass"
        rep = check_admissibility(KernelSpec.power_h(0.75), SamplingPlan(log_b=1.0))
        assert rep["log-modulus"].status == "inapplicable"

    def test_bad_plan(self):
        with pytest.raises(ValueError):
            check_admissibility(KernelSpec.exp_sum([(1, 1)]), SamplingPlan(t_min=1.0, t_max=0.5))

    def test_assumption2_cheap_check(self):
        assert satisfies_assumption2(KernelSpec.power_alpha(1, 0.5))
        assert satisfies_assumption2(KernelSpec.rouse(2.0))
        assert not satisfies_assumption2(KernelSpec.squared_cm([(1, 1)]))


def test_power_law_h_maps_to_alpha():
    fam = PowerLawH(0.75)
    assert isinstance(fam, PowerLawAlpha)
    assert fam.alpha == pytest.approx(0.5)
    assert fam.c == pytest.approx(0.75)
