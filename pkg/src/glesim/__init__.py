"""Numerical tools for the generalized Langevin equation: memory kernels,
oscillatory Fourier transforms, spectral densities, msd/covariance
quadrature, spectral path synthesis and transient-diffusion analysis."""

__version__ = "0.1.0"

from .kernels import (  # noqa: E402
    GeneralizedRouse,
    Integrable,
    KernelDomainError,
    KernelSpec,
    PowerLawAlpha,
    PowerLawH,
    PowerTail,
    SumOfExponentials,
    check_admissibility,
    classify_tail,
    eval_kernel,
)
from .oscillatory_transform import fourier_cos, fourier_cos_convex, fourier_sin, transform_table  # noqa: E402
from .spectral_density import GLEParams, InadmissibleError, Regime, SpectralDensity, rhat  # noqa: E402
from .msd_engine import covariance, fit_exponent, msd, msd_curve, predict_exponent  # noqa: E402
from .path_synth import SynthesisConfig, empirical_msd, synthesize  # noqa: E402

__all__ = [
    "GeneralizedRouse",
    "Integrable",
    "KernelDomainError",
    "KernelSpec",
    "PowerLawAlpha",
    "PowerLawH",
    "PowerTail",
    "SumOfExponentials",
    "check_admissibility",
    "classify_tail",
    "eval_kernel",
    "fourier_cos",
    "fourier_cos_convex",
    "fourier_sin",
    "transform_table",
    "GLEParams",
    "InadmissibleError",
    "Regime",
    "SpectralDensity",
    "rhat",
    "covariance",
    "fit_exponent",
    "msd",
    "msd_curve",
    "predict_exponent",
    "SynthesisConfig",
    "empirical_msd",
    "synthesize",
]
