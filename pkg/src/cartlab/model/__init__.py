from .components import (
    Constant,
    ExpressionComponent,
    Linear,
    Piecewise,
    PolynomialComponent,
    SmoothStronglyConvex,
    StronglyIncreasing,
    Tabulated,
    UnivariateComponent,
    component_from_dict,
    derivative_sign_changes,
    total_variation,
)
from .data import (
    CsvFormatError,
    Dataset,
    NoiseSpec,
    derive_seed,
    fmt,
    generate_dataset,
    make_rng,
)
from .distributions import CoordinateDensity, ProductDistribution, distribution_from_dict
from .signals import (
    AdditiveSignal,
    GridSignal,
    SignalFunction,
    XorSignal,
    evaluate_signal,
    signal_from_dict,
)


def linear_signal(slope=1.0, intercept=0.0):
    """The univariate signal f*(t) = slope * t + intercept."""
    return AdditiveSignal([Linear(slope, intercept)])


def polynomial_signal(*coefficient_lists):
    return AdditiveSignal([PolynomialComponent(c) for c in coefficient_lists])
