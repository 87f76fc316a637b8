"""Free probability: spectral measures, analytic transforms, free convolution and remainders."""
from .convolution import (
    DEFAULT_EPS,
    FreeSubexpCurve,
    MassDefectError,
    free_convolution_power,
    free_convolve,
    free_max_convolve,
    free_max_power,
    free_subexp_ratio,
)
from .measure import (
    ConeSpec,
    MomentData,
    PowerTail,
    SpectralMeasure,
    bernoulli_pm1,
    body_measure,
    build_measure,
    discrete_measure,
    pareto_measure,
    point_mass,
    semicircle,
)
from .remainders import (
    asymptotic_constants,
    corrected_constants,
    reciprocal_inverse_remainder_check,
    remainder_rG,
    remainder_rphi,
    verify_remainder_equivalence,
)
from .stieltjes import LebesgueMeasure, karamata_constant, measure_from_model, stieltjes_karamata
from .transforms import (
    InversionError,
    PoleError,
    calibrate_cone,
    cauchy_transform,
    cumulants_from_moments,
    f_transform,
    h_transform,
    moments_and_cumulants,
    moments_from_cumulants,
    r_transform,
    voiculescu_transform,
)
