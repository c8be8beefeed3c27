"""Free-Kummer and free-Poisson laws with their multiplicative machinery.

The package provides the two spectral laws in closed form, Boolean-cumulant
bookkeeping for alternating moments, subordination of free multiplicative
convolution, two-resolvent expectation formulas, and the independence
exchange that sends the pair (X, Y) to (U, V) with swapped laws, together
with the regression identities that characterize it.
"""

from __future__ import annotations

from .distributions import (
    FreeKummerParams,
    FreePoissonParams,
    alpha1_regime_split,
    kummer_cauchy,
    kummer_delta,
    kummer_endpoints,
    kummer_from_quadratic,
    kummer_laurent_moments,
    kummer_measure,
    kummer_sigma,
    mp_cauchy,
    mp_inverse_mean,
    mp_measure,
    pushforward_resolvent_shift,
)
from .errors import DomainError, InconsistencyError, NumericError, UsageError
from .hv import (
    GH_series,
    HvInstance,
    compute_constants,
    determine_from_equations,
    hv_instance_from_atoms,
    hv_instance_from_measures,
    hv_instance_from_params,
    hv_instance_random,
    hv_moments,
    k_series_bruteforce,
    k_series_closedform,
    k_special_pointwise,
    mixed_cumulant_table,
    regression_residual,
    verify_hv_property,
)
from .partitions import (
    MomentOracle,
    boolean_cumulant_of_word,
    boolean_cumulants_to_moments,
    moments_to_boolean_cumulants,
    verify_boolmain,
    verify_product_formula,
)
from .series import Series1, Series2, cross_divided_difference, divided_difference
from .subordination import (
    SubordinationPair,
    eta_h_series,
    eta_exchange_residual,
    product_m_pointwise,
    subordination_series,
    verify_conditional_subordination,
    verify_useful_identity,
)
from .transforms import (
    SpectralMeasure,
    cauchy_transform,
    eta_transform,
    extrapolated_density,
    invert_M_on_negative_axis,
    moment_transform,
    stieltjes_invert,
)

__version__ = "0.1.0"
