"""Exact MISE, bandwidth and kernel-order selection for kernel distribution function estimators."""

from .bandwidth import (
    BandwidthChoice,
    cv_bandwidth,
    minimize_h,
    minimize_h_r,
    nrr_bandwidth,
    plugin_select,
)
from .emfit import MixtureFit, em_fit, fit_path, select_m
from .errors import (
    AccuracyError,
    DomainError,
    FitError,
    KdfmiseError,
    PrecisionError,
    SummaryError,
)
from .estimator import FittedCdf, ise, kdfe_eval, rearrange
from .kernels import KernelSpec
from .mise import (
    MiseBreakdown,
    asymptotic_mise,
    asymptotic_opt_bandwidth,
    c_of_r,
    exact_iv,
    exact_isb,
    exact_mise,
    mise_star,
    relative_mise,
)
from .mixture import NormalMixture, ReferenceDistribution, catalog, load_distribution, mw

__version__ = "0.1.0"
