"""Statistics toolkit: chi-square + Cramer's V, two-sample KS,
negative-binomial regression, VIF, and channel-combination profiling."""

from .chisq import ChiSquareResult, StatsError, chi_square
from .ks import KsResult, ks_two_sample
from .negbin import NbFit, nb_loglik, nb_regression
from .profile import (
    CombinationStats,
    EmptyProfileError,
    EngagementReport,
    PATTERNS,
    combination_profile,
    engagement_profile,
)
from .vif import vif
from ._special import chi2_sf, kolmogorov_sf, normal_sf, regularized_gamma_p, regularized_gamma_q

__all__ = [
    "ChiSquareResult",
    "CombinationStats",
    "EmptyProfileError",
    "EngagementReport",
    "KsResult",
    "NbFit",
    "PATTERNS",
    "StatsError",
    "chi2_sf",
    "chi_square",
    "combination_profile",
    "engagement_profile",
    "kolmogorov_sf",
    "ks_two_sample",
    "nb_loglik",
    "nb_regression",
    "normal_sf",
    "regularized_gamma_p",
    "regularized_gamma_q",
    "vif",
]
