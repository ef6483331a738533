"""Numerics for the local geometry of finite location mixtures.

Core objects: location families and mixtures, Hellinger-type metrics,
envelope functions, the pseudodistance and its comparison constant, and
bracketing-entropy constructions with seeded experiment runners.
"""

from .errors import MixgeoError
from .families import (LocationFamily, Mixture, ParameterDomain,
                       fig1_family, gaussian_family, tabulated_family)
from .quadrature import GridFunction, QuadratureGrid, RefMeasure, \
    trapezoid_grid
from .envelopes import ReferenceContext, compute_envelopes, envelope_H
from .metrics import (chi_square, hellinger, hellinger_to_ref,
                      normalized_deviation, total_variation, envelope_S)
from .geometry import (DeviationCoefficients, LocalGeometry,
                       NeighborhoodSystem, build_neighborhoods, ell,
                       estimate_cstar, mixture_to_coeffs, pseudo_N,
                       ratio_scan, sample_deviation)
from .bracketing import (Bracket, BracketSet, LatticeVector, greedy_cover,
                         slice_local_brackets, verify_bracket_cover)
from .mixture_brackets import (ScoreFamilyIndex, bracket_Hq_local,
                               build_D0_brackets_mixture,
                               score_approximation)

__version__ = "0.1.0"

__all__ = [
    "MixgeoError", "LocationFamily", "Mixture", "ParameterDomain",
    "fig1_family", "gaussian_family", "tabulated_family", "GridFunction",
    "QuadratureGrid", "RefMeasure", "trapezoid_grid", "ReferenceContext",
    "compute_envelopes", "envelope_H", "chi_square", "hellinger",
    "hellinger_to_ref", "normalized_deviation", "total_variation",
    "envelope_S", "DeviationCoefficients", "LocalGeometry",
    "NeighborhoodSystem", "build_neighborhoods", "ell", "estimate_cstar",
    "mixture_to_coeffs", "pseudo_N", "ratio_scan", "sample_deviation",
    "Bracket", "BracketSet", "LatticeVector", "greedy_cover",
    "slice_local_brackets", "verify_bracket_cover", "ScoreFamilyIndex",
    "bracket_Hq_local", "build_D0_brackets_mixture", "score_approximation",
]
