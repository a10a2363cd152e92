"""Numerical companion to the quantitative Payne-Weinberger inequality.

Neumann eigenvalues of the weighted p-Laplacian on convex polygons, the
one-dimensional optimal constants, the explicit constant chain evaluated in
log space, and drivers for the checkable experiments.
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .constants import ConstantsReport, constants_report, d_p, kroger, pi_p, pi_p_pow
from .errors import PoincareGapError
from .fem import DeficitSample, Eig2DResult, mu_2_fem, mu_p_fem, verify_quantitative
from .geometry import (ConvexPolygon2D, JohnEllipse, diameter, john_ellipse, polygon_validate,
                       random_convex_polygon, width)
from .logvalue import LogValue
from .mesh import Mesh, triangulate
from .onedim import Eig1DResult, mu_p_1d_rayleigh, mu_p_1d_shoot, refined_lower_bound
from .weights import Weight, weight_eval

__all__ = [
    "__version__", "ConstantsReport", "constants_report", "d_p", "kroger", "pi_p", "pi_p_pow",
    "PoincareGapError", "DeficitSample", "Eig2DResult", "mu_2_fem", "mu_p_fem", "verify_quantitative",
    "ConvexPolygon2D", "JohnEllipse", "diameter", "john_ellipse", "polygon_validate",
    "random_convex_polygon", "width", "LogValue", "Mesh", "triangulate", "Eig1DResult",
    "mu_p_1d_rayleigh", "mu_p_1d_shoot", "refined_lower_bound", "Weight", "weight_eval",
]
