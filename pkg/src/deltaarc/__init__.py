"""Principal eigenvalues of 2D Schroedinger operators with delta-interactions on open arcs."""

__version__ = "0.1.0"

from .curves import (ArcError, ArcGeometry, ArcSpec, SelfIntersectionError, build_arc, chord_distance,
                     endpoint_family, parse_arc, strict_shortening_witness)
from .specfun import bessel_i0, bessel_k0, k0_smooth_part
from .bsop import BSMatrix, EigPair, QuadratureGrid, assemble, full_spectrum, top_eig
from .spectrum import (SpectralResult, characteristic_F, count_discrete_below, halfplane_neumann_Q,
                       principal_eigenvalue, robin_segment_eigenvalue)
from .oracle import FDConfig, fd_lowest_eigenvalues
from .estimator import PrincipalEigenvalue

__all__ = [
    "ArcError", "ArcGeometry", "ArcSpec", "SelfIntersectionError", "build_arc", "chord_distance",
    "endpoint_family", "parse_arc", "strict_shortening_witness",
    "bessel_i0", "bessel_k0", "k0_smooth_part",
    "BSMatrix", "EigPair", "QuadratureGrid", "assemble", "full_spectrum", "top_eig",
    "SpectralResult", "characteristic_F", "count_discrete_below", "halfplane_neumann_Q",
    "principal_eigenvalue", "robin_segment_eigenvalue",
    "FDConfig", "fd_lowest_eigenvalues", "PrincipalEigenvalue",
]
