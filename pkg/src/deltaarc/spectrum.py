"""Principal eigenvalue from the Birman-Schwinger characteristic function.

``-kappa^2`` is the lowest eigenvalue of the delta-interaction operator
exactly when ``F(kappa) = alpha * sup spec Q(kappa)`` equals 1, and ``F`` is
continuous and strictly decreasing in ``kappa``. The solver brackets the
root in ``kappa`` and refines it with Brent's method.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import optimize

from . import bsop
from .curves import ArcGeometry, ArcSpec, build_arc, midpoint_nodes
from ._validation import check_node_count, check_positive

DEFAULT_N = 1024
DEFAULT_TOL_F = 1e-10
# weak coupling puts kappa* near exp(-2 pi / (alpha L)); keep -kappa^2 representable
KAPPA_RANGE = (1e-150, 1e8)
# relative accuracy of each F evaluation (power iteration) and of the root in kappa
EIG_TOL = 1e-12
KAPPA_RTOL = 1e-12


class NoEigenvalueResolved(RuntimeError):
    """F - 1 could not be bracketed; points to a discretization problem."""


@dataclass(frozen=True, eq=False)
class SpectralResult:
    lambda1: float
    kappa_star: float
    psi: np.ndarray
    F_star: float
    F_trace: list
    N: int
    alpha: float
    est_error: float = float("nan")
    kind: str = "delta"
    arc: object = None
    extra: dict = field(default_factory=dict)

    def sign_changes(self, noise=EIG_TOL):
        """Number of sign changes of F - 1 along the trace, ordered by kappa.

        Points with ``|F - 1| <= noise`` are below the resolution of the
        eigen-solve and carry no sign.
        """
        pts = sorted(self.F_trace)
        signs = [np.sign(f - 1.0) for _, f in pts if abs(f - 1.0) > noise]
        return int(sum(a != b for a, b in zip(signs, signs[1:])))


class _Problem:
    """Geometry at a fixed grid with the chord matrix cached across kappa."""

    def __init__(self, arc, n=None, prefactor=bsop._PREFACTOR):
        if isinstance(arc, ArcGeometry):
            if n is not None and n != arc.n_nodes:
                raise ValueError(f"geometry has {arc.n_nodes} nodes, N={n} requested")
            n = arc.n_nodes
            if not np.allclose(arc.s, midpoint_nodes(arc.length, n), rtol=0, atol=1e-12 * arc.length):
                raise ValueError("geometry must be sampled at the uniform midpoint nodes")
            geom = arc
        elif isinstance(arc, ArcSpec):
            n = check_node_count(DEFAULT_N if n is None else n, "N")
            geom = build_arc(arc, n) if n >= 16 else build_arc(arc, midpoint_nodes(arc.length, n))
        else:
            raise TypeError(f"expected ArcSpec or ArcGeometry, got {type(arc).__name__}")
        self.geom = geom
        self.grid = bsop.QuadratureGrid(geom.length, n)
        self.chords = geom.chord_matrix()
        self.prefactor = prefactor
        self._v = None

    @property
    def spec(self):
        return self.geom.spec

    def matrix(self, kappa):
        return bsop.assemble(self.geom, kappa, self.grid, chords=self.chords, prefactor=self.prefactor)

    def top(self, kappa, tol=EIG_TOL):
        pair = bsop.top_eig(self.matrix(kappa), tol=tol, v0=self._v)
        self._v = pair.vector
        return pair


def characteristic_F(arc, alpha, kappa, N=None):
    """alpha * (largest eigenvalue of the discretized Q(kappa))."""
    alpha = check_positive(alpha, "alpha")
    prob = arc if isinstance(arc, _Problem) else _Problem(arc, N)
    return alpha * prob.top(check_positive(kappa, "kappa")).value


def _solve(prob, alpha, tol_F):
    trace = []

    def F(kappa):
        val = alpha * prob.top(kappa).value
        trace.append((kappa, val))
        return val

    lo_lim, hi_lim = KAPPA_RANGE[0] * alpha, KAPPA_RANGE[1] * alpha
    k0 = alpha / 2.0
    factor = 2.0
    if F(k0) >= 1.0:
        lo, hi = k0, 2.0 * k0
        while F(hi) >= 1.0:
            factor *= factor
            lo, hi = hi, min(hi * factor, hi_lim)
            if lo >= hi_lim:
                raise NoEigenvalueResolved(f"F stays >= 1 up to kappa = {hi_lim:g}")
    else:
        lo, hi = k0 / 2.0, k0
        while F(lo) < 1.0:
            factor *= factor
            lo, hi = max(lo / factor, lo_lim), lo
            if hi <= lo_lim:
                raise NoEigenvalueResolved(f"F stays < 1 down to kappa = {lo_lim:g}")
    # geometric bisection first so Brent works on a bracket of ratio <= 2
    while hi > 2.0 * lo:
        mid = math.sqrt(lo * hi)
        if F(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    kappa = optimize.brentq(lambda k: F(k) - 1.0, lo, hi, xtol=1e-300, rtol=KAPPA_RTOL,
                            maxiter=200)
    pair = prob.top(kappa)
    f_star = alpha * pair.value
    trace.append((kappa, f_star))
    if abs(f_star - 1.0) > tol_F:
        raise NoEigenvalueResolved(f"|F(kappa*) - 1| = {abs(f_star - 1.0):.3g} exceeds tol_F = {tol_F:g}")
    return kappa, pair.vector, f_star, trace


def principal_eigenvalue(arc, alpha, N=DEFAULT_N, tol_F=DEFAULT_TOL_F, estimate_error=True):
    """Lowest eigenvalue of the delta-interaction operator of strength ``alpha``.

    ``est_error`` is the change of the eigenvalue between N/2 and N nodes
    (NaN when ``estimate_error`` is False or N < 2).
    """
    alpha = check_positive(alpha, "alpha")
    prob = _Problem(arc, N)
    return _run(prob, alpha, tol_F, estimate_error, lambda n: _Problem(prob.spec, n))


def _run(prob, alpha, tol_F, estimate_error, coarse_factory, kind="delta"):
    kappa, psi, f_star, trace = _solve(prob, alpha, tol_F)
    result = SpectralResult(lambda1=-kappa * kappa, kappa_star=kappa, psi=psi, F_star=f_star,
                            F_trace=trace, N=prob.grid.n, alpha=alpha, kind=kind, arc=prob.spec)
    n = prob.grid.n
    if estimate_error and n >= 2:
        coarse = _solve(coarse_factory(n // 2), alpha, tol_F)[0]
        result = replace(result, est_error=abs(kappa * kappa - coarse * coarse),
                         extra={"lambda1_coarse": -coarse * coarse})
    return result


def count_discrete_below(arc, alpha, kappa, N=None):
    """Number of eigenvalues <= -kappa^2: eigenvalues of alpha Q(kappa) that are >= 1."""
    alpha = check_positive(alpha, "alpha")
    prob = arc if isinstance(arc, _Problem) else _Problem(arc, N)
    mu = alpha * bsop.full_spectrum(prob.matrix(check_positive(kappa, "kappa")))
    return int(np.count_nonzero(mu >= 1.0))


def rayleigh_quotient(m, psi):
    Q = m.Q if isinstance(m, bsop.BSMatrix) else m
    psi = np.asarray(psi, dtype=float)
    return float(psi @ Q @ psi / (psi @ psi))


def _segment_spec(length):
    return ArcSpec("segment", check_positive(length, "L"))


def robin_segment_eigenvalue(alpha, L, N=DEFAULT_N, tol_F=DEFAULT_TOL_F, estimate_error=True):
    """Ground state of the Robin Laplacian on the plane slit along a segment.

    It coincides with the delta-interaction ground state at strength 2 alpha.
    """
    alpha = check_positive(alpha, "alpha")
    res = principal_eigenvalue(_segment_spec(L), 2.0 * alpha, N, tol_F, estimate_error)
    return replace(res, kind="robin", alpha=alpha, extra={**res.extra, "delta_strength": 2.0 * alpha})


def halfplane_neumann_Q(L, kappa, N):
    """BS matrix of a boundary segment in the Neumann half-plane (kernel K0/pi)."""
    prob = _Problem(_segment_spec(L), N, prefactor=2.0 * bsop._PREFACTOR)
    return prob.matrix(kappa)


def robin_halfplane_eigenvalue(alpha, L, N=DEFAULT_N, tol_F=DEFAULT_TOL_F, estimate_error=False):
    """Robin segment ground state via the half-plane Neumann kernel at strength alpha."""
    alpha = check_positive(alpha, "alpha")
    prob = _Problem(_segment_spec(L), N, prefactor=2.0 * bsop._PREFACTOR)
    return _run(prob, alpha, tol_F, estimate_error,
                lambda n: _Problem(prob.spec, n, prefactor=2.0 * bsop._PREFACTOR), kind="robin-halfplane")
