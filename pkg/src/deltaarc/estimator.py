"""scikit-learn style wrapper around the principal-eigenvalue solver."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import spectrum
from .curves import ArcGeometry, ArcSpec, parse_arc
from ._validation import check_node_count, check_positive


def check_arc(arc):
    """Coerce an arc string, ArcSpec or ArcGeometry to something the solver accepts."""
    if isinstance(arc, str):
        return parse_arc(arc)
    if isinstance(arc, (ArcSpec, ArcGeometry)):
        return arc
    raise TypeError(f"expected an arc string, ArcSpec or ArcGeometry, got {type(arc).__name__}")


def check_arcs(X):
    if isinstance(X, (str, ArcSpec, ArcGeometry)):
        X = [X]
    arcs = [check_arc(a) for a in X]
    if not arcs:
        raise ValueError("need at least one arc")
    return arcs


class PrincipalEigenvalue(BaseEstimator):
    """Lowest eigenvalue of the delta-interaction operator on open arcs.

    ``fit`` solves for a single arc and stores ``lambda1_``, ``kappa_``,
    ``psi_`` (Perron trace) and ``est_error_``. ``predict`` maps a sequence
    of arcs to their eigenvalues.

    Parameters
    ----------
    alpha : float
        Interaction strength (> 0).
    n_nodes : int
        Nystrom nodes on the arc.
    tol_f : float
        Tolerance on ``|F(kappa*) - 1|``.
    estimate_error : bool
        Also solve at ``n_nodes // 2`` to estimate the discretization error.
    """

    def __init__(self, alpha=1.0, n_nodes=spectrum.DEFAULT_N, tol_f=spectrum.DEFAULT_TOL_F,
                 estimate_error=True):
        self.alpha = alpha
        self.n_nodes = n_nodes
        self.tol_f = tol_f
        self.estimate_error = estimate_error

    def _validate_params(self):
        check_positive(self.alpha, "alpha")
        check_node_count(self.n_nodes, "n_nodes")
        check_positive(self.tol_f, "tol_f")

    def _solve(self, arc, estimate_error):
        n = None if isinstance(arc, ArcGeometry) else self.n_nodes
        return spectrum.principal_eigenvalue(arc, self.alpha, n, self.tol_f, estimate_error)

    def fit(self, X, y=None):
        self._validate_params()
        arcs = check_arcs(X)
        if len(arcs) != 1:
            raise ValueError("fit expects a single arc; use predict for several")
        res = self._solve(arcs[0], self.estimate_error)
        self.result_ = res
        self.lambda1_ = res.lambda1
        self.kappa_ = res.kappa_star
        self.psi_ = res.psi
        self.est_error_ = res.est_error
        return self

    def predict(self, X):
        """Principal eigenvalues of each arc in ``X`` (no error estimate)."""
        check_is_fitted(self, "result_")
        self._validate_params()
        return np.array([self._solve(a, False).lambda1 for a in check_arcs(X)])

    def fit_predict(self, X, y=None):
        return np.array([self.fit(X).lambda1_])
