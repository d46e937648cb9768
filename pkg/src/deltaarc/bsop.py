"""Nystrom discretization of the Birman-Schwinger operator on an arc.

The operator acts on L^2(0, L) with kernel ``K0(kappa |x(s) - x(s')|) / (2 pi)``.
Nodes are the midpoints of a uniform partition with equal weights ``h``,
so the matrix is symmetric without any diagonal similarity scaling.

Off the diagonal the kernel is sampled directly. The diagonal carries the
logarithmic singularity: writing ``K0(z) = -ln(z) I0(z) + S(z)``, row ``i``
integrates ``-ln(kappa |s_i - t|)`` exactly over all of ``[0, L]`` and
removes what the off-diagonal samples already account for,

    D_i = -(int_0^L ln(kappa|s_i - t|) dt - h sum_{j != i} ln(kappa|s_i - s_j|)) + h S(0),

which is singularity subtraction with the exact log moment. With a single
cell it is the cell moment ``h (ln(kappa h / 2) - 1)``.
"""

from collections import deque
from dataclasses import dataclass
import struct

import numpy as np

from . import specfun
from ._validation import check_node_count, check_positive

FULL_SPECTRUM_MAX = 4096
_PREFACTOR = 1.0 / (2.0 * np.pi)


class RefinementRequired(ValueError):
    """kappa * h exceeds the range of the diagonal log split."""


class AssemblyError(ArithmeticError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, last_value):
        super().__init__(msg)
        self.last_value = last_value


@dataclass(frozen=True)
class QuadratureGrid:
    length: float
    n: int

    def __post_init__(self):
        check_positive(self.length, "length")
        check_node_count(self.n, "N")

    @property
    def h(self):
        return self.length / self.n

    @property
    def nodes(self):
        return (np.arange(self.n) + 0.5) * self.h

    @property
    def weights(self):
        return np.full(self.n, self.h)


@dataclass(frozen=True, eq=False)
class BSMatrix:
    Q: np.ndarray
    kappa: float
    grid: QuadratureGrid
    geom: object = None

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def norm(self):
        return float(np.linalg.norm(self.Q, 2)) if self.n <= 512 else float(np.abs(self.Q).sum(axis=1).max())


@dataclass(frozen=True, eq=False)
class EigPair:
    value: float
    vector: np.ndarray
    iterations: int = 0


def _log_moment(s, length, kappa):
    # int_0^L ln(kappa |s - t|) dt
    out = np.zeros_like(s)
    for d in (s, length - s):
        pos = d > 0
        out[pos] += d[pos] * (np.log(kappa * d[pos]) - 1.0)
    return out


def diagonal_weights(grid, kappa, log_moment="interval"):
    """Diagonal of the (unscaled) Nystrom matrix, without the 1/(2 pi) factor.

    ``log_moment="cell"`` integrates the log over the node's own cell only.
    """
    h, s = grid.h, grid.nodes
    if log_moment == "cell":
        logpart = np.full(grid.n, h * (np.log(kappa * h / 2.0) - 1.0))
    elif log_moment == "interval":
        diff = np.abs(s[:, None] - s[None, :])
        np.fill_diagonal(diff, 1.0)
        punctured = h * np.log(kappa * diff).sum(axis=1) - h * np.log(kappa)
        logpart = _log_moment(s, grid.length, kappa) - punctured
    else:
        raise ValueError(f"unknown log_moment {log_moment!r}")
    return -logpart + h * specfun.LN2_MINUS_GAMMA


def assemble(geom, kappa, grid=None, chords=None, prefactor=_PREFACTOR, log_moment="interval"):
    """Symmetric Nystrom matrix of Q(kappa) for ``geom`` sampled at the grid nodes.

    ``chords`` may pass a precomputed chord matrix to amortize geometry work
    across many kappa values.
    """
    kappa = check_positive(kappa, "kappa")
    if grid is None:
        grid = QuadratureGrid(geom.length, geom.n_nodes)
    if geom.n_nodes != grid.n or not np.allclose(geom.s, grid.nodes, rtol=0, atol=1e-12 * grid.length):
        raise ValueError("geometry must be sampled at the grid nodes")
    if kappa * grid.h > 1.0:
        raise RefinementRequired(f"kappa*h = {kappa * grid.h:.3g} > 1; increase N")
    r = geom.chord_matrix() if chords is None else chords
    n = grid.n
    Q = np.empty((n, n))
    iu = np.triu_indices(n, 1)
    if n > 1:
        upper = specfun.bessel_k0(kappa * r[iu]) * grid.h
        Q[iu] = upper
        Q[iu[1], iu[0]] = upper
    np.fill_diagonal(Q, diagonal_weights(grid, kappa, log_moment))
    Q *= prefactor
    if not np.all(np.isfinite(Q)):
        raise AssemblyError("non-finite kernel value in Birman-Schwinger matrix")
    return BSMatrix(Q=Q, kappa=kappa, grid=grid, geom=geom)


def _normalize_sign(v):
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


_RATE_WINDOW = 16


def top_eig(m, tol=1e-12, v0=None, max_iter=None):
    """Perron pair of ``m`` by power iteration with a Rayleigh-quotient stop.

    The Rayleigh quotients of the iterates increase geometrically towards
    the top eigenvalue, so the remaining error is estimated as
    ``d r / (1 - r)`` from the last change ``d`` and the observed rate ``r``;
    iteration stops once that (and ``d``) is below ``tol * |lambda|``.
    """
    if not (1e-14 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-14, 1e-6]")
    Q = m.Q if isinstance(m, BSMatrix) else np.asarray(m, dtype=float)
    n = Q.shape[0]
    if n == 1:
        return EigPair(float(Q[0, 0]), np.ones(1), 0)
    max_iter = 50 * n if max_iter is None else max_iter
    v = np.full(n, 1.0 / np.sqrt(n)) if v0 is None else _normalize_sign(np.abs(v0) + 1e-300)
    w = Q @ v
    lam = float(v @ w)
    floor = 4 * np.finfo(float).eps
    # recent changes; the rate is their geometric mean ratio, robust to rounding in single steps
    hist = deque(maxlen=_RATE_WINDOW + 1)
    for it in range(1, max_iter + 1):
        v = w / np.linalg.norm(w)
        w = Q @ v
        new = float(v @ w)
        d = abs(new - lam)
        scale = abs(new)
        hist.append(d)
        lam = new
        if d <= floor * scale:
            return EigPair(new, _normalize_sign(v), it)
        if d > tol * scale or len(hist) < 2 or hist[0] == 0.0:
            continue
        r = (d / hist[0]) ** (1.0 / (len(hist) - 1))
        if r < 1.0 and d * r / (1.0 - r) <= tol * scale:
            return EigPair(new, _normalize_sign(v), it)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", lam)


def full_spectrum(m, vectors=False):
    """All eigenvalues of ``m``, descending (and eigenvectors as columns)."""
    Q = m.Q if isinstance(m, BSMatrix) else np.asarray(m, dtype=float)
    if Q.shape[0] > FULL_SPECTRUM_MAX:
        raise ValueError(f"N = {Q.shape[0]} exceeds the dense budget {FULL_SPECTRUM_MAX}; use top_eig")
    if vectors:
        w, V = np.linalg.eigh(Q)
        return w[::-1], V[:, ::-1]
    return np.linalg.eigvalsh(Q)[::-1]


_MAGIC = b"BSQ1"


def dump_matrix(m, path):
    """Write ``m`` as: 'BSQ1', uint32 N, float64 kappa, then row-major float64 (little-endian)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<Id", m.n, m.kappa))
        fh.write(np.ascontiguousarray(m.Q, dtype="<f8").tobytes())


def load_matrix(path):
    """Read a dump written by :func:`dump_matrix`; returns (Q, kappa)."""
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != _MAGIC:
            raise ValueError(f"{path} is not a BSQ1 matrix dump")
        n, kappa = struct.unpack("<Id", head[4:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError(f"{path}: expected {n * n} entries, found {data.size}")
    return data.reshape(n, n).astype(float), kappa
