"""Finite-difference cross-check on a Dirichlet box.

The quadratic form ``|grad u|^2 - alpha |u|_Gamma|^2`` is discretized on the
square ``[-A, A]^2`` with the 5-point stencil and a straight segment
``[-L/2, L/2] x {0}`` lying on a grid line. The line integral uses the
trapezoid rule at the segment's grid nodes, so the delta term is a diagonal
``-alpha w_k / h^2`` with ``w_k = h`` (``h/2`` at the two endpoints).

The segment is symmetric under ``x -> -x`` and ``y -> -y``, so the matrix
splits into four parity sectors, each a quarter of the full size. The
sectors odd in ``y`` vanish on the segment and carry only the (positive)
box Laplacian; they are included when counting.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from ._validation import check_node_count, check_positive


class BoxTooSmall(RuntimeError):
    """Eigenfunction mass near the Dirichlet wall exceeds the allowed level."""


@dataclass(frozen=True)
class FDConfig:
    """Box half-width ``A``, grid step ``h``, strength ``alpha``, segment length ``L``."""

    L: float
    alpha: float
    h: float = 1.0 / 32
    A: float = 12.0
    boundary_mass_tol: float = 1e-6

    def __post_init__(self):
        check_positive(self.L, "L")
        check_positive(self.h, "h")
        check_positive(self.A, "A")
        if self.alpha < 0 or not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite and >= 0")
        if not _is_multiple(self.A, self.h) or not _is_multiple(self.L / 2, self.h):
            raise ValueError("A and L/2 must be integer multiples of h (segment on grid nodes)")
        if self.h > self.L / 64 * (1 + 1e-12):
            raise ValueError(f"h = {self.h:g} too coarse; need h <= L/64 = {self.L / 64:g}")
        if self.L / 2 >= self.A - self.h:
            raise ValueError("segment must lie strictly inside the box")

    @property
    def m(self):
        # grid indices -m..m; Dirichlet at +-(m+1)
        return int(round(self.A / self.h)) - 1

    @property
    def n_half_segment(self):
        return int(round(self.L / (2 * self.h)))


def _is_multiple(x, h):
    q = x / h
    return abs(q - round(q)) < 1e-9 * max(1.0, q)


def _sector_1d(m, h, parity):
    """1D Dirichlet Laplacian on -m..m restricted to even/odd functions (orthonormal basis)."""
    if parity == "even":
        n = m + 1
        off = -np.ones(n - 1)
        off[0] = -math.sqrt(2.0)
    else:
        n = m
        off = -np.ones(n - 1)
    main = np.full(n, 2.0)
    return sparse.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


def sector_matrix(config, x_parity="even", y_parity="even"):
    """Sparse FD matrix of one parity sector, unknowns ordered (ix, iy)."""
    m, h = config.m, config.h
    Tx = _sector_1d(m, h, x_parity)
    Ty = _sector_1d(m, h, y_parity)
    nx, ny = Tx.shape[0], Ty.shape[0]
    H = sparse.kron(Tx, sparse.identity(ny), format="csr") + sparse.kron(sparse.identity(nx), Ty, format="csr")
    if y_parity == "even" and config.alpha > 0:
        k = config.n_half_segment
        ix = np.arange(k + 1) if x_parity == "even" else np.arange(1, k + 1)
        w = np.full(ix.shape, h)
        w[ix == k] = h / 2.0
        # basis index of grid column ix is ix (even) or ix - 1 (odd)
        rows = (ix if x_parity == "even" else ix - 1) * ny
        V = np.zeros(nx * ny)
        V[rows] = -config.alpha * w / (h * h)
        H = H + sparse.diags(V, format="csr")
    return H.tocsc()


def _boundary_mass(vec, nx, ny, x_parity, y_parity, m):
    U = vec.reshape(nx, ny)
    gx = np.arange(nx) if x_parity == "even" else np.arange(1, nx + 1)
    gy = np.arange(ny) if y_parity == "even" else np.arange(1, ny + 1)
    near = (gx[:, None] >= m - 1) | (gy[None, :] >= m - 1)
    return float(np.sum(U[near] ** 2) / np.sum(U ** 2))


AMG_THRESHOLD = 600_000


def _solve_shift_invert(H, k, sigma):
    return spla.eigsh(H, k=k, sigma=sigma, which="LM", tol=1e-12)


def _solve_amg(H, k, sigma):
    import pyamg

    n = H.shape[0]
    Hs = (H - sigma * sparse.identity(n, format="csc")).tocsr()
    M = pyamg.smoothed_aggregation_solver(Hs, symmetry="symmetric").aspreconditioner()
    X = np.random.default_rng(0).random((n, k))
    vals, vecs = spla.lobpcg(Hs, X, M=M, largest=False, tol=1e-10, maxiter=500)
    return vals + sigma, vecs


def _sector_lowest(config, k, x_parity, y_parity, solver):
    H = sector_matrix(config, x_parity, y_parity)
    n = H.shape[0]
    k = min(k, n - 2)
    # below the whole spectrum: the discrete form stays above -alpha^2/4 up to O(h) slack
    sigma = -(0.3 * config.alpha ** 2 + 1.0)
    if solver == "auto":
        solver = "amg" if n > AMG_THRESHOLD else "shift-invert"
    if solver == "shift-invert":
        vals, vecs = _solve_shift_invert(H, k, sigma)
    elif solver == "amg":
        vals, vecs = _solve_amg(H, k, sigma)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    res = np.linalg.norm(H @ vecs - vecs * vals, axis=0)
    scale = abs(H).sum(axis=1).max()
    if np.any(res > 1e-8 * scale):
        raise RuntimeError(f"FD eigen residual {res.max():.2e} above 1e-8 * |H|")
    nx = config.m + 1 if x_parity == "even" else config.m
    ny = config.m + 1 if y_parity == "even" else config.m
    masses = [_boundary_mass(vecs[:, i], nx, ny, x_parity, y_parity, config.m) for i in range(k)]
    return vals, masses


def _lowest(config, k, sectors, solver):
    if sectors is None:
        sectors = [("even", "even"), ("odd", "even"), ("even", "odd"), ("odd", "odd")]
    vals, masses = [], []
    for xp, yp in sectors:
        v, mass = _sector_lowest(config, k, xp, yp, solver)
        vals.extend(v)
        masses.extend(mass)
    order = np.argsort(vals)[:k]
    return np.asarray(vals)[order], np.asarray(masses)[order]


# bound states decay like exp(-kappa r); the box must hold this many decay lengths
DECAY_MARGIN = 4.0


def _check_box(config, vals, masses, signed=True):
    """Raise BoxTooSmall for a truncated bound state (negative values only when ``signed``)."""
    vals, masses = np.asarray(vals), np.asarray(masses)
    sel = vals < 0 if signed else np.ones(vals.shape, dtype=bool)
    heavy = sel & (masses > config.boundary_mass_tol)
    if heavy.any():
        raise BoxTooSmall(
            f"eigenfunction mass {masses[heavy].max():.2e} within two cells of the wall "
            f"exceeds {config.boundary_mass_tol:g}; enlarge A (currently {config.A:g})")
    neg = vals < 0
    if neg.any():
        kappa = np.sqrt(-vals[neg].max())
        if config.A * kappa < DECAY_MARGIN:
            raise BoxTooSmall(
                f"A * kappa = {config.A * kappa:.3g} < {DECAY_MARGIN:g} for kappa = {kappa:.4g}; "
                f"need A >= {DECAY_MARGIN / kappa:.3g} (currently {config.A:g})")


def fd_lowest_eigenvalues(config, k=1, check_box=True, sectors=None, solver="auto"):
    """The ``k`` smallest FD eigenvalues (ascending) over all parity sectors.

    With ``check_box`` a negative eigenvalue raises :class:`BoxTooSmall`
    when its eigenfunction keeps more than ``boundary_mass_tol`` of its mass
    within two cells of the wall, or when ``A * sqrt(-lambda)`` is below
    ``DECAY_MARGIN``. ``solver`` is ``shift-invert`` (sparse LU),
    ``amg`` (LOBPCG with a smoothed-aggregation preconditioner, for large
    boxes) or ``auto``.
    """
    check_node_count(k, "k")
    vals, masses = _lowest(config, k, sectors, solver)
    if check_box:
        _check_box(config, vals, masses)
    return vals


def fd_principal_eigenvalue(config, check_box=True, solver="auto"):
    """Ground state; it lives in the sector even in both x and y.

    For ``alpha > 0`` a ground state pushed above 0 by the walls is also
    reported as BoxTooSmall; at ``alpha = 0`` it is the box mode itself.
    """
    vals, masses = _lowest(config, 1, [("even", "even")], solver)
    if check_box:
        _check_box(config, vals, masses, signed=config.alpha == 0)
    return float(vals[0])


def fd_count_below(config, threshold, check_box=True, k_start=4, solver="auto"):
    """Number of FD eigenvalues strictly below ``threshold``."""
    k = k_start
    while True:
        vals, masses = _lowest(config, k, None, solver)
        if vals[-1] >= threshold or k >= 64:
            break
        k *= 2
    below = vals < threshold
    if check_box:
        _check_box(config, vals[below], masses[below])
    return int(np.count_nonzero(below))


def box_ground_energy(A):
    """Lowest Dirichlet eigenvalue of the continuous square [-A, A]^2."""
    return 2.0 * (math.pi / (2.0 * A)) ** 2
