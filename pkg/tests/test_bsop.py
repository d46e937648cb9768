import math

import numpy as np
import pytest

from deltaarc import bsop
from deltaarc.bsop import (BSMatrix, ConvergenceError, QuadratureGrid, RefinementRequired, assemble, dump_matrix,
                           full_spectrum, load_matrix, top_eig)
from deltaarc.curves import ArcSpec, build_arc, midpoint_nodes, segment
from deltaarc.specfun import LN2_MINUS_GAMMA, bessel_k0

import oracles

# oracles.galerkin_reference(1.0, 1.0, (256, 512, 1024)): value, uncertainty
TOP_SEGMENT_L1_K1 = 0.27199639798152325
TOP_SEGMENT_L1_K1_UNC = 2.7e-10


@pytest.fixture(scope="module")
def seg256():
    return segment(1.0, 256)


@pytest.fixture(scope="module")
def circ128():
    return build_arc(ArcSpec("circ", 1.0, {"c": 2.0}), 128)


def test_grid_invariants():
    g = QuadratureGrid(2.0, 7)
    assert g.weights.sum() == pytest.approx(2.0, abs=1e-15)
    assert np.all(np.diff(g.nodes) > 0) and g.h > 0
    assert np.allclose(g.nodes, midpoint_nodes(2.0, 7))
    with pytest.raises(ValueError):
        QuadratureGrid(1.0, 0)


def test_single_cell_diagonal():
    h, kappa = 0.4, 1.3
    geom = build_arc(ArcSpec("segment", h), midpoint_nodes(h, 1))
    m = assemble(geom, kappa)
    expected = (-h * (math.log(kappa * h / 2) - 1) + h * (math.log(2) - 0.5772156649015329)) / (2 * math.pi)
    assert m.Q[0, 0] == pytest.approx(expected, rel=1e-14)
    assert bsop.diagonal_weights(m.grid, kappa, "cell")[0] == pytest.approx(2 * math.pi * expected, rel=1e-14)


def test_two_node_offdiagonal():
    geom = build_arc(ArcSpec("segment", 1.0), midpoint_nodes(1.0, 2))
    m = assemble(geom, 1.0)
    assert m.Q[0, 1] == pytest.approx(bessel_k0(0.5) / (4 * math.pi), rel=1e-15)


def test_reference_value_from_oracle():
    ref, unc = oracles.galerkin_reference(1.0, 1.0, (256, 512, 1024))
    assert ref == pytest.approx(TOP_SEGMENT_L1_K1, abs=1e-12)
    assert unc < TOP_SEGMENT_L1_K1_UNC


def test_top_eigenvalue_against_galerkin(seg256):
    lam = top_eig(assemble(seg256, 1.0)).value
    assert abs(lam - TOP_SEGMENT_L1_K1) / TOP_SEGMENT_L1_K1 < 5e-6


def test_convergence_order_on_segment():
    errs = []
    for n in (64, 128, 256, 512):
        lam = top_eig(assemble(segment(1.0, n), 1.0)).value
        errs.append(abs(lam - TOP_SEGMENT_L1_K1))
    errs = np.array(errs)
    hs = 1.0 / np.array([64, 128, 256, 512])
    # O(h^2 |ln h|) dominated: the scaled error must not grow under refinement
    scaled = errs / (hs ** 2 * np.abs(np.log(hs)))
    assert np.all(np.diff(scaled) < 0)
    assert np.all(errs[:-1] / errs[1:] > 3.0)


def test_cell_only_log_moment_is_first_order():
    # the own-cell log moment leaves an O(h) consistency error; recorded for comparison
    errs = [abs(top_eig(assemble(segment(1.0, n), 1.0, log_moment="cell")).value - TOP_SEGMENT_L1_K1)
            for n in (128, 256, 512)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 1.7) & (ratios < 2.3))


def test_symmetry_and_positivity(circ128):
    m = assemble(circ128, 0.7)
    assert np.array_equal(m.Q, m.Q.T)
    assert np.all(m.Q > 0)


@pytest.mark.parametrize("kappa", [0.01, 0.3, 1.0, 10.0, 100.0])
def test_discrete_nonnegativity(circ128, kappa):
    m = assemble(circ128, kappa)
    ev = full_spectrum(m)
    assert ev[-1] >= -1e-10 * np.linalg.norm(m.Q, 2)


def test_kappa_h_limit():
    geom = segment(1.0, 16)
    with pytest.raises(RefinementRequired):
        assemble(geom, 17.0)


def test_grid_mismatch():
    with pytest.raises(ValueError):
        assemble(segment(1.0, 32), 1.0, QuadratureGrid(1.0, 16))


def test_top_eig_trivial_cases():
    geom = build_arc(ArcSpec("segment", 0.5), midpoint_nodes(0.5, 1))
    m = assemble(geom, 1.0)
    p = top_eig(m)
    assert p.value == m.Q[0, 0] and np.array_equal(p.vector, [1.0])
    a, b = 0.7, 0.2
    p = top_eig(np.array([[a, b], [b, a]]))
    assert p.value == pytest.approx(a + b, rel=1e-12)
    assert np.allclose(p.vector, np.ones(2) / math.sqrt(2), atol=1e-6)


def test_top_eig_matches_full_spectrum(seg256):
    m = assemble(seg256, 1.0)
    p = top_eig(m, tol=1e-14)
    ev = full_spectrum(m)
    assert abs(p.value - ev[0]) <= 1e-12 * ev[0]
    # Rayleigh-quotient stop: eigenvalue error ~ residual^2, so the vector is only ~1e-8 accurate
    assert np.linalg.norm(m.Q @ p.vector - p.value * p.vector) <= 1e-7 * ev[0]
    assert np.all(p.vector > 0)
    assert p.vector[np.argmax(np.abs(p.vector))] > 0


@pytest.mark.parametrize("ratio", [0.5, 0.9, 0.99, 0.995])
def test_top_eig_slow_convergence_meets_tol(ratio):
    rng = np.random.default_rng(3)
    U, _ = np.linalg.qr(rng.standard_normal((40, 40)))
    ev = np.concatenate([[1.0, ratio], np.linspace(0.5, 0.01, 38)])
    Q = (U * ev) @ U.T
    p = top_eig(Q, tol=1e-12, max_iter=10 ** 7)
    assert abs(p.value - 1.0) <= 2e-12


def test_top_eig_rejects_bad_tol(seg256):
    with pytest.raises(ValueError):
        top_eig(assemble(seg256, 1.0), tol=1e-3)


def test_top_eig_iteration_cap():
    Q = np.diag([1.0, 1.0 - 1e-9, 0.5])
    Q[0, 1] = Q[1, 0] = 1e-12
    with pytest.raises(ConvergenceError) as exc:
        top_eig(Q, tol=1e-14, v0=np.array([1.0, 1.0, 1.0]), max_iter=3)
    assert exc.value.last_value > 0


def test_full_spectrum_trace_and_residuals(circ128):
    m = assemble(circ128, 2.0)
    w, V = full_spectrum(m, vectors=True)
    assert np.all(np.diff(w) <= 0)
    assert abs(w.sum() - np.trace(m.Q)) <= 1e-10 * abs(np.trace(m.Q))
    res = np.linalg.norm(m.Q @ V - V * w, axis=0)
    assert np.all(res <= 1e-9 * np.linalg.norm(m.Q, 2))


def test_full_spectrum_single_entry():
    geom = build_arc(ArcSpec("segment", 0.5), midpoint_nodes(0.5, 1))
    m = assemble(geom, 1.0)
    assert full_spectrum(m)[0] == m.Q[0, 0]


def test_full_spectrum_budget():
    big = BSMatrix(Q=np.zeros((bsop.FULL_SPECTRUM_MAX + 1, 1)), kappa=1.0, grid=QuadratureGrid(1.0, 1))
    with pytest.raises(ValueError, match="top_eig"):
        full_spectrum(big)


def test_perron_value_simple_with_shifted_power_check():
    m = assemble(segment(1.0, 128), 1.0)
    ev = full_spectrum(m)
    assert ev[1] < ev[0]
    # power iteration on Q - ev0 * I deflated by the Perron vector recovers ev1
    p = top_eig(m, tol=1e-14)
    D = m.Q - p.value * np.outer(p.vector, p.vector)
    p2 = top_eig(D + 0.0, tol=1e-12, v0=np.linspace(1, 2, 128))
    assert p2.value == pytest.approx(ev[1], rel=1e-8)
    assert p2.value < p.value


def test_monotone_in_kappa(circ128):
    tops = [top_eig(assemble(circ128, k)).value for k in (0.05, 0.2, 1.0, 3.0, 10.0)]
    assert np.all(np.diff(tops) < 0)


@pytest.mark.parametrize("L", [0.5, 1.0, 3.0])
def test_decay_in_kappa(L):
    # the straight-line symbol 1 / (2 sqrt(xi^2 + kappa^2)) gives top ~ 1 / (2 kappa)
    # eigenvalues cluster at large kappa, so power iteration is slow here; use the dense solver
    geom = segment(L, 1024)
    t1 = full_spectrum(assemble(geom, 1.0 / L))[0]
    tops = np.array([full_spectrum(assemble(geom, c / L))[0] for c in (50.0, 200.0, 400.0)])
    assert np.all(np.diff(tops) < 0)
    assert tops[1] < 0.01 * t1
    assert np.allclose(2 * np.array([50.0, 200.0, 400.0]) / L * tops, 1.0, atol=2e-3)


@pytest.mark.xfail(strict=True, reason="top(50/L) / top(1/L) tends to 0.0367 for every L; the 1% ratio needs kappa ~ 200/L")
def test_decay_one_percent_at_fifty_over_L():
    geom = segment(1.0, 1024)
    assert full_spectrum(assemble(geom, 50.0))[0] < 0.01 * full_spectrum(assemble(geom, 1.0))[0]


def test_curved_arc_dominates_segment_entrywise(circ128):
    seg = segment(1.0, 128)
    Qs = assemble(seg, 1.0).Q
    Qc = assemble(circ128, 1.0).Q
    off = ~np.eye(128, dtype=bool)
    assert np.all(Qc[off] >= Qs[off])
    assert np.any(Qc[off] > Qs[off])
    assert np.array_equal(np.diag(Qc), np.diag(Qs))
    assert top_eig(Qc).value > top_eig(Qs).value


def test_dump_roundtrip(tmp_path, circ128):
    m = assemble(circ128, 0.8)
    path = tmp_path / "q.bin"
    dump_matrix(m, path)
    raw = path.read_bytes()
    assert raw[:4] == b"BSQ1"
    assert int.from_bytes(raw[4:8], "little") == 128
    assert np.frombuffer(raw[8:16], "<f8")[0] == 0.8
    assert len(raw) == 16 + 8 * 128 * 128
    Q, kappa = load_matrix(path)
    assert kappa == 0.8 and np.array_equal(Q, m.Q)


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(ValueError):
        load_matrix(p)
