import numpy as np
import pytest
import scipy.sparse as sp

from dgcn.errors import ConvergenceError, ValidationError
from dgcn.graph import DirectedGraph, add_self_loops
from dgcn.spectral import (
    TransitionMatrix,
    baseline_sym_propagation,
    dgcn_propagation,
    directed_laplacian,
    perron_vector,
    propagation_matrix,
    read_matrix,
    transition_matrix,
    write_matrix,
)
from dgcn.synthetic import random_strongly_connected, random_symmetric_connected

from oracles import renormalized_adjacency, stationary_by_solve

CYCLE3 = DirectedGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
PAIR = DirectedGraph.from_edges(2, [(0, 1), (1, 0)])
CYCLE3_A_HAT = np.array([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]])


def tm(g):
    return transition_matrix(add_self_loops(g))


# ------------------------------------------------------------------- transition


def test_transition_cycle():
    p = tm(CYCLE3).toarray()
    assert np.array_equal(p, [[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]])


def test_transition_single_node():
    assert tm(DirectedGraph.from_edges(1, [])).toarray().tolist() == [[1.0]]


def test_transition_weighted_row():
    p = tm(DirectedGraph.from_edges(2, [(0, 1, 3.0)])).toarray()
    assert p[0].tolist() == [0.25, 0.75]


def test_transition_rejects_zero_out_degree():
    with pytest.raises(ValidationError):
        transition_matrix(DirectedGraph.from_edges(2, [(0, 1)]))


@pytest.mark.parametrize("seed", range(20))
def test_transition_rows_sum_to_one(seed):
    g = random_strongly_connected(30, seed, weighted=seed % 2 == 0)
    rows = np.asarray(tm(g).matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(rows - 1)) <= 1e-12


# ------------------------------------------------------------------- perron


def test_perron_cycle_uniform():
    phi = perron_vector(tm(CYCLE3)).phi
    assert np.allclose(phi, 1 / 3, atol=1e-13, rtol=0)


def test_perron_symmetric_proportional_to_degree():
    g = random_symmetric_connected(12, 3, weighted=True)
    looped = add_self_loops(g)
    deg = np.asarray(looped.to_csr().sum(axis=1)).ravel()
    phi = perron_vector(transition_matrix(looped)).phi
    assert np.max(np.abs(phi - deg / deg.sum())) <= 1e-12


def test_perron_matches_hand_solution_and_oracle():
    g = DirectedGraph.from_edges(3, [(0, 1), (1, 2), (2, 0), (2, 1)])
    p = tm(g)
    phi = perron_vector(p).phi
    assert np.max(np.abs(phi - stationary_by_solve(p.toarray()))) <= 1e-10
    assert np.max(np.abs(phi - [2 / 9, 4 / 9, 1 / 3])) <= 1e-10


def test_perron_postconditions():
    p = tm(random_strongly_connected(40, 7, weighted=True))
    res = perron_vector(p, tol=1e-12)
    assert res.residual <= 1e-12
    assert res.phi.min() > 0
    assert abs(res.phi.sum() - 1) <= 1e-12
    assert res.iterations >= 1


def test_perron_non_convergence_reports_residual():
    p = tm(random_strongly_connected(30, 1))
    with pytest.raises(ConvergenceError) as exc:
        perron_vector(p, tol=1e-14, max_iter=2)
    assert exc.value.residual > 0


def test_perron_reducible_chain_detected():
    # 0 -> 1 only: node 1 absorbs all mass, phi[0] underflows to 0
    p = tm(DirectedGraph.from_edges(2, [(0, 1)]))
    with pytest.raises(ValidationError):
        perron_vector(p, tol=0.0, max_iter=5000)


def test_dgcn_propagation_requires_strong_connectivity():
    with pytest.raises(ValidationError):
        dgcn_propagation(DirectedGraph.from_edges(3, [(0, 1), (1, 2)]))


# -------------------------------------------------------------- propagation


def test_propagation_cycle():
    p = tm(CYCLE3)
    a = propagation_matrix(p, perron_vector(p))
    # uniform phi: conjugation is the identity, so A_hat = (P + P^T) / 2
    direct = 0.5 * (p.toarray() + p.toarray().T)
    assert np.allclose(direct, CYCLE3_A_HAT, atol=0, rtol=0)
    assert np.max(np.abs(a - CYCLE3_A_HAT)) <= 1e-12


def test_propagation_pair():
    a, _ = dgcn_propagation(PAIR)
    assert np.max(np.abs(a - 0.5)) <= 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_propagation_matches_renormalized_on_symmetric(seed):
    g = random_symmetric_connected(25, seed, weighted=seed % 2 == 1)
    a, _ = dgcn_propagation(g)
    assert np.max(np.abs(a - renormalized_adjacency(g.to_dense()))) <= 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_propagation_exactly_symmetric_nonnegative(seed):
    g = random_strongly_connected(35, seed, weighted=True)
    a, _ = dgcn_propagation(g)
    assert np.array_equal(a, a.T)
    assert a.min() >= 0


def test_propagation_pattern_is_union_of_directions():
    g = random_strongly_connected(20, 11)
    a, _ = dgcn_propagation(g)
    looped = add_self_loops(g).to_dense()
    assert np.array_equal(a > 0, (looped + looped.T) > 0)


def test_sparse_and_dense_paths_agree():
    g = random_strongly_connected(60, 5, weighted=True)
    p = tm(g)
    phi = perron_vector(p)
    dense = propagation_matrix(p, phi, dense=True)
    sparse = propagation_matrix(p, phi, dense=False)
    assert sp.issparse(sparse)
    assert (sparse != sparse.T).nnz == 0
    assert np.max(np.abs(sparse.toarray() - dense)) <= 1e-15


def test_propagation_rejects_nonpositive_phi():
    p = tm(CYCLE3)
    with pytest.raises(ValidationError):
        propagation_matrix(p, np.array([0.5, 0.5, 0.0]))


# --------------------------------------------------------------- laplacian


def test_laplacian_cycle():
    p = tm(CYCLE3)
    lap = directed_laplacian(p, perron_vector(p))
    assert np.max(np.abs(lap - (np.eye(3) - CYCLE3_A_HAT))) <= 1e-12
    assert np.max(np.abs(lap.sum(axis=1))) <= 1e-12


@pytest.mark.parametrize("seed", range(15))
def test_laplacian_spectrum_in_range(seed):
    g = random_strongly_connected(5 + 3 * seed, seed, weighted=seed % 3 == 0)
    p = tm(g)
    lap = directed_laplacian(p, perron_vector(p))
    eig = np.linalg.eigvalsh(lap)
    assert eig.min() >= -1e-10
    assert eig.max() <= 2 + 1e-10


def test_laplacian_sparse():
    p = tm(random_strongly_connected(30, 2))
    phi = perron_vector(p)
    lap = directed_laplacian(p, phi, dense=False)
    assert sp.issparse(lap)
    assert np.max(np.abs(lap.toarray() - directed_laplacian(p, phi, dense=True))) <= 1e-15


# ---------------------------------------------------------------- baseline


def test_baseline_pair_and_single():
    assert np.max(np.abs(baseline_sym_propagation(PAIR) - 0.5)) <= 1e-15
    assert baseline_sym_propagation(DirectedGraph.from_edges(1, [])).tolist() == [[1.0]]


def test_baseline_discards_direction():
    g = DirectedGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    a = baseline_sym_propagation(g)
    # max(A, A^T) + I is all-ones, every degree 3
    assert np.max(np.abs(a - 1 / 3)) <= 1e-15


@pytest.mark.parametrize("seed", range(10))
def test_baseline_equals_dgcn_on_symmetric(seed):
    g = random_symmetric_connected(20, 100 + seed, weighted=True)
    a, _ = dgcn_propagation(g)
    b = baseline_sym_propagation(g)
    assert np.array_equal(b, b.T)
    assert np.max(np.abs(a - b)) <= 1e-10


def test_baseline_sparse_path():
    g = random_strongly_connected(40, 9)
    assert np.max(np.abs(baseline_sym_propagation(g, dense=False).toarray() - baseline_sym_propagation(g))) <= 1e-15


# ------------------------------------------------------------------ export


def test_matrix_text_round_trip(tmp_path):
    a, perron = dgcn_propagation(random_strongly_connected(15, 4, weighted=True))
    write_matrix(tmp_path / "a.txt", a)
    write_matrix(tmp_path / "phi.txt", perron.phi)
    assert np.array_equal(read_matrix(tmp_path / "a.txt"), a)
    assert np.array_equal(read_matrix(tmp_path / "phi.txt").ravel(), perron.phi)


def test_transition_dataclass_shape():
    p = tm(CYCLE3)
    assert isinstance(p, TransitionMatrix) and p.n == 3 and sp.issparse(p.matrix)
