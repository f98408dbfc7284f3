"""Random-walk transition matrix, Perron vector and the symmetric directed
propagation operator used by the DGCN layer.

Given a self-looped graph with weights ``w``, the transition matrix is
``P[u, v] = w[u, v] / sum_z w[u, z]``. Its Perron vector ``phi`` is the
positive left eigenvector ``phi P = phi`` with ``sum(phi) = 1``, and the
propagation matrix is::

    A_hat = 1/2 (Phi^{1/2} P Phi^{-1/2} + Phi^{-1/2} P^T Phi^{1/2}),  Phi = diag(phi)

``I - A_hat`` is the normalized Laplacian of the directed graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, ValidationError
from .graph import DirectedGraph, add_self_loops, is_strongly_connected

log = logging.getLogger(__name__)

#: Above this node count the propagation matrix is kept in CSR form.
DENSE_LIMIT = 5000


@dataclass(frozen=True)
class TransitionMatrix:
    n: int
    matrix: sp.csr_matrix  # row-stochastic

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class PerronVector:
    phi: np.ndarray
    residual: float
    iterations: int


def transition_matrix(g: DirectedGraph) -> TransitionMatrix:
    """Row-normalize the weight matrix of a self-looped graph."""
    a = g.to_csr()
    out_deg = np.asarray(a.sum(axis=1)).ravel()
    if np.any(out_deg <= 0):
        bad = np.flatnonzero(out_deg <= 0)[:5].tolist()
        raise ValidationError(f"nodes {bad} have zero out-degree (self-loops missing?)")
    p = sp.diags(1.0 / out_deg) @ a
    return TransitionMatrix(g.n, sp.csr_matrix(p))


def perron_vector(p: TransitionMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> PerronVector:
    """Stationary distribution of ``p`` by power iteration.

    Starts from the uniform vector and renormalizes to unit L1 mass every
    step. Self-loops on every node keep the chain aperiodic so the iteration
    converges geometrically.

    Stops once ``||phi P - phi||_inf <= tol`` *and* the remaining error,
    estimated as ``residual * r / (1 - r)`` from the observed contraction rate
    ``r``, is also below ``tol``; slowly mixing chains otherwise stop with a
    small residual but a much larger error. A residual at round-off level ends
    the iteration unconditionally.
    """
    n = p.n
    if n == 0:
        raise ValidationError("empty transition matrix")
    # phi P computed as P^T phi; dense product is faster for small graphs
    pt = p.matrix.T.toarray() if n <= 2000 else sp.csr_matrix(p.matrix.T)
    phi = np.full(n, 1.0 / n)
    residual = np.inf
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        nxt = pt @ phi
        residual = float(np.max(np.abs(nxt - phi)))
        phi = nxt / nxt.sum()
        history.append(residual)
        if residual > tol:
            continue
        if residual <= 16 * np.finfo(float).eps * phi.max():
            break
        if len(history) > 10:
            rate = (history[-1] / history[-11]) ** 0.1 if history[-11] > 0 else 0.0
            if rate < 1.0 and residual * rate / (1.0 - rate) <= tol:
                break
    else:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iter} iterations (residual {residual:.3e})",
            residual=residual,
            iterations=max_iter,
        )
    residual = float(np.max(np.abs(pt @ phi - phi)))
    if np.any(phi <= 0):
        raise ValidationError("Perron vector has non-positive entries; graph is not strongly connected")
    phi.setflags(write=False)
    log.debug("perron vector: n=%d iterations=%d residual=%.2e", n, it, residual)
    return PerronVector(phi, residual, it)


def _mirror_upper(s):
    """Return 1/2 (S + S^T) with the lower triangle copied from the upper."""
    if sp.issparse(s):
        s = sp.csr_matrix(s)
        upper = sp.triu(0.5 * (s + s.T), format="csr")
        strict = sp.triu(upper, k=1, format="csr")
        out = (upper + strict.T).tocsr()
        out.sort_indices()
        return out
    upper = np.triu(0.5 * (s + s.T))
    return upper + np.triu(upper, 1).T


def propagation_matrix(p: TransitionMatrix, phi: PerronVector, dense: bool | None = None):
    """Symmetric propagation matrix ``A_hat`` (ndarray, or CSR for large graphs)."""
    f = np.asarray(phi.phi if isinstance(phi, PerronVector) else phi, dtype=np.float64)
    if f.shape != (p.n,):
        raise ValidationError("Perron vector length does not match transition matrix")
    if np.any(f <= 0):
        raise ValidationError("Perron vector must be strictly positive")
    root = np.sqrt(f)
    if dense is None:
        dense = p.n <= DENSE_LIMIT
    if dense:
        s = root[:, None] * p.toarray() / root[None, :]
    else:
        s = sp.diags(root) @ p.matrix @ sp.diags(1.0 / root)
    return _mirror_upper(s)


def directed_laplacian(p: TransitionMatrix, phi: PerronVector, dense: bool | None = None):
    a_hat = propagation_matrix(p, phi, dense=dense)
    if sp.issparse(a_hat):
        return (sp.identity(p.n, format="csr") - a_hat).tocsr()
    return np.eye(p.n) - a_hat


def dgcn_propagation(g: DirectedGraph, tol: float = 1e-12, max_iter: int = 100_000, dense=None):
    """Self-loop ``g``, then build its DGCN propagation matrix.

    Returns ``(A_hat, perron)``.
    """
    if not is_strongly_connected(g):
        raise ValidationError("graph is not strongly connected; extract its largest SCC first")
    p = transition_matrix(add_self_loops(g))
    perron = perron_vector(p, tol=tol, max_iter=max_iter)
    return propagation_matrix(p, perron, dense=dense), perron


def baseline_sym_propagation(g: DirectedGraph, dense: bool | None = None):
    """Renormalized GCN operator ``D^{-1/2} (A_sym + I) D^{-1/2}``.

    Direction is discarded with ``A_sym = max(A, A^T)`` before self-loops are
    added.
    """
    a = g.to_csr()
    a = a.maximum(a.T) + sp.identity(g.n, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_root = 1.0 / np.sqrt(deg)
    if dense is None:
        dense = g.n <= DENSE_LIMIT
    if dense:
        s = inv_root[:, None] * a.toarray() * inv_root[None, :]
    else:
        s = sp.diags(inv_root) @ a @ sp.diags(inv_root)
    return _mirror_upper(s)


def write_matrix(path, m) -> None:
    """Dump a vector or matrix as text, one row per line, 17 significant digits."""
    if sp.issparse(m):
        m = m.toarray()
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    np.savetxt(path, m, fmt="%.17g", delimiter=" ")


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.float64, ndmin=2)
