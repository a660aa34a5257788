"""Spectra and ground spaces of sparse Hermitian operators, sector by sector.

Two routes cross-check each other: full dense diagonalization (LAPACK) for
small blocks, and a block Krylov iteration with full reorthogonalization for
the big magnetization sectors.  The Krylov code keeps every basis vector and
re-orthogonalizes against all of them; at desk scale correctness beats the
memory savings of selective schemes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .spins import HilbertSpace, SparseOperator, total_spin_components

DENSE_THRESHOLD = 8192
DEGENERACY_TOL = 1e-7


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, message, best_residual):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass
class Spectrum:
    """Full eigenvalue list, ascending, with per-level S3 sector labels."""

    energies: np.ndarray
    twom: np.ndarray | None = None
    vectors: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.energies.size


@dataclass
class GroundSpace:
    energy: float
    degeneracy: int
    vectors: np.ndarray  # columns, orthonormal
    residual_norms: np.ndarray
    degeneracy_tol: float
    twom: np.ndarray | None = None
    total_spin_sq: np.ndarray | None = None
    sector_energies: dict = field(default_factory=dict)


def _block_matrix(op: SparseOperator, idx=None):
    """Sector restriction as raw CSR, demoted to float64 when real."""
    mat = op.matrix if idx is None else op.matrix[idx][:, idx]
    if mat.nnz == 0 or np.abs(mat.data.imag).max() <= 1e-12:
        mat = mat.real.astype(np.float64).tocsr()
    return mat


def _dense_lowest(block, n_keep):
    dense = block.toarray()
    n = dense.shape[0]
    n_keep = min(n_keep, n)
    if n_keep == n:
        vals, vecs = np.linalg.eigh(dense)
    else:
        vals, vecs = sla.eigh(dense, subset_by_index=[0, n_keep - 1])
    res = np.linalg.norm(dense @ vecs - vecs * vals, axis=0)
    return vals, vecs, res


def _krylov_lowest(block, k, tol, max_iter, seed, max_subspace=1600):
    """Lowest-k eigenpairs by block Krylov with full reorthogonalization.

    Returns (values, vectors, residuals) with actual residual norms, or
    raises ConvergenceError carrying the best residual reached.
    """
    from . import kernels

    n = block.shape[0]
    k = min(k, n)
    if n <= max(64, 3 * k):
        return _dense_lowest(block, k)

    data, indices, indptr = block.data, block.indices, block.indptr
    complex_block = np.iscomplexobj(data)
    rng = np.random.default_rng(seed)

    def matmat(xs):
        return kernels.csr_matmat(data, indices, indptr, xs)

    def random_block(cols):
        x = rng.standard_normal((n, cols))
        if complex_block:
            x = x + 1j * rng.standard_normal((n, cols))
        return x

    def orthonormal_against(x, basis):
        for _ in range(2):
            if basis is not None:
                x = x - basis @ (basis.conj().T @ x)
            x, r = np.linalg.qr(x)
            # replace numerically dead directions with fresh random vectors
            dead = np.abs(np.diag(r)) < 1e-10
            if dead.any():
                x[:, dead] = random_block(int(dead.sum()))
            else:
                break
        return x

    cap = min(n, max(max_subspace, 4 * k))
    q = orthonormal_against(random_block(k), None)
    q_all = q
    aq_all = matmat(q)
    t = q_all.conj().T @ aq_all
    best = np.inf

    for _ in range(max_iter):
        m = q_all.shape[1]
        t_h = (t + t.conj().T) / 2.0
        vals, y = np.linalg.eigh(t_h)
        nc = min(k, m)
        x = q_all @ y[:, :nc]
        ax = aq_all @ y[:, :nc]
        res = np.linalg.norm(ax - x * vals[:nc], axis=0)
        best = min(best, float(res.max()))
        if res.max() < tol:
            return vals[:nc], x, res
        if m >= cap:
            break
        w = aq_all[:, -q.shape[1]:]
        q = orthonormal_against(w, q_all)
        aw = matmat(q)
        c = q_all.conj().T @ aw
        t = np.block([[t, c], [c.conj().T, q.conj().T @ aw]])
        q_all = np.hstack([q_all, q])
        aq_all = np.hstack([aq_all, aw])

    if q_all.shape[1] >= n:
        # Krylov space exhausted the whole space: the Ritz pairs are exact
        return vals[:nc], x, res
    raise ConvergenceError("Krylov iteration did not converge", best)


def lanczos_ground(op: SparseOperator, k=6, tol=1e-9, max_iter=200, seed=0,
                   degeneracy_tol=DEGENERACY_TOL) -> GroundSpace:
    """Ground cluster of a Hermitian operator via the block Krylov solver.

    ``k`` must exceed the expected degeneracy; degenerate levels are resolved
    by the block width, and the run is deterministic for a fixed seed.
    """
    if not op.hermitian:
        raise SolverError("Krylov ground solve needs a Hermitian operator")
    block = _block_matrix(op)
    vals, vecs, res = _krylov_lowest(block, k, tol, max_iter, seed)
    cluster = np.flatnonzero(vals <= vals[0] + degeneracy_tol)
    return GroundSpace(
        energy=float(vals[0]) + op.shift,
        degeneracy=int(cluster.size),
        vectors=np.ascontiguousarray(vecs[:, cluster]),
        residual_norms=res[cluster],
        degeneracy_tol=degeneracy_tol,
    )


def dense_spectrum(op: SparseOperator, space: HilbertSpace | None = None,
                   want_vectors=False, dense_threshold=DENSE_THRESHOLD,
                   workers=1) -> Spectrum:
    """Full eigendecomposition, solving each S3 sector independently.

    Refuses blocks above ``dense_threshold``; use the Krylov path for those.
    """
    if space is not None and space.dim != op.dim:
        raise SolverError("operator and space dimensions differ")
    if space is None:
        blocks = [(None, np.arange(op.dim))]
    else:
        blocks = sorted(space.sector_indices().items(), reverse=True)
    for _, idx in blocks:
        if idx.size > dense_threshold:
            raise SolverError(
                f"sector of dimension {idx.size} exceeds the dense threshold "
                f"{dense_threshold}; use the Lanczos path (lanczos_ground)")

    def solve(item):
        twom, idx = item
        dense = _block_matrix(op, idx if space is not None else None).toarray()
        if want_vectors:
            vals, vecs = np.linalg.eigh(dense)
        else:
            vals, vecs = np.linalg.eigvalsh(dense), None
        return twom, idx, vals, vecs

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(solve, blocks))
    else:
        solved = [solve(item) for item in blocks]

    energies = np.concatenate([vals for _, _, vals, _ in solved])
    labels = np.concatenate([np.full(vals.size, twom if twom is not None else 0,
                                     dtype=np.int64)
                             for twom, _, vals, _ in solved])
    order = np.argsort(energies, kind="stable")
    energies = energies[order] + op.shift
    labels = labels[order]
    vectors = None
    if want_vectors:
        vectors = np.zeros((op.dim, op.dim), dtype=complex)
        col = 0
        for twom, idx, vals, vecs in solved:
            vectors[idx, col:col + vals.size] = vecs
            col += vals.size
        vectors = vectors[:, order]
    return Spectrum(energies=energies, twom=None if space is None else labels,
                    vectors=vectors)


def _sector_lowest(block, k, tol, max_iter, seed, degeneracy_tol, dense_cutoff,
                   k_cap=32):
    n = block.shape[0]
    if n <= dense_cutoff:
        keep = min(n, max(k, 12))
        vals, vecs, res = _dense_lowest(block, keep)
        while vals.size < n and vals[-1] <= vals[0] + degeneracy_tol:
            keep = min(n, 2 * keep)
            vals, vecs, res = _dense_lowest(block, keep)
        return vals, vecs, res
    k_try = k
    while True:
        vals, vecs, res = _krylov_lowest(block, k_try, tol, max_iter, seed)
        cluster = np.flatnonzero(vals <= vals[0] + degeneracy_tol)
        if cluster.size < vals.size or k_try >= min(k_cap, n):
            return vals, vecs, res
        k_try = min(2 * k_try, k_cap, n)


def ground_space(op: SparseOperator, space: HilbertSpace | None = None,
                 degeneracy_tol=DEGENERACY_TOL, tol=1e-9, k=8,
                 dense_cutoff=2048, max_iter=200, seed=0, workers=1,
                 with_spin=True) -> GroundSpace:
    """Global ground space across all S3 sectors.

    Degeneracy is counted across sectors; each returned vector gets its sector
    label, its residual norm and (optionally) its total-spin expectation.
    """
    if space is not None and space.dim != op.dim:
        raise SolverError("operator and space dimensions differ")
    if space is None:
        blocks = [(None, np.arange(op.dim))]
    else:
        blocks = sorted(space.sector_indices().items(), reverse=True)

    def solve(item):
        twom, idx = item
        block = _block_matrix(op, idx if space is not None else None)
        vals, vecs, res = _sector_lowest(block, k, tol, max_iter,
                                         seed=_sector_seed(seed, twom),
                                         degeneracy_tol=degeneracy_tol,
                                         dense_cutoff=dense_cutoff)
        return twom, idx, vals, vecs, res

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(solve, blocks))
    else:
        solved = [solve(item) for item in blocks]

    e0 = min(vals[0] for _, _, vals, _, _ in solved)
    cols, labels, residuals = [], [], []
    sector_energies = {}
    for twom, idx, vals, vecs, res in solved:
        sector_energies[twom] = float(vals[0]) + op.shift
        sel = np.flatnonzero(vals <= e0 + degeneracy_tol)
        for j in sel:
            full = np.zeros(op.dim, dtype=complex)
            full[idx] = vecs[:, j]
            cols.append(full)
            labels.append(twom if twom is not None else 0)
            residuals.append(res[j])
    vectors = np.column_stack(cols)
    residuals = np.asarray(residuals)

    spin_sq = None
    if with_spin and space is not None:
        comps = total_spin_components(space)
        spin_sq = np.array([
            sum(float(np.vdot(w := c.matvec(vectors[:, j]), w).real) for c in comps)
            for j in range(vectors.shape[1])
        ])
    return GroundSpace(
        energy=float(e0) + op.shift,
        degeneracy=vectors.shape[1],
        vectors=vectors,
        residual_norms=residuals,
        degeneracy_tol=degeneracy_tol,
        twom=np.asarray(labels, dtype=np.int64),
        total_spin_sq=spin_sq,
        sector_energies=sector_energies,
    )


def ground_energy(op: SparseOperator, space: HilbertSpace | None = None,
                  tol=1e-8, k=4, dense_cutoff=2048, max_iter=200, seed=0,
                  workers=1) -> float:
    """Lowest eigenvalue only; the cheap path for field scans.

    Krylov values are variational upper bounds with error at most the
    residual norm, so inequality margins computed from them are sound to
    within ``tol``.
    """
    if space is None:
        blocks = [(None, np.arange(op.dim))]
    else:
        blocks = sorted(space.sector_indices().items(), reverse=True)

    def solve(item):
        twom, idx = item
        block = _block_matrix(op, idx if space is not None else None)
        n = block.shape[0]
        if n <= dense_cutoff:
            return float(sla.eigh(block.toarray(), eigvals_only=True,
                                  subset_by_index=[0, 0])[0])
        vals, _, _ = _krylov_lowest(block, k, tol, max_iter,
                                    seed=_sector_seed(seed, twom))
        return float(vals[0])

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            lows = list(pool.map(solve, blocks))
    else:
        lows = [solve(item) for item in blocks]
    return min(lows) + op.shift


def _sector_seed(seed, twom):
    return [seed, 0 if twom is None else twom + (1 << 16)]
