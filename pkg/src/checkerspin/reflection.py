"""Coefficient-matrix machinery across a reflection cut.

Any state factorizes as ``psi = sum_ab c[a,b] |left a> x (|right b>)_rot``
where the right basis is the mirror image of the left one, spin-rotated by pi
about the 2-axis.  In that convention the cut couplings act on ``c`` through
three real matrices per bisected box (symmetric, antisymmetric-times-i,
symmetric), the reduced eigenvalue equation picks up an overall minus sign on
the crossing term, and ground states admit Hermitian and then positive
semidefinite representatives.  Every convention choice here is pinned by the
residual test of that reduced equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hamiltonian import heisenberg_pair_matrix
from .lattice import LatticeGraph, ReflectionCut
from .spins import (HilbertSpace, SpinRep, pair_coupling, site_operator,
                    spin_matrices, total_spin_components)


class ReflectionError(RuntimeError):
    pass


@dataclass
class CoefficientMatrix:
    entries: np.ndarray
    mode: str  # "rotated" | "plain"
    cut: ReflectionCut
    rep: SpinRep

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))

    def hermiticity_error(self) -> float:
        return float(np.linalg.norm(self.entries - self.entries.conj().T))


@lru_cache(maxsize=32)
def _cut_layout(left_sites, right_sites, twos, n_sites):
    """Index plumbing shared by factorize/assemble, cached per cut and spin."""
    rep = SpinRep(twos)
    d = rep.local_dim
    n_left = len(left_sites)
    if n_left != len(right_sites):
        raise ReflectionError("left and right sides differ in size")
    dim_left = d ** n_left
    full = HilbertSpace(n_sites, rep)

    alpha = np.arange(dim_left, dtype=np.int64)
    to_left = np.zeros(dim_left, dtype=np.int64)
    to_right = np.zeros(dim_left, dtype=np.int64)
    digitsum = np.zeros(dim_left, dtype=np.int64)
    for k in range(n_left):
        digit = (alpha // d ** (n_left - 1 - k)) % d
        to_left += digit * full.strides[left_sites[k]]
        to_right += digit * full.strides[right_sites[k]]
        digitsum += digit
    perm = to_left[:, None] + to_right[None, :]
    # (-1)^(s-m) per site multiplies to (-1)^digitsum on a product state
    signs = np.where(digitsum % 2 == 0, 1.0, -1.0)
    return perm, signs, dim_left


def _layout_for(cut: ReflectionCut, space: HilbertSpace):
    return _cut_layout(tuple(cut.left_sites), tuple(cut.right_sites),
                       space.rep.twos, space.n_sites)


def left_space(cut: ReflectionCut, rep: SpinRep) -> HilbertSpace:
    return HilbertSpace(len(cut.left_sites), rep)


def factorize_state(psi, cut: ReflectionCut, space: HilbertSpace,
                    mode="rotated") -> CoefficientMatrix:
    """Coefficient matrix of a full-space vector across the cut.

    ``rotated`` expands over the spin-rotated mirror basis on the right;
    ``plain`` uses the same unrotated basis on both sides.
    """
    if mode not in ("rotated", "plain"):
        raise ReflectionError(f"unknown mode {mode!r}")
    psi = np.asarray(psi)
    if psi.shape != (space.dim,):
        raise ReflectionError(
            f"state has {psi.shape} entries, space dimension is {space.dim}")
    perm, signs, _ = _layout_for(cut, space)
    m = psi[perm]
    if mode == "rotated":
        m = m[:, ::-1] * signs[None, :]
    return CoefficientMatrix(entries=m.astype(complex), mode=mode, cut=cut,
                             rep=space.rep)


def assemble_state(cmat: CoefficientMatrix, space: HilbertSpace) -> np.ndarray:
    perm, signs, _ = _layout_for(cmat.cut, space)
    m = cmat.entries
    if cmat.mode == "rotated":
        m = (m * signs[None, :])[:, ::-1]
    psi = np.zeros(space.dim, dtype=complex)
    psi[perm] = m
    return psi


def mirror_singlet_state(cut: ReflectionCut, space: HilbertSpace) -> np.ndarray:
    """Tensor product of two-site singlets on mirror pairs; unit coefficient
    matrix (over sqrt(dim)) in rotated mode and total spin zero."""
    _, _, dim_left = _layout_for(cut, space)
    ident = np.eye(dim_left, dtype=complex) / np.sqrt(dim_left)
    return assemble_state(CoefficientMatrix(ident, "rotated", cut, space.rep), space)


# ---------------------------------------------------------------------------
# matrices entering the reduced eigenvalue equation


def interior_bonds(g: LatticeGraph, cut: ReflectionCut, side="left"):
    """Bonds wholly inside one side, re-indexed to positions along that side."""
    sites = cut.left_sites if side == "left" else cut.right_sites
    pos = {s: i for i, s in enumerate(sites)}
    return [(pos[b.i], pos[b.j], b.coupling) for b in g.bonds
            if b.i in pos and b.j in pos]


def _bond_matrix(rep: SpinRep, n_sites, bonds):
    space = HilbertSpace(n_sites, rep)
    ss = heisenberg_pair_matrix(rep)
    acc = None
    for i, j, coupling in bonds:
        term = pair_coupling(space, i, j, coupling * ss)
        acc = term if acc is None else acc + term
    return acc.dense()


def left_block_matrix(g: LatticeGraph, cut: ReflectionCut, rep: SpinRep):
    """Matrix of the left sub-Hamiltonian on the left product basis (real)."""
    h = _bond_matrix(rep, len(cut.left_sites), interior_bonds(g, cut, "left"))
    imag = float(np.abs(h.imag).max())
    if imag > 1e-12:
        raise ReflectionError(f"left block not real: residue {imag:.3e}")
    return h.real


def rotated_right_matrix(g: LatticeGraph, cut: ReflectionCut, rep: SpinRep):
    """Right sub-Hamiltonian expressed on the rotated mirror basis.

    Mirror symmetry makes this equal to the left block matrix; returning it
    separately lets the tests check the convention instead of assuming it.
    """
    h_plain = _bond_matrix(rep, len(cut.right_sites),
                           interior_bonds(g, cut, "right"))
    _, signs, dim_left = _cut_layout(tuple(cut.left_sites), tuple(cut.right_sites),
                                     rep.twos, _n_sites_of(g))
    rot = np.zeros((dim_left, dim_left))
    rot[dim_left - 1 - np.arange(dim_left), np.arange(dim_left)] = signs
    h = rot.T @ h_plain @ rot
    imag = float(np.abs(h.imag).max())
    if imag > 1e-12:
        raise ReflectionError(f"rotated right block not real: residue {imag:.3e}")
    return h.real


def _n_sites_of(g: LatticeGraph) -> int:
    return g.n_sites


@dataclass
class CrossingMatrices:
    """Per bisected box: the three real pair-spin matrices on the left space.

    Components 1 and 3 are symmetric; component 2 carries an explicit factor i
    and comes out real antisymmetric.  A complex residue beyond tolerance
    means the basis convention is broken, which is an error, not a warning.
    """

    per_box: tuple  # tuple of (t1, t2, t3) float arrays
    coupling_scale: float = 1.0


def crossing_pair_matrices(g: LatticeGraph, cut: ReflectionCut,
                           rep: SpinRep) -> CrossingMatrices:
    space_l = left_space(cut, rep)
    pos = {s: i for i, s in enumerate(cut.left_sites)}
    mats = spin_matrices(rep)
    per_box = []
    for cb in cut.cut_boxes:
        p, q = (pos[s] for s in cb.left_pair)
        triple = []
        for k in range(3):
            t = site_operator(space_l, p, mats[k]).dense() \
                + site_operator(space_l, q, mats[k]).dense()
            if k == 1:
                t = 1j * t
            residue = float(np.abs(t.imag).max())
            if residue > 1e-12:
                raise ReflectionError(
                    f"pair matrix {k + 1} has imaginary residue {residue:.3e}")
            t = t.real
            sym_err = np.linalg.norm(t + t.T if k == 1 else t - t.T)
            if sym_err > 1e-12:
                raise ReflectionError(
                    f"pair matrix {k + 1} breaks its symmetry by {sym_err:.3e}")
            triple.append(t)
        per_box.append(tuple(triple))
    return CrossingMatrices(per_box=tuple(per_box),
                            coupling_scale=g.coupling_scale)


def eigen_residual(cmat: CoefficientMatrix, h_left, crossing: CrossingMatrices,
                   energy: float) -> float:
    """Frobenius residual of the reduced eigenvalue equation.

    ``h c + c h^T - sum_boxes sum_k t_k c t_k^T = E c`` with the bond-form
    eigenvalue E; the crossing term enters with an overall minus sign.
    """
    c = cmat.entries
    r = h_left @ c + c @ h_left.T - energy * c
    for triple in crossing.per_box:
        for t in triple:
            r = r - crossing.coupling_scale * (t @ c @ t.T)
    return float(np.linalg.norm(r))


def trace_energy(cmat: CoefficientMatrix, h_left,
                 crossing: CrossingMatrices) -> float:
    """Energy expectation written purely in terms of the coefficient matrix."""
    c = cmat.entries
    cdag = c.conj().T
    val = np.trace(c @ cdag @ h_left) + np.trace(cdag @ c @ h_left)
    for triple in crossing.per_box:
        for t in triple:
            val = val - crossing.coupling_scale * np.trace(cdag @ t @ c @ t.T)
    return float(val.real) / float(np.trace(cdag @ c).real)


# ---------------------------------------------------------------------------
# Hermitian and positive representatives


def hermitize_ground_space(gs, cut: ReflectionCut, space: HilbertSpace,
                           h_op, tol=1e-8):
    """Basis of the ground space whose coefficient matrices are Hermitian.

    For a real mirror-symmetric Hamiltonian, c and its adjoint describe states
    of the same energy, so c + c^H and i(c - c^H) stay in the ground space.
    If the symmetrized candidates span less than the original space the
    symmetry assumption is broken somewhere and we refuse to continue.
    """
    cands = []
    for j in range(gs.degeneracy):
        c = factorize_state(gs.vectors[:, j], cut, space, mode="rotated").entries
        for cand in (c + c.conj().T, 1j * (c - c.conj().T)):
            nrm = np.linalg.norm(cand)
            if nrm > 1e-8:
                cands.append(cand / nrm)
    if not cands:
        raise ReflectionError("no nonzero Hermitian candidates")

    # orthonormalize with real coefficients to stay inside Hermitian matrices
    gram = np.empty((len(cands), len(cands)))
    for a, ca in enumerate(cands):
        for b, cb in enumerate(cands):
            gram[a, b] = np.trace(ca.conj().T @ cb).real
    vals, vecs = np.linalg.eigh(gram)
    keep = vals > 1e-10 * vals.max()
    if int(keep.sum()) != gs.degeneracy:
        raise ReflectionError(
            f"Hermitian candidates span {int(keep.sum())} states, ground space "
            f"has {gs.degeneracy}; cut symmetry is broken")

    reps = []
    for val, w in zip(vals[keep], vecs[:, keep].T):
        mat = sum(wi * ci for wi, ci in zip(w, cands)) / np.sqrt(val)
        rep = CoefficientMatrix(mat, "rotated", cut, space.rep)
        if rep.hermiticity_error() > 1e-9:
            raise ReflectionError("symmetrized representative lost Hermiticity")
        vec = assemble_state(rep, space)
        resid = np.linalg.norm(h_op.matvec(vec) - (gs.energy - h_op.shift) * vec)
        if resid > tol:
            raise ReflectionError(
                f"symmetrized state left the ground space (residual {resid:.3e})")
        reps.append(rep)
    return reps


def matrix_abs(cmat: CoefficientMatrix, herm_tol=1e-9) -> CoefficientMatrix:
    """Replace c by |c| = sqrt(c^2): same norm, eigenvalues made nonnegative."""
    err = cmat.hermiticity_error()
    if err > herm_tol:
        raise ReflectionError(f"matrix_abs needs Hermitian input (error {err:.3e})")
    h = (cmat.entries + cmat.entries.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(h)
    out = (vecs * np.abs(vals)) @ vecs.conj().T
    return CoefficientMatrix(out, cmat.mode, cmat.cut, cmat.rep)


def psd_split(cmat: CoefficientMatrix, herm_tol=1e-9):
    """Spectral split c = c_plus - c_minus with both parts PSD."""
    err = cmat.hermiticity_error()
    if err > herm_tol:
        raise ReflectionError(f"psd_split needs Hermitian input (error {err:.3e})")
    h = (cmat.entries + cmat.entries.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(h)
    plus = (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T
    minus = (vecs * np.clip(-vals, 0.0, None)) @ vecs.conj().T
    return (CoefficientMatrix(plus, cmat.mode, cmat.cut, cmat.rep),
            CoefficientMatrix(minus, cmat.mode, cmat.cut, cmat.rep))


# ---------------------------------------------------------------------------
# coupled basis and the spin-zero projection


@dataclass
class CoupledBasis:
    """Simultaneous eigenbasis of total S^2 and S3 on the left space.

    Columns are grouped per multiplet (total spin j, running copy index k)
    with m descending inside each multiplet; successive m states are generated
    by the lowering operator from the highest weight, which fixes all phases.
    """

    matrix: np.ndarray  # real orthogonal, columns are the coupled states
    twoj: np.ndarray
    twom: np.ndarray
    copy: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def coupled_left_basis(space_l: HilbertSpace) -> CoupledBasis:
    comps = [c.dense() for c in total_spin_components(space_l)]
    s_sq = sum(c @ c for c in comps)
    if np.abs(s_sq.imag).max() > 1e-12:
        raise ReflectionError("total spin squared should be real symmetric")
    s_sq = s_sq.real
    lowering = comps[0] - 1j * comps[1]
    if np.abs(lowering.imag).max() > 1e-12:
        raise ReflectionError("lowering operator should be real in this basis")
    lowering = lowering.real

    sectors = space_l.sector_indices()
    multiplets = []  # (twoj, highest-weight vector)
    for twom in sorted(sectors, reverse=True):
        if twom < 0:
            break
        idx = sectors[twom]
        sub = s_sq[np.ix_(idx, idx)]
        vals, vecs = np.linalg.eigh(sub)
        target = (twom / 2.0) * (twom / 2.0 + 1.0)
        for col in np.flatnonzero(np.abs(vals - target) < 1e-6):
            vec = np.zeros(space_l.dim)
            vec[idx] = vecs[:, col]
            lead = np.argmax(np.abs(vec))
            if vec[lead] < 0:
                vec = -vec
            multiplets.append((twom, vec))

    multiplets.sort(key=lambda item: -item[0])
    columns, twoj_l, twom_l, copy_l = [], [], [], []
    copy_counter = {}
    for twoj, top in multiplets:
        k = copy_counter.get(twoj, 0)
        copy_counter[twoj] = k + 1
        j = twoj / 2.0
        vec = top
        m = j
        while True:
            columns.append(vec)
            twoj_l.append(twoj)
            twom_l.append(int(round(2 * m)))
            copy_l.append(k)
            if m <= -j + 0.5:
                break
            coeff = np.sqrt(j * (j + 1) - m * (m - 1))
            vec = lowering @ vec / coeff
            nrm = np.linalg.norm(vec)
            if abs(nrm - 1.0) > 1e-9:
                raise ReflectionError(f"ladder step lost norm: {nrm}")
            vec = vec / nrm
            m -= 1.0

    w = np.column_stack(columns)
    if w.shape[1] != space_l.dim:
        raise ReflectionError("coupled basis does not span the left space")
    ortho = np.linalg.norm(w.T @ w - np.eye(space_l.dim))
    if ortho > 1e-9:
        raise ReflectionError(f"coupled basis not orthonormal: {ortho:.3e}")
    return CoupledBasis(matrix=w, twoj=np.asarray(twoj_l), twom=np.asarray(twom_l),
                        copy=np.asarray(copy_l))


def spin_zero_project(cmat: CoefficientMatrix, basis: CoupledBasis) -> CoefficientMatrix:
    """Projection of the assembled state onto total spin zero, done on c.

    In the coupled basis only equal-spin blocks survive and the projection is
    a partial trace over m (the alternating pairing signs are already absorbed
    by the rotated right basis).  Positive semidefiniteness is preserved and
    asserted when the input is PSD.
    """
    if cmat.mode != "rotated":
        raise ReflectionError("spin-zero projection is defined in rotated mode")
    if basis.dim != cmat.dim:
        raise ReflectionError("coupled basis does not match the coefficient matrix")
    w = basis.matrix
    cp = w.T @ cmat.entries @ w
    out = np.zeros_like(cp)
    for twoj in np.unique(basis.twoj):
        cols_j = np.flatnonzero(basis.twoj == twoj)
        copies = np.unique(basis.copy[cols_j])
        n_m = twoj + 1
        colidx = np.empty((copies.size, n_m), dtype=np.int64)
        for a, k in enumerate(copies):
            cols = cols_j[basis.copy[cols_j] == k]
            order = np.argsort(-basis.twom[cols], kind="stable")
            colidx[a] = cols[order]
        flat = colidx.reshape(-1)
        blk = cp[np.ix_(flat, flat)].reshape(copies.size, n_m, copies.size, n_m)
        traced = np.einsum("ambm->ab", blk) / n_m
        proj = np.einsum("ab,mn->ambn", traced, np.eye(n_m))
        out[np.ix_(flat, flat)] = proj.reshape(flat.size, flat.size)
    result = w @ out @ w.T

    herm_in = cmat.hermiticity_error() < 1e-9
    if herm_in:
        in_min = float(np.linalg.eigvalsh((cmat.entries + cmat.entries.conj().T) / 2)[0])
        if in_min >= -1e-10:
            out_min = float(np.linalg.eigvalsh((result + result.conj().T) / 2)[0])
            assert out_min >= -1e-10, f"projection broke positivity: {out_min:.3e}"
    return CoefficientMatrix(result, cmat.mode, cmat.cut, cmat.rep)
