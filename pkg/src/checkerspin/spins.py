"""Spin-s matrices, many-body embeddings and magnetization sectors.

Basis conventions, fixed once and tested:

* single-site basis states are ordered by decreasing magnetic quantum number,
  so digit ``a`` corresponds to ``m = s - a``;
* product basis states are numbered with site 0 as the most significant digit
  in base ``2s + 1``.

Operators are stored as complex CSR matrices even when they happen to be real;
realness is something the tests assert where the theory claims it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import kernels

HERMITICITY_TOL = 1e-12


class SpinError(ValueError):
    pass


@dataclass(frozen=True)
class SpinRep:
    """Spin representation, stored as twice the spin to stay exact."""

    twos: int

    def __post_init__(self):
        if not isinstance(self.twos, (int, np.integer)) or self.twos < 1:
            raise SpinError(f"2s must be a positive integer, got {self.twos!r}")

    @property
    def s(self) -> float:
        return self.twos / 2.0

    @property
    def local_dim(self) -> int:
        return self.twos + 1

    @classmethod
    def from_value(cls, value) -> "SpinRep":
        """Accepts 0.5, 1, '1/2', '3/2', ... and validates half-integerness."""
        if isinstance(value, SpinRep):
            return value
        if isinstance(value, str):
            frac = Fraction(value)
        else:
            frac = Fraction(value).limit_denominator(2)
            if float(frac) != float(value):
                raise SpinError(f"spin must be a half-integer, got {value!r}")
        twos = frac * 2
        if twos.denominator != 1:
            raise SpinError(f"spin must be a half-integer, got {value!r}")
        return cls(int(twos))

    def label(self) -> str:
        return str(Fraction(self.twos, 2))


def spin_matrices(rep: SpinRep):
    """Return (S1, S2, S3) as dense complex matrices in the |s,m> basis.

    S3 is diagonal with entries s, s-1, ..., -s; the ladder operators have the
    usual nonnegative matrix elements, S1 = (S+ + S-)/2, S2 = (S+ - S-)/2i.
    """
    d = rep.local_dim
    s = rep.s
    m = s - np.arange(d)
    up = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))  # <m+1|S+|m>
    splus = np.zeros((d, d), dtype=complex)
    splus[np.arange(d - 1), np.arange(1, d)] = up
    sminus = splus.conj().T
    s1 = (splus + sminus) / 2.0
    s2 = (splus - sminus) / 2.0j
    s3 = np.diag(m).astype(complex)
    return s1, s2, s3


class HilbertSpace:
    """Product space of ``n_sites`` identical spins with S3 sector bookkeeping."""

    def __init__(self, n_sites: int, rep: SpinRep):
        if n_sites < 1:
            raise SpinError("need at least one site")
        self.n_sites = int(n_sites)
        self.rep = rep
        self.dim = rep.local_dim ** self.n_sites
        d = rep.local_dim
        # stride of site i: site 0 is the most significant digit
        self.strides = np.array([d ** (self.n_sites - 1 - i) for i in range(self.n_sites)],
                                dtype=np.int64)
        self._sectors = None
        self._twom = None

    def digits(self, site: int, idx=None):
        if idx is None:
            idx = np.arange(self.dim, dtype=np.int64)
        return (idx // self.strides[site]) % self.rep.local_dim

    def twom_values(self):
        """Twice the total S3 eigenvalue of every product basis state."""
        if self._twom is None:
            total = np.zeros(self.dim, dtype=np.int64)
            idx = np.arange(self.dim, dtype=np.int64)
            for site in range(self.n_sites):
                total += self.digits(site, idx)
            self._twom = self.n_sites * self.rep.twos - 2 * total
        return self._twom

    def sector_indices(self):
        """Map twom -> ascending array of product states with that S3_tot."""
        if self._sectors is None:
            twom = self.twom_values()
            keys = np.unique(twom)[::-1]
            self._sectors = {int(k): np.flatnonzero(twom == k) for k in keys}
        return self._sectors


def sector_decomposition(space: HilbertSpace):
    """Partition of the product basis by total S3 (keys are 2*m, descending)."""
    sectors = space.sector_indices()
    sizes = sum(v.size for v in sectors.values())
    assert sizes == space.dim
    return sectors


class SparseOperator:
    """Hermitian-aware sparse operator, optionally carrying a scalar shift.

    The physical operator is ``matrix + shift * identity``; the shift lets
    builders track additive constants dropped from (or added to) the matrix so
    energy comparisons stay like-for-like.
    """

    def __init__(self, matrix, hermitian=True, shift=0.0, check=True):
        m = sp.csr_matrix(matrix, dtype=complex)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        if m.shape[0] != m.shape[1]:
            raise SpinError("operator must be square")
        self.matrix = m
        self.hermitian = bool(hermitian)
        self.shift = float(shift)
        if self.hermitian and check and m.nnz:
            dev = abs(m - m.conj().T).max()
            if dev > HERMITICITY_TOL:
                raise SpinError(f"operator not Hermitian: max deviation {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def is_real(self, tol=1e-12) -> bool:
        if self.matrix.nnz == 0:
            return True
        return float(np.abs(self.matrix.data.imag).max()) <= tol

    def matvec(self, x):
        m = self.matrix
        return kernels.csr_matvec(m.data, m.indices, m.indptr, x)

    def matmat(self, xs):
        m = self.matrix
        return kernels.csr_matmat(m.data, m.indices, m.indptr, xs)

    def expectation(self, psi):
        """<psi|A|psi> / <psi|psi>, including the scalar shift."""
        nrm = np.vdot(psi, psi).real
        val = np.vdot(psi, self.matvec(psi)) / nrm
        if self.hermitian:
            val = val.real
        return val + self.shift

    def matrix_element(self, phi, psi):
        return np.vdot(phi, self.matvec(psi))

    def dense(self):
        return self.matrix.toarray()

    def subblock(self, idx):
        """Restriction to the given basis indices (keeps the shift)."""
        block = self.matrix[idx][:, idx]
        return SparseOperator(block, hermitian=self.hermitian, shift=self.shift, check=False)

    def scaled(self, factor):
        return SparseOperator(self.matrix * factor, hermitian=self.hermitian and
                              abs(np.imag(factor)) == 0, shift=self.shift * factor, check=False)

    def __add__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        return SparseOperator(self.matrix + other.matrix,
                              hermitian=self.hermitian and other.hermitian,
                              shift=self.shift + other.shift, check=False)

    def __sub__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        return SparseOperator(self.matrix - other.matrix,
                              hermitian=self.hermitian and other.hermitian,
                              shift=self.shift - other.shift, check=False)


def identity_operator(space: HilbertSpace) -> SparseOperator:
    return SparseOperator(sp.identity(space.dim, dtype=complex, format="csr"), check=False)


def site_operator(space: HilbertSpace, site: int, local) -> SparseOperator:
    """Embed a single-site matrix: acts as ``local`` on ``site``, identity elsewhere."""
    d = space.rep.local_dim
    local = np.asarray(local, dtype=complex)
    if local.shape != (d, d):
        raise SpinError(f"local matrix must be {d}x{d}, got {local.shape}")
    if not (0 <= site < space.n_sites):
        raise SpinError(f"site {site} out of range for {space.n_sites} sites")
    stride = space.strides[site]
    idx = np.arange(space.dim, dtype=np.int64)
    dig = space.digits(site, idx)
    rows, cols, vals = [], [], []
    for a_out in range(d):
        for a_in in range(d):
            v = local[a_out, a_in]
            if v == 0:
                continue
            src = idx[dig == a_in]
            rows.append(src + (a_out - a_in) * stride)
            cols.append(src)
            vals.append(np.full(src.size, v, dtype=complex))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.dim, space.dim),
    )
    herm = bool(np.allclose(local, local.conj().T, atol=HERMITICITY_TOL))
    return SparseOperator(mat, hermitian=herm, check=False)


def pair_coupling(space: HilbertSpace, i: int, j: int, local2) -> SparseOperator:
    """Embed a two-site matrix given in the (site i) x (site j) product basis."""
    if i == j:
        raise SpinError("pair coupling needs two distinct sites")
    d = space.rep.local_dim
    local2 = np.asarray(local2, dtype=complex)
    if local2.shape != (d * d, d * d):
        raise SpinError("two-site matrix has wrong shape")
    si, sj = space.strides[i], space.strides[j]
    idx = np.arange(space.dim, dtype=np.int64)
    di = space.digits(i, idx)
    dj = space.digits(j, idx)
    rows, cols, vals = [], [], []
    for out in range(d * d):
        ao, bo = divmod(out, d)
        for inn in range(d * d):
            v = local2[out, inn]
            if v == 0:
                continue
            ai, bi = divmod(inn, d)
            src = idx[(di == ai) & (dj == bi)]
            rows.append(src + (ao - ai) * si + (bo - bi) * sj)
            cols.append(src)
            vals.append(np.full(src.size, v, dtype=complex))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.dim, space.dim),
    )
    herm = bool(np.allclose(local2, local2.conj().T, atol=HERMITICITY_TOL))
    return SparseOperator(mat, hermitian=herm, check=False)


def heisenberg_pair_matrix(rep: SpinRep):
    """Two-site s.s matrix (d^2 x d^2), the building block of every bond term."""
    s1, s2, s3 = spin_matrices(rep)
    return np.kron(s1, s1) + np.kron(s2, s2) + np.kron(s3, s3)


def total_spin_components(space: HilbertSpace):
    """[sum_i S1_i, sum_i S2_i, sum_i S3_i] as sparse operators."""
    mats = spin_matrices(space.rep)
    comps = []
    for k in range(3):
        acc = None
        for site in range(space.n_sites):
            term = site_operator(space, site, mats[k])
            acc = term if acc is None else acc + term
        comps.append(acc)
    return comps


def total_spin_ops(space: HilbertSpace):
    """(S3_tot, S2_tot) where S2_tot = (sum_i s_i) . (sum_i s_i)."""
    comps = total_spin_components(space)
    s3_tot = comps[2]
    acc = None
    for c in comps:
        sq = SparseOperator(c.matrix @ c.matrix, hermitian=True, check=False)
        acc = sq if acc is None else acc + sq
    return s3_tot, acc


def total_spin_sq_expectation(space: HilbertSpace, psi, comps=None):
    """<psi|S2_tot|psi> via component norms; avoids squaring big matrices."""
    if comps is None:
        comps = total_spin_components(space)
    nrm = np.vdot(psi, psi).real
    return sum(float(np.vdot(v := c.matvec(psi), v).real) for c in comps) / nrm


def rotation_operator(space: HilbertSpace, sites) -> SparseOperator:
    """Pi rotation about the 2-axis on the given sites.

    Maps |s,m> to (-1)^(s-m) |s,-m> on each listed site, leaving the others
    alone.  The matrix is a real signed permutation; conjugation flips the
    sign of the S1 and S3 components on those sites and preserves S2.
    """
    sites = list(sites)
    d = space.rep.local_dim
    idx = np.arange(space.dim, dtype=np.int64)
    target = idx.copy()
    sign = np.ones(space.dim, dtype=np.int64)
    for site in sites:
        a = space.digits(site, idx)
        target = target + (space.rep.twos - 2 * a) * space.strides[site]
        sign = sign * np.where(a % 2 == 0, 1, -1)
    mat = sp.coo_matrix((sign.astype(complex), (target, idx)),
                        shape=(space.dim, space.dim))
    return SparseOperator(mat, hermitian=False, check=False)
