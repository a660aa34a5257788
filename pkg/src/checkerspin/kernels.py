"""CSR matrix-vector kernels with a numba fast path.

The sparse matvec is the hot loop of every Lanczos run, so it gets a jitted
implementation.  A vectorized numpy implementation is always available and is
selected by setting the environment variable ``CHECKERSPIN_NUMBA=0`` (or when
numba is not importable).  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("CHECKERSPIN_NUMBA", "1").strip().lower()
_want_numba = _env not in ("0", "false", "off", "no")

if _want_numba:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
else:
    njit = None

NUMBA_ENABLED = njit is not None


def csr_matvec_numpy(data, indices, indptr, x):
    """y = A @ x for CSR arrays, using reduceat row sums."""
    prod = data * x[indices]
    n = indptr.shape[0] - 1
    out = np.zeros(n, dtype=prod.dtype)
    # reduceat cannot express empty rows directly; sum only rows with entries.
    rows = np.flatnonzero(np.diff(indptr) > 0)
    if rows.size:
        out[rows] = np.add.reduceat(prod, indptr[rows])
    return out


def csr_matmat_numpy(data, indices, indptr, xs):
    """Y = A @ X column by column (keeps the nnz-sized temporary small)."""
    n = indptr.shape[0] - 1
    out = np.empty((n, xs.shape[1]), dtype=np.result_type(data, xs))
    for j in range(xs.shape[1]):
        out[:, j] = csr_matvec_numpy(data, indices, indptr, np.ascontiguousarray(xs[:, j]))
    return out


if NUMBA_ENABLED:

    @njit(cache=True, nogil=True)
    def _csr_matvec_jit(data, indices, indptr, x, out):  # pragma: no cover - jitted
        n = indptr.shape[0] - 1
        for i in range(n):
            acc = out[i]
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * x[indices[p]]
            out[i] = acc

    @njit(cache=True, nogil=True)
    def _csr_matmat_jit(data, indices, indptr, xs, out):  # pragma: no cover - jitted
        n = indptr.shape[0] - 1
        k = xs.shape[1]
        for i in range(n):
            for p in range(indptr[i], indptr[i + 1]):
                v = data[p]
                col = indices[p]
                for j in range(k):
                    out[i, j] += v * xs[col, j]


def csr_matvec(data, indices, indptr, x, use_numba=None):
    if use_numba is None:
        use_numba = NUMBA_ENABLED
    if use_numba and NUMBA_ENABLED:
        dtype = np.result_type(data, x)
        out = np.zeros(indptr.shape[0] - 1, dtype=dtype)
        _csr_matvec_jit(data, indices, indptr,
                        np.ascontiguousarray(x, dtype=dtype), out)
        return out
    return csr_matvec_numpy(data, indices, indptr, x)


def csr_matmat(data, indices, indptr, xs, use_numba=None):
    if use_numba is None:
        use_numba = NUMBA_ENABLED
    if use_numba and NUMBA_ENABLED:
        dtype = np.result_type(data, xs)
        out = np.zeros((indptr.shape[0] - 1, xs.shape[1]), dtype=dtype)
        _csr_matmat_jit(data, indices, indptr,
                        np.ascontiguousarray(xs, dtype=dtype), out)
        return out
    return csr_matmat_numpy(data, indices, indptr, xs)


def warmup():
    """Trigger JIT compilation on a tiny matrix so timings stay honest."""
    if not NUMBA_ENABLED:
        return
    data = np.array([1.0, 2.0])
    idx = np.array([0, 1], dtype=np.int32)
    ptr = np.array([0, 1, 2], dtype=np.int32)
    for dt in (np.float64, np.complex128):
        csr_matvec(data.astype(dt), idx, ptr, np.ones(2, dtype=dt))
        csr_matmat(data.astype(dt), idx, ptr, np.ones((2, 2), dtype=dt))
