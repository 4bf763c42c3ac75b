"""Hot arithmetic kernels: batched multiply-reduce in unramified tower rings.

Elements of o_K / p^N (K/Q_p unramified of degree f) are int64 coefficient
vectors of length f in the power basis.  A product is a length 2f-1
convolution followed by reduction with the precomputed table RED, where
RED[j] holds the coefficients of x^(f+j) modulo the defining polynomial.

Every kernel has a numba @njit implementation and a pure-numpy fallback.
Set WILDJL_PURE_NUMPY=1 to force the fallback; it is also used when numba
is unavailable.  `python -m wildjl.bench` compares the two paths.

int64 never overflows here: coefficients are < p^N <= 3**6 and the inner
sums are far below 2**63.
"""

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("WILDJL_PURE_NUMPY", "") not in ("", "0")

if not _FORCE_NUMPY:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA


def _poly_mul_reduce_np(a, b, red, pn):
    # a, b: (m, f) batches; red: (f-1, f); returns (m, f)
    m, f = a.shape
    if f == 1:
        return (a * b) % pn
    full = np.zeros((m, 2 * f - 1), dtype=np.int64)
    for i in range(f):
        full[:, i : i + f] += a[:, i : i + 1] * b
    out = full[:, :f].copy()
    for j in range(f - 1):
        out += full[:, f + j : f + j + 1] * red[j]
    return out % pn


def _mat_mul_np(A, B, red, pn):
    # A: (n, m, f), B: (m, k, f) -> (n, k, f)
    n, mm, f = A.shape
    k = B.shape[1]
    if f == 1:
        return (A[:, :, 0] @ B[:, :, 0])[:, :, None] % pn
    full = np.zeros((n, k, 2 * f - 1), dtype=np.int64)
    for i in range(f):
        for j in range(f):
            full[:, :, i + j] += A[:, :, i] @ B[:, :, j]
    out = full[:, :, :f].copy()
    for j in range(f - 1):
        out += full[:, :, f + j : f + j + 1] * red[j]
    return out % pn


if HAVE_NUMBA:

    @njit(cache=True)
    def _poly_mul_reduce_nb(a, b, red, pn):  # pragma: no cover - numba path
        m, f = a.shape
        out = np.zeros((m, f), dtype=np.int64)
        if f == 1:
            for r in range(m):
                out[r, 0] = (a[r, 0] * b[r, 0]) % pn
            return out
        full = np.zeros(2 * f - 1, dtype=np.int64)
        for r in range(m):
            for d in range(2 * f - 1):
                full[d] = 0
            for i in range(f):
                ai = a[r, i]
                if ai != 0:
                    for j in range(f):
                        full[i + j] += ai * b[r, j]
            for c in range(f):
                out[r, c] = full[c]
            for j in range(f - 1):
                hi = full[f + j]
                if hi != 0:
                    for c in range(f):
                        out[r, c] += hi * red[j, c]
            for c in range(f):
                out[r, c] %= pn
        return out

    @njit(cache=True)
    def _mat_mul_nb(A, B, red, pn):  # pragma: no cover - numba path
        n, mm, f = A.shape
        k = B.shape[1]
        out = np.zeros((n, k, f), dtype=np.int64)
        full = np.zeros(2 * f - 1, dtype=np.int64)
        for i in range(n):
            for j in range(k):
                for d in range(2 * f - 1):
                    full[d] = 0
                for t in range(mm):
                    for a in range(f):
                        c = A[i, t, a]
                        if c != 0:
                            for b in range(f):
                                full[a + b] += c * B[t, j, b]
                for c in range(f):
                    out[i, j, c] = full[c]
                for d in range(f - 1):
                    hi = full[f + d]
                    if hi != 0:
                        for c in range(f):
                            out[i, j, c] += hi * red[d, c]
                for c in range(f):
                    out[i, j, c] %= pn
        return out


def poly_mul_reduce(a, b, red, pn):
    """Batched product of ring elements; a, b shaped (m, f)."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if USING_NUMBA:
        return _poly_mul_reduce_nb(a, b, red, pn)
    return _poly_mul_reduce_np(a, b, red, pn)


def mat_mul(A, B, red, pn):
    """Matrix product over the tower ring; A (n,m,f), B (m,k,f)."""
    A = np.ascontiguousarray(A, dtype=np.int64)
    B = np.ascontiguousarray(B, dtype=np.int64)
    if USING_NUMBA:
        return _mat_mul_nb(A, B, red, pn)
    return _mat_mul_np(A, B, red, pn)
