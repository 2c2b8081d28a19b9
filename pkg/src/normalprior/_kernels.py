"""Numba kernels for the incomplete Cholesky factorization and its solves.

These are the only hot loops that cannot be vectorized with numpy; they run
once per outer iteration (factorization) and twice per inner CG iteration
(triangular solves).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def ic0_factor(indptr, indices, data):
    """In-place IC(0) on a lower-triangular CSR matrix.

    Expects sorted column indices with the diagonal entry last in each row.
    Returns the row index of the first nonpositive pivot, or -1 on success.
    """
    n = indptr.shape[0] - 1
    for i in range(n):
        row_start = indptr[i]
        row_end = indptr[i + 1]
        for kk in range(row_start, row_end):
            j = indices[kk]
            s = data[kk]
            # dot product of the strictly-lower prefixes of rows i and j
            pi = row_start
            pj = indptr[j]
            pj_end = indptr[j + 1] - 1  # skip the diagonal of row j
            while pi < kk and pj < pj_end:
                ci = indices[pi]
                cj = indices[pj]
                if ci == cj:
                    s -= data[pi] * data[pj]
                    pi += 1
                    pj += 1
                elif ci < cj:
                    pi += 1
                else:
                    pj += 1
            if j == i:
                if s <= 0.0:
                    return i
                data[kk] = np.sqrt(s)
            else:
                data[kk] = s / data[indptr[j + 1] - 1]
    return -1


@njit(cache=True)
def solve_lower(indptr, indices, data, b, out):
    """Forward substitution with a lower-triangular CSR factor."""
    n = indptr.shape[0] - 1
    for i in range(n):
        s = b[i]
        diag = 1.0
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            if j < i:
                s -= data[kk] * out[j]
            else:
                diag = data[kk]
        out[i] = s / diag


@njit(cache=True)
def solve_upper(indptr, indices, data, b, out):
    """Backward substitution with an upper-triangular CSR factor."""
    n = indptr.shape[0] - 1
    for i in range(n - 1, -1, -1):
        s = b[i]
        diag = 1.0
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            if j > i:
                s -= data[kk] * out[j]
            else:
                diag = data[kk]
        out[i] = s / diag
