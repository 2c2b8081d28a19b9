"""Minimal sparse linear algebra for the solver.

Sparse matrices are scipy CSR matrices throughout (row offsets, column
indices, values).  This module adds the pieces the solver actually needs on
top of that storage: plain and truncated conjugate gradients with a relative
stopping tolerance, a zero-fill incomplete Cholesky preconditioner, and the
P1 surface finite-element matrices defining the deformation inner product.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import BreakdownNaNError, DegenerateFaceError, PivotBreakdownError

CONVERGED = "converged"
MAX_ITERS = "max_iters"
NEGATIVE_CURVATURE = "negative_curvature"


@dataclass
class CgReport:
    """Outcome of a conjugate gradient solve."""

    x: np.ndarray
    iterations: int
    termination: str
    rel_residual: float


def _as_operator(A):
    if sp.issparse(A):
        return A.__matmul__
    return A


def cg_solve(A, b, rtol=1e-8, max_iters=None, preconditioner=None):
    """Preconditioned conjugate gradients from an all-zero initial guess.

    Parameters
    ----------
    A : scipy sparse matrix (symmetric positive definite)
    b : (n,) array
    rtol : float
        Stop when ``|Ax - b| / |b| <= rtol``.
    max_iters : int, optional
        Defaults to ``10 * n``.
    preconditioner : callable, optional
        Maps a residual to a preconditioned residual (application of the
        inverse preconditioner).

    Raises
    ------
    BreakdownNaNError
        If a non-finite value appears during the iteration.
    """
    return _cg(A, b, rtol, max_iters, preconditioner, truncated=False)


def truncated_cg(A, b, rtol=1e-8, max_iters=None, preconditioner=None):
    """CG on a possibly indefinite symmetric matrix.

    Identical to :func:`cg_solve` on definite systems.  If a search
    direction of nonpositive curvature is encountered, the current iterate is
    returned (the preconditioned residual direction if this happens on the
    very first iteration) with termination ``negative_curvature``.
    """
    return _cg(A, b, rtol, max_iters, preconditioner, truncated=True)


def _cg(A, b, rtol, max_iters, preconditioner, truncated):
    matvec = _as_operator(A)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if max_iters is None:
        max_iters = 10 * n
    if preconditioner is None:
        preconditioner = lambda r: r

    b_norm = float(np.linalg.norm(b))
    if not np.isfinite(b_norm):
        raise BreakdownNaNError("right-hand side is not finite")
    if b_norm == 0.0:
        return CgReport(np.zeros(n), 0, CONVERGED, 0.0)

    x = np.zeros(n)
    r = b.copy()
    z = preconditioner(r)
    p = z.copy()
    rz = float(r @ z)
    res = b_norm

    for it in range(max_iters):
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp):
            raise BreakdownNaNError("non-finite curvature in CG")
        if truncated and pAp <= 0.0:
            if it == 0:
                x = z
                res = b_norm
            return CgReport(x, it, NEGATIVE_CURVATURE, res / b_norm)
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        res = float(np.linalg.norm(r))
        if not np.isfinite(res):
            raise BreakdownNaNError("non-finite residual in CG")
        if res <= rtol * b_norm:
            return CgReport(x, it + 1, CONVERGED, res / b_norm)
        z = preconditioner(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p

    return CgReport(x, max_iters, MAX_ITERS, res / b_norm)


def ic0(A):
    """Zero-fill incomplete Cholesky factor of a symmetric CSR matrix.

    Returns the lower-triangular factor L (CSR, on the lower sparsity
    pattern of A) with ``L @ L.T`` approximating A.

    Raises
    ------
    PivotBreakdownError
        If a nonpositive pivot occurs; callers fall back to diagonal
        preconditioning.
    """
    A = sp.csr_matrix(A)
    lower = sp.tril(A, format="csr")
    lower.sort_indices()
    data = lower.data.astype(np.float64, copy=True)
    bad = _kernels.ic0_factor(lower.indptr, lower.indices, data)
    if bad >= 0:
        raise PivotBreakdownError(f"nonpositive pivot in row {int(bad)}")
    return sp.csr_matrix((data, lower.indices, lower.indptr), shape=lower.shape)


class IC0Preconditioner:
    """Applies ``(L L^T)^{-1}`` by two triangular solves."""

    def __init__(self, lower):
        lower = sp.csr_matrix(lower)
        lower.sort_indices()
        upper = sp.csr_matrix(lower.T)
        upper.sort_indices()
        self._l = lower
        self._u = upper

    def __call__(self, r):
        y = np.empty_like(r)
        _kernels.solve_lower(
            self._l.indptr, self._l.indices, self._l.data, r, y
        )
        out = np.empty_like(r)
        _kernels.solve_upper(
            self._u.indptr, self._u.indices, self._u.data, y, out
        )
        return out


class JacobiPreconditioner:
    """Diagonal (inverse) preconditioner."""

    def __init__(self, A):
        d = np.asarray(A.diagonal(), dtype=np.float64)
        if (d <= 0.0).any():
            raise ValueError("Jacobi preconditioner requires a positive diagonal")
        self._inv = 1.0 / d

    def __call__(self, r):
        return self._inv * r


class BlockedPreconditioner:
    """Applies a scalar preconditioner per coordinate of interleaved dofs.

    A vector of length ``3 V`` ordered ``(v0x, v0y, v0z, v1x, ...)`` is
    reshaped to (V, 3) and the scalar preconditioner is applied column-wise.
    """

    def __init__(self, scalar, block=3):
        self._scalar = scalar
        self._block = block

    def __call__(self, r):
        rb = r.reshape(-1, self._block)
        out = np.empty_like(rb)
        for k in range(self._block):
            out[:, k] = self._scalar(np.ascontiguousarray(rb[:, k]))
        return out.ravel()


def spd_preconditioner(A):
    """IC(0) preconditioner for ``A`` with Jacobi fallback on breakdown."""
    try:
        return IC0Preconditioner(ic0(A))
    except PivotBreakdownError:
        return JacobiPreconditioner(A)


def assemble_p1_scalar(mesh, cache):
    """P1 mass and stiffness matrices of the surface scalar Laplacian.

    Assembled triangle by triangle: the local mass matrix is
    ``area/12 * (ones + eye*1)`` scaled to (2,1,1)/(1,2,1)/(1,1,2) rows, and
    the local stiffness entries are ``dot(e_i, e_j) / (4 area)`` with ``e_i``
    the edge vector opposite local vertex ``i``.

    Returns
    -------
    (mass, stiffness) : scipy CSR matrices of shape (V, V)
    """
    areas = cache.face_area
    if (areas <= 0.0).any():
        raise DegenerateFaceError("zero-area face in P1 assembly")
    faces = mesh.faces
    pos = mesh.positions
    nv = mesh.n_vertices

    p0 = pos[faces[:, 0]]
    p1 = pos[faces[:, 1]]
    p2 = pos[faces[:, 2]]
    # edge vector opposite local vertex i
    e = np.stack([p2 - p1, p0 - p2, p1 - p0], axis=1)  # (F, 3, 3)

    local_mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    mass_blocks = areas[:, None, None] * local_mass[None, :, :]
    stiff_blocks = np.einsum("fik,fjk->fij", e, e) / (4.0 * areas)[:, None, None]

    rows = np.broadcast_to(faces[:, :, None], (faces.shape[0], 3, 3)).ravel()
    cols = np.broadcast_to(faces[:, None, :], (faces.shape[0], 3, 3)).ravel()
    mass = sp.coo_matrix(
        (mass_blocks.ravel(), (rows, cols)), shape=(nv, nv)
    ).tocsr()
    stiff = sp.coo_matrix(
        (stiff_blocks.ravel(), (rows, cols)), shape=(nv, nv)
    ).tocsr()
    return mass, stiff


def inner_product_matrix(mesh, cache, c):
    """Representation matrix ``M + c K`` of the deformation inner product."""
    mass, stiff = assemble_p1_scalar(mesh, cache)
    return (mass + c * stiff).tocsr()
