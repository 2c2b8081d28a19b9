"""Closed-form subproblem solvers used by the splitting scheme.

The central primitive is :func:`shrink`, the global minimizer of

    gamma * |u|_2 + 1/2 * |u - c|_2^2

over R^n, valid for either sign of ``gamma``.  The per-face, per-edge and
per-triangle update rules are thin vectorized wrappers around it plus the
Euclidean projection onto the probability simplex.
"""

from dataclasses import dataclass

import numpy as np

# Deterministic tie-breaking direction for shrink(gamma < 0, c = 0).
FALLBACK_DIR_SEED = np.array([1.0, 0.0, 0.0])


@dataclass
class ShrinkResult:
    """Minimizer of the group shrinkage problem.

    ``at_origin_tie`` is set in the ``c = 0``, ``gamma < 0`` case, where the
    minimizer set is the whole sphere of radius ``-gamma`` and the returned
    vector is an arbitrary-but-fixed representative.
    """

    minimizer: np.ndarray
    at_origin_tie: bool = False


def shrink(gamma, c, fallback_dir=None):
    """Global minimizer of ``gamma*|u| + 0.5*|u - c|^2`` for any gamma.

    Parameters
    ----------
    gamma : float
        Shrinkage coefficient; may be negative, in which case the threshold
        expands the input instead of shrinking it.
    c : (n,) array
    fallback_dir : (n,) unit array, optional
        Direction returned when ``c = 0`` and ``gamma < 0``.  Defaults to the
        first coordinate axis.

    Returns
    -------
    ShrinkResult
        The minimizer has norm ``max(0, |c| - gamma)`` in all cases.
    """
    c = np.asarray(c, dtype=np.float64)
    norm = float(np.linalg.norm(c))
    if norm > 0.0:
        scale = max(0.0, norm - gamma) / norm
        return ShrinkResult(scale * c)
    if gamma < 0.0:
        if fallback_dir is None:
            fallback_dir = FALLBACK_DIR_SEED[: c.shape[0]].copy()
        e = np.asarray(fallback_dir, dtype=np.float64)
        return ShrinkResult(-gamma * e, at_origin_tie=True)
    return ShrinkResult(np.zeros_like(c))


def shrink_rows(gamma, c):
    """Row-wise :func:`shrink` over the last axis of ``c``.

    ``gamma`` broadcasts against ``c.shape[:-1]``.  Rows with ``c = 0`` and
    negative gamma use the fixed fallback direction.
    """
    c = np.asarray(c, dtype=np.float64)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), c.shape[:-1])
    norm = np.linalg.norm(c, axis=-1)
    safe = np.where(norm > 0.0, norm, 1.0)
    scale = np.maximum(0.0, norm - gamma) / safe
    out = scale[..., None] * c
    tie = (norm == 0.0) & (gamma < 0.0)
    if tie.any():
        out[tie] = -gamma[tie, None] * FALLBACK_DIR_SEED[: c.shape[-1]]
    return out


def u_update(state, cache, labels, params):
    """Per-face, per-label group shrinkage of the normal-alignment split.

    Solves, independently for each face and label,

        min_u  alpha * phi * |u| + rho1/2 * |n - g - u + lambda|^2

    where the coefficient ``alpha * phi`` may be negative because the simplex
    constraint on the assignment is not enforced strictly at this point.

    Returns the new (F, L, 3) split variable.
    """
    g = labels.vectors
    c = cache.face_normal[:, None, :] - g[None, :, :] + state.lam
    gamma = (params.alpha / params.rho1) * state.phi
    return shrink_rows(gamma, c)


def v_update(state, mesh, params):
    """Scalar sign-preserving shrinkage of the assignment-jump split.

    Solves per edge and label

        min_v  beta * |v| + rho2/2 * (jump - v + eta)^2

    with jump = phi_plus - phi_minus.  Returns the new (E, L) array.
    """
    phi = state.phi
    jump = phi[mesh.edge_face_plus] - phi[mesh.edge_face_minus]
    c = jump + state.eta
    thresh = params.beta / params.rho2
    return np.sign(c) * np.maximum(np.abs(c) - thresh, 0.0)


def project_simplex(y):
    """Euclidean projection of ``y`` onto the probability simplex.

    Implements the sorting construction: the projection has the form
    ``max(0, y + shift)`` where the shift is determined from the sorted
    cumulative sums of ``y``.
    """
    y = np.asarray(y, dtype=np.float64)
    return project_simplex_rows(y[None, :])[0]


def project_simplex_rows(y):
    """Row-wise simplex projection of an (..., L) array."""
    y = np.asarray(y, dtype=np.float64)
    L = y.shape[-1]
    u = np.sort(y, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1)
    j = np.arange(1, L + 1)
    cond = u + (1.0 - css) / j > 0.0
    # rho = largest index satisfying the condition; cond is monotone.
    rho = L - 1 - np.argmax(cond[..., ::-1], axis=-1)
    shift = (1.0 - np.take_along_axis(css, rho[..., None], axis=-1)) / (
        rho[..., None] + 1
    )
    return np.maximum(y + shift, 0.0)


def w_update(state, params):
    """Project ``phi + tau`` face-wise onto the simplex; returns (F, L)."""
    return project_simplex_rows(state.phi + state.tau)
