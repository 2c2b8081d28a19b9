"""Evaluation and exact vertex-wise derivatives of the augmented Lagrangian.

With the split variables, multipliers and the assignment held fixed, every
term of the augmented Lagrangian depends on the vertex positions through the
face areas, the unnormalized face cross products, the edge lengths and the
positions themselves:

* the alignment, assignment-proximity and area-weighted penalty terms are
  ``k_area * area + k_cross . m`` per face, where ``m = (b-a) x (c-a)`` and
  the identity ``area * n = m / 2`` eliminates the unit normal;
* the jump penalty and TV terms are ``k_edge * length`` per edge;
* the data fidelity is a plain vertex quadratic and the mesh quality term is
  ``mu / area`` per face.

Gradients and Hessians therefore reduce to three primitive differentials
(area, scalar-times-cross-product, edge length) that are assembled per
element.  Degrees of freedom are interleaved: dof ``3 v + k`` is coordinate
``k`` of vertex ``v``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateFaceError


@dataclass(frozen=True)
class ModelParams:
    """Model weights, augmentation parameters and solver knobs."""

    alpha: float = 1.0
    beta: float = 0.0
    mu: float = 0.0
    rho1: float = 1.0
    rho2: float = 1.0
    rho3: float = 1.0
    c_inner: float = 0.1
    admm_tol: float = 1e-6
    admm_max_iters: int = 5000
    # tighter than the nominal 1e-2 inner tolerance: solving the assignment
    # systems that loosely feeds a growing oscillation back through the
    # multipliers (see README, "Inner tolerances")
    cg_rtol_phi: float = 1e-6
    phi_cg_max_iters: int = 1000
    newton_cg_rtol: float = 1e-2
    newton_cg_max_iters: int = 200
    newton_steps: int = 1
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_max_trials: int = 30
    descent_kappa: float = 1e-4
    area_guard_factor: float = 1e-10

    def __post_init__(self):
        for name in ("alpha", "beta", "mu"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and nonnegative")
        for name in ("rho1", "rho2", "rho3", "c_inner"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.admm_tol <= 0.0:
            raise ValueError("admm_tol must be positive")
        if self.admm_max_iters < 0:
            raise ValueError("admm_max_iters must be nonnegative")


class LabelSet:
    """Set of preferred unit normal vectors."""

    def __init__(self, vectors):
        vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] != 3 or vectors.shape[0] == 0:
            raise ValueError("labels must be an (L, 3) array with L >= 1")
        norms = np.linalg.norm(vectors, axis=1)
        if np.abs(norms - 1.0).max() > 1e-12:
            raise ValueError("label vectors must have unit length")
        self.vectors = vectors

    @property
    def count(self):
        return self.vectors.shape[0]

    def __len__(self):
        return self.vectors.shape[0]


@dataclass
class AdmmState:
    """All eight iteration variables of the splitting scheme.

    positions : (V, 3)   vertex coordinates
    phi       : (F, L)   assignment function (simplex constraint relaxed)
    u         : (F, L, 3) normal-alignment split
    v         : (E, L)   assignment-jump split
    w         : (F, L)   simplex-constrained copy of phi
    lam       : (F, L, 3) multiplier for the u-constraint
    eta       : (E, L)   multiplier for the v-constraint
    tau       : (F, L)   multiplier for the w-constraint
    """

    positions: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    lam: np.ndarray
    eta: np.ndarray
    tau: np.ndarray

    VARIABLES = ("positions", "phi", "u", "v", "w", "lam", "eta", "tau")

    def copy(self):
        return AdmmState(
            **{name: getattr(self, name).copy() for name in self.VARIABLES}
        )


def fidelity_f1(positions, x_data):
    """Sum of squared vertex deviations from the data positions."""
    d = positions - x_data
    return float((d * d).sum())


def fidelity_f2(cache):
    """Sum of reciprocal face areas (mesh quality term)."""
    if (cache.face_area <= 0.0).any():
        raise DegenerateFaceError("zero-area face in mesh quality term")
    return float((1.0 / cache.face_area).sum())


def objective_value(state, mesh, cache, labels, params, x_data):
    """Value of the un-split model objective at the current assignment."""
    g = labels.vectors
    dist = np.linalg.norm(
        cache.face_normal[:, None, :] - g[None, :, :], axis=2
    )
    assign = float((cache.face_area * (state.phi * dist).sum(axis=1)).sum())
    jump = state.phi[mesh.edge_face_plus] - state.phi[mesh.edge_face_minus]
    tv = float((cache.edge_length * np.abs(jump).sum(axis=1)).sum())
    value = fidelity_f1(state.positions, x_data) + params.alpha * assign
    value += params.beta * tv
    if params.mu != 0.0:
        value += params.mu * fidelity_f2(cache)
    return value


def augmented_lagrangian(state, mesh, cache, labels, params, x_data):
    """Value of the augmented Lagrangian; the cache must match positions."""
    g = labels.vectors
    area = cache.face_area
    length = cache.edge_length
    n = cache.face_normal

    unorm = np.linalg.norm(state.u, axis=2)
    value = fidelity_f1(state.positions, x_data)
    if params.mu != 0.0:
        value += params.mu * fidelity_f2(cache)
    value += params.alpha * float((area * (state.phi * unorm).sum(axis=1)).sum())
    value += params.beta * float((length * np.abs(state.v).sum(axis=1)).sum())

    res_u = n[:, None, :] - g[None, :, :] - state.u + state.lam
    value += 0.5 * params.rho1 * float(
        (area * (res_u * res_u).sum(axis=(1, 2))).sum()
    )
    jump = state.phi[mesh.edge_face_plus] - state.phi[mesh.edge_face_minus]
    res_v = jump - state.v + state.eta
    value += 0.5 * params.rho2 * float((length * (res_v * res_v).sum(axis=1)).sum())
    res_w = state.phi - state.w + state.tau
    value += 0.5 * params.rho3 * float((area * (res_w * res_w).sum(axis=1)).sum())
    return value


def _skew(x):
    """Cross-product matrices, shape (..., 3, 3), with skew(x) @ y = x x y."""
    out = np.zeros(x.shape[:-1] + (3, 3))
    x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
    out[..., 0, 1] = -x2
    out[..., 0, 2] = x1
    out[..., 1, 0] = x2
    out[..., 1, 2] = -x0
    out[..., 2, 0] = -x1
    out[..., 2, 1] = x0
    return out


def _cross_hessian(h):
    """Hessian of (a, b, c) -> h . ((b-a) x (c-a)), shape (..., 9, 9)."""
    S = _skew(h)
    out = np.zeros(h.shape[:-1] + (9, 9))
    out[..., 0:3, 3:6] = -S
    out[..., 0:3, 6:9] = S
    out[..., 3:6, 0:3] = S
    out[..., 3:6, 6:9] = -S
    out[..., 6:9, 0:3] = -S
    out[..., 6:9, 3:6] = S
    return out


class ShapeTerms:
    """Augmented Lagrangian as a function of the vertex positions only.

    Precomputes the per-face coefficients of the area and cross-product
    terms and the per-edge coefficients of the length term from the frozen
    iteration variables, so that repeated evaluations (line search trials)
    and the derivative assembly share one code path.
    """

    def __init__(self, mesh, state, labels, params, x_data):
        g = labels.vectors
        u = state.u
        unorm = np.linalg.norm(u, axis=2)
        d = g[None, :, :] + u - state.lam

        k_area = params.alpha * (state.phi * unorm).sum(axis=1)
        k_area = k_area + 0.5 * params.rho1 * (
            labels.count + np.einsum("flk,flk->f", d, d)
        )
        res_w = state.phi - state.w + state.tau
        k_area = k_area + 0.5 * params.rho3 * (res_w * res_w).sum(axis=1)

        jump = state.phi[mesh.edge_face_plus] - state.phi[mesh.edge_face_minus]
        res_v = jump - state.v + state.eta
        k_edge = params.beta * np.abs(state.v).sum(axis=1)
        k_edge = k_edge + 0.5 * params.rho2 * (res_v * res_v).sum(axis=1)

        self.mesh = mesh
        self.k_area = k_area
        self.k_cross = -0.5 * params.rho1 * d.sum(axis=1)
        self.k_edge = k_edge
        self.mu = params.mu
        self.x_data = x_data

    # -- geometry helpers ------------------------------------------------

    def _face_geometry(self, positions):
        faces = self.mesh.faces
        a = positions[faces[:, 0]]
        b = positions[faces[:, 1]]
        c = positions[faces[:, 2]]
        m = np.cross(b - a, c - a)
        two_area = np.linalg.norm(m, axis=1)
        if (two_area <= 0.0).any():
            raise DegenerateFaceError("zero-area face in shape derivative")
        return a, b, c, m, two_area

    def _edge_geometry(self, positions):
        ev = self.mesh.edge_vertices
        d = positions[ev[:, 0]] - positions[ev[:, 1]]
        length = np.linalg.norm(d, axis=1)
        if (length <= 0.0).any():
            raise DegenerateFaceError("zero-length edge in shape derivative")
        return d, length

    def value(self, positions):
        _, _, _, m, two_area = self._face_geometry(positions)
        area = 0.5 * two_area
        _, length = self._edge_geometry(positions)
        v = fidelity_f1(positions, self.x_data)
        v += float((self.k_area * area).sum())
        v += float((self.k_cross * m).sum())
        if self.mu != 0.0:
            v += self.mu * float((1.0 / area).sum())
        v += float((self.k_edge * length).sum())
        return v

    def _face_dofs(self):
        faces = self.mesh.faces
        return (3 * faces[:, [0, 0, 0, 1, 1, 1, 2, 2, 2]]) + np.tile(
            np.arange(3), 3
        )

    def _edge_dofs(self):
        ev = self.mesh.edge_vertices
        return (3 * ev[:, [0, 0, 0, 1, 1, 1]]) + np.tile(np.arange(3), 2)

    def gradient(self, positions):
        """Exact gradient, returned as an (V, 3) array."""
        a, b, c, m, two_area = self._face_geometry(positions)
        area = 0.5 * two_area
        n = m / two_area[:, None]
        cb = c - b
        ac = a - c
        ba = b - a

        grad_area = 0.5 * np.concatenate(
            [np.cross(n, cb), np.cross(n, ac), np.cross(n, ba)], axis=1
        )
        km = self.k_cross
        grad_cross = np.concatenate(
            [np.cross(km, cb), np.cross(km, ac), np.cross(km, ba)], axis=1
        )
        coef = self.k_area
        if self.mu != 0.0:
            coef = coef - self.mu / (area * area)
        face_grad = coef[:, None] * grad_area + grad_cross

        d, length = self._edge_geometry(positions)
        dh = d / length[:, None]
        edge_grad = np.concatenate([dh, -dh], axis=1) * self.k_edge[:, None]

        ndofs = 3 * positions.shape[0]
        out = np.bincount(
            self._face_dofs().ravel(), weights=face_grad.ravel(), minlength=ndofs
        )
        out += np.bincount(
            self._edge_dofs().ravel(), weights=edge_grad.ravel(), minlength=ndofs
        )
        out += 2.0 * (positions - self.x_data).ravel()
        return out.reshape(-1, 3)

    def hessian(self, positions):
        """Exact second derivative as a sparse (3V, 3V) matrix."""
        a, b, c, m, two_area = self._face_geometry(positions)
        area = 0.5 * two_area
        n = m / two_area[:, None]
        cb = c - b
        ac = a - c
        ba = b - a

        J = np.concatenate([_skew(cb), _skew(ac), _skew(ba)], axis=2)  # (F,3,9)
        P = np.eye(3)[None, :, :] - n[:, :, None] * n[:, None, :]
        JPJ = np.transpose(J, (0, 2, 1)) @ (P @ J)
        hess_area = 0.5 * _cross_hessian(n) + JPJ / (2.0 * two_area)[:, None, None]

        coef = self.k_area
        if self.mu != 0.0:
            coef = coef - self.mu / (area * area)
        face_h = coef[:, None, None] * hess_area + _cross_hessian(self.k_cross)
        if self.mu != 0.0:
            grad_area = 0.5 * np.concatenate(
                [np.cross(n, cb), np.cross(n, ac), np.cross(n, ba)], axis=1
            )
            face_h += (2.0 * self.mu / area**3)[:, None, None] * (
                grad_area[:, :, None] * grad_area[:, None, :]
            )

        d, length = self._edge_geometry(positions)
        dh = d / length[:, None]
        P2 = np.eye(3)[None, :, :] - dh[:, :, None] * dh[:, None, :]
        edge_h = np.empty((length.shape[0], 6, 6))
        edge_h[:, 0:3, 0:3] = P2
        edge_h[:, 0:3, 3:6] = -P2
        edge_h[:, 3:6, 0:3] = -P2
        edge_h[:, 3:6, 3:6] = P2
        edge_h *= (self.k_edge / length)[:, None, None]

        ndofs = 3 * positions.shape[0]
        fd = self._face_dofs()
        ed = self._edge_dofs()
        rows = [
            np.broadcast_to(fd[:, :, None], face_h.shape).ravel(),
            np.broadcast_to(ed[:, :, None], edge_h.shape).ravel(),
            np.arange(ndofs),
        ]
        cols = [
            np.broadcast_to(fd[:, None, :], face_h.shape).ravel(),
            np.broadcast_to(ed[:, None, :], edge_h.shape).ravel(),
            np.arange(ndofs),
        ]
        data = [face_h.ravel(), edge_h.ravel(), np.full(ndofs, 2.0)]
        return sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(ndofs, ndofs),
        ).tocsr()


def shape_gradient(state, mesh, cache, labels, params, x_data):
    """Gradient of the augmented Lagrangian in the vertex coordinates."""
    terms = ShapeTerms(mesh, state, labels, params, x_data)
    return terms.gradient(state.positions)


def shape_hessian(state, mesh, cache, labels, params, x_data):
    """Second derivative of the augmented Lagrangian, sparse (3V, 3V)."""
    terms = ShapeTerms(mesh, state, labels, params, x_data)
    return terms.hessian(state.positions)
