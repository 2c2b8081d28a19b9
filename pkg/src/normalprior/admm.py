"""Outer loop of the splitting scheme.

Per iteration the variables are updated in the fixed order u, v, w, phi, X,
followed by the multiplier updates; the loop stops when the infinity-norm
change of every one of the eight iteration variables drops below the
tolerance, or at the iteration cap.
"""

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from . import prox, shapeopt
from .energy import (
    AdmmState,
    augmented_lagrangian,
    objective_value,
)
from .errors import NonFiniteStateError
from .mesh import recompute_cache
from .sparse import JacobiPreconditioner, cg_solve


@dataclass
class IterationMetrics:
    """Per-iteration diagnostics emitted by :func:`run`."""

    iteration: int
    lagrangian: float
    objective: float
    r_u: float
    r_v: float
    r_w: float
    dx: float
    dphi: float
    du: float
    dv: float
    dw: float
    dlam: float
    deta: float
    dtau: float
    labels_used: int
    min_face_area: float
    step_size: float
    direction_kind: str
    armijo_trials: int

    def as_dict(self):
        return asdict(self)


@dataclass
class RunResult:
    state: AdmmState
    metrics: list
    converged: bool
    iterations: int
    line_search_failures: int = 0


def initial_state(mesh, cache, labels, phi0=None, lam0=None, eta0=None,
                  tau0=None):
    """Default initialization: feasible splits, zero multipliers.

    phi starts uniform at 1/L unless given; u starts at the current
    normal-to-label differences and v at the phi jumps so that the penalty
    terms vanish initially.
    """
    nf, ne, nl = mesh.n_faces, mesh.n_edges, labels.count
    phi = np.full((nf, nl), 1.0 / nl) if phi0 is None else np.array(
        phi0, dtype=np.float64
    )
    if phi.shape != (nf, nl):
        raise ValueError("phi0 has wrong shape")
    lam = np.zeros((nf, nl, 3)) if lam0 is None else np.array(lam0, float)
    eta = np.zeros((ne, nl)) if eta0 is None else np.array(eta0, float)
    tau = np.zeros((nf, nl)) if tau0 is None else np.array(tau0, float)
    u = cache.face_normal[:, None, :] - labels.vectors[None, :, :]
    v = phi[mesh.edge_face_plus] - phi[mesh.edge_face_minus]
    return AdmmState(
        positions=mesh.positions,
        phi=phi,
        u=u.copy(),
        v=v,
        w=phi.copy(),
        lam=lam,
        eta=eta,
        tau=tau,
    )


def _phi_matrix(mesh, cache, rho2, rho3):
    """System matrix rho2 * (|e|-weighted face-graph Laplacian) + rho3 * diag(|T|)."""
    nf = mesh.n_faces
    ep = mesh.edge_face_plus
    em = mesh.edge_face_minus
    w = rho2 * cache.edge_length
    rows = np.concatenate([ep, em, ep, em, np.arange(nf)])
    cols = np.concatenate([ep, em, em, ep, np.arange(nf)])
    vals = np.concatenate([w, w, -w, -w, rho3 * cache.face_area])
    return sp.coo_matrix((vals, (rows, cols)), shape=(nf, nf)).tocsr()


def _phi_rhs(state, mesh, cache, alpha, rho2, rho3):
    area = cache.face_area[:, None]
    unorm = np.linalg.norm(state.u, axis=2)
    b = -alpha * area * unorm + rho3 * area * (state.w - state.tau)
    t = (rho2 * cache.edge_length)[:, None] * (state.v - state.eta)
    np.add.at(b, mesh.edge_face_plus, t)
    np.add.at(b, mesh.edge_face_minus, -t)
    return b


def phi_solve(state, mesh, cache, params):
    """Assignment update: one SPD system per label, solved by Jacobi-PCG.

    The matrix is label independent and couples faces across edges; each
    label's right-hand side collects the assignment cost of the current u,
    the jump data v - eta and the simplex proximity w - tau.
    """
    A = _phi_matrix(mesh, cache, params.rho2, params.rho3)
    b = _phi_rhs(state, mesh, cache, params.alpha, params.rho2, params.rho3)
    precond = JacobiPreconditioner(A)
    out = np.empty_like(state.phi)
    for ell in range(b.shape[1]):
        report = cg_solve(
            A,
            np.ascontiguousarray(b[:, ell]),
            rtol=params.cg_rtol_phi,
            max_iters=params.phi_cg_max_iters,
            preconditioner=precond,
        )
        out[:, ell] = report.x
    return out


def update_multipliers(state, mesh, cache, labels, paper_literal=False):
    """Dual ascent for the three constraint multipliers (in place).

    The standard scaled-dual update adds the constraint residuals.  With
    ``paper_literal`` the lambda update omits the -u term, reproducing the
    printed rule; this makes the lambda residual non-vanishing at feasible
    points and is available for comparison only.
    """
    residual = cache.face_normal[:, None, :] - labels.vectors[None, :, :]
    if not paper_literal:
        residual = residual - state.u
    state.lam += residual
    state.tau += state.phi - state.w
    jump = state.phi[mesh.edge_face_plus] - state.phi[mesh.edge_face_minus]
    state.eta += jump - state.v
    return state


def check_convergence(prev, curr, tol):
    """Infinity-norm change of each of the eight variables against ``tol``."""
    deltas = {}
    for name in AdmmState.VARIABLES:
        a = getattr(prev, name)
        b = getattr(curr, name)
        deltas[name] = float(np.abs(a - b).max()) if a.size else 0.0
    return all(d <= tol for d in deltas.values()), deltas


def labels_used(assignment):
    """Number of labels that win the argmax on at least one face."""
    return int(np.unique(np.argmax(assignment, axis=1)).size)


def constraint_residuals(state, mesh, cache, labels):
    """Max norms of the three split-constraint residuals."""
    res_u = cache.face_normal[:, None, :] - labels.vectors[None, :, :] - state.u
    r_u = float(np.linalg.norm(res_u, axis=2).max())
    jump = state.phi[mesh.edge_face_plus] - state.phi[mesh.edge_face_minus]
    r_v = float(np.abs(jump - state.v).max())
    r_w = float(np.abs(state.phi - state.w).max())
    return r_u, r_v, r_w


def run(mesh, labels, params, x_data=None, phi0=None, lam0=None, eta0=None,
        tau0=None, callback=None, paper_literal_dual=False):
    """Full splitting scheme on a mesh; returns the final state and metrics.

    Parameters
    ----------
    mesh : SurfaceMesh
        Input mesh; its positions are the initial iterate and are updated in
        place.
    labels : LabelSet
    params : ModelParams
    x_data : (V, 3) array, optional
        Data positions for the fidelity term; defaults to the initial
        positions of ``mesh``.
    phi0, lam0, eta0, tau0 : arrays, optional
        Initial assignment and multipliers (defaults: uniform, zeros).
    callback : callable, optional
        Invoked with each :class:`IterationMetrics`.
    paper_literal_dual : bool
        Use the printed multiplier rule for lambda (see
        :func:`update_multipliers`).

    Raises
    ------
    NonFiniteStateError
        If any iteration variable or metric becomes non-finite.
    """
    cache = recompute_cache(mesh)
    if x_data is None:
        x_data = mesh.positions.copy()
    else:
        x_data = np.array(x_data, dtype=np.float64)
    area_floor = params.area_guard_factor * float(cache.face_area.mean())
    state = initial_state(mesh, cache, labels, phi0, lam0, eta0, tau0)

    metrics = []
    converged = False
    failures = 0
    for it in range(params.admm_max_iters):
        prev = state.copy()

        state.u = prox.u_update(state, cache, labels, params)
        state.v = prox.v_update(state, mesh, params)
        state.w = prox.w_update(state, params)
        state.phi = phi_solve(state, mesh, cache, params)
        for name in ("u", "v", "w", "phi"):
            if not np.isfinite(getattr(state, name)).all():
                raise NonFiniteStateError(
                    f"variable {name} became non-finite at iteration {it}"
                )

        report = None
        for _ in range(params.newton_steps):
            cache, report = shapeopt.vertex_update(
                state, mesh, cache, labels, params, x_data,
                area_floor=area_floor,
            )
            if report.step_size == 0.0:
                failures += 1
                break

        update_multipliers(
            state, mesh, cache, labels, paper_literal=paper_literal_dual
        )

        r_u, r_v, r_w = constraint_residuals(state, mesh, cache, labels)
        done, deltas = check_convergence(prev, state, params.admm_tol)
        entry = IterationMetrics(
            iteration=it,
            lagrangian=augmented_lagrangian(
                state, mesh, cache, labels, params, x_data
            ),
            objective=objective_value(
                state, mesh, cache, labels, params, x_data
            ),
            r_u=r_u,
            r_v=r_v,
            r_w=r_w,
            dx=deltas["positions"],
            dphi=deltas["phi"],
            du=deltas["u"],
            dv=deltas["v"],
            dw=deltas["w"],
            dlam=deltas["lam"],
            deta=deltas["eta"],
            dtau=deltas["tau"],
            labels_used=labels_used(state.w),
            min_face_area=cache.min_face_area,
            step_size=report.step_size,
            direction_kind=report.direction_kind,
            armijo_trials=report.trials,
        )
        metrics.append(entry)
        if callback is not None:
            callback(entry)

        checked = [entry.lagrangian, entry.objective, r_u, r_v, r_w]
        checked += list(deltas.values())
        if not np.isfinite(checked).all():
            raise NonFiniteStateError(
                f"non-finite iteration state at iteration {it}"
            )
        if done:
            converged = True
            break

    return RunResult(
        state=state,
        metrics=metrics,
        converged=converged,
        iterations=len(metrics),
        line_search_failures=failures,
    )
