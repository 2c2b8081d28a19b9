"""Globalized shape-Newton step for the vertex-update subproblem.

One step consists of: solving the Newton system with truncated CG
(preconditioned by the incomplete Cholesky factor of the deformation
inner-product matrix), vetting the direction against the Riesz gradient with
an angle condition, and an Armijo backtracking line search guarded against
mesh degeneration.
"""

from dataclasses import dataclass

import numpy as np

from . import sparse
from .energy import ShapeTerms
from .errors import LineSearchFailedError
from .mesh import recompute_cache, triangle_cross

NEWTON = "newton"
GRADIENT_FALLBACK = "gradient_fallback"


@dataclass
class StepReport:
    """Outcome of one globalized vertex-update step."""

    direction_kind: str
    step_size: float
    objective_before: float
    objective_after: float
    trials: int
    min_face_area_after: float
    cg_iterations: int = 0
    cg_termination: str = ""


def newton_direction(hessian, gradient, preconditioner=None, rtol=1e-2,
                     max_iters=200):
    """Approximate solution of ``H theta = -g`` by truncated CG.

    Returns the direction as an (V, 3) array together with the CG report;
    a negative-curvature exit returns the last safe iterate.
    """
    report = sparse.truncated_cg(
        hessian,
        -np.asarray(gradient).ravel(),
        rtol=rtol,
        max_iters=max_iters,
        preconditioner=preconditioner,
    )
    return report.x.reshape(-1, 3), report


def inner_norm(inner_matrix, field):
    """Norm of a (V, 3) deformation field in the M + cK inner product."""
    total = 0.0
    for k in range(3):
        col = np.ascontiguousarray(field[:, k])
        total += float(col @ (inner_matrix @ col))
    return np.sqrt(max(total, 0.0))


def riesz_gradient(gradient, inner_matrix, preconditioner=None, rtol=1e-2):
    """Solve ``(M + cK) d = -g`` coordinate-wise; the fallback direction."""
    d = np.empty_like(gradient)
    for k in range(3):
        rep = sparse.cg_solve(
            inner_matrix,
            -np.ascontiguousarray(gradient[:, k]),
            rtol=rtol,
            preconditioner=preconditioner,
        )
        d[:, k] = rep.x
    return d


def choose_direction(newton_dir, gradient, inner_matrix, riesz_dir=None,
                     kappa=1e-4):
    """Pick the Newton direction if it passes the angle test, else fall back.

    The test is ``theta^T (-g) >= kappa * |theta|_B * |d|_B`` with B the
    inner-product matrix and d the Riesz gradient direction; the left side
    equals the B-inner product of theta and d, so this bounds the cosine of
    their B-angle away from zero.  The fallback direction is solved from
    ``B d = -g`` if not supplied.
    """
    if riesz_dir is None:
        riesz_dir = riesz_gradient(gradient, inner_matrix)
    descent = -float((newton_dir * gradient).sum())
    bound = kappa * inner_norm(inner_matrix, newton_dir) * inner_norm(
        inner_matrix, riesz_dir
    )
    if descent > 0.0 and descent >= bound:
        return newton_dir, NEWTON
    return riesz_dir, GRADIENT_FALLBACK


def armijo_search(state, mesh, cache, terms, direction, gradient, params,
                  area_floor=None, direction_kind=NEWTON):
    """Backtracking line search on the augmented Lagrangian.

    Accepts the largest step ``t`` in 1, 1/2, 1/4, ... that satisfies the
    sufficient-decrease condition and keeps every face area above the
    degeneracy floor without flipping any face normal by more than 90
    degrees.  On success the positions are updated in place and a fresh
    cache is returned.

    Raises
    ------
    LineSearchFailedError
        If no admissible step exists; the report on the exception carries
        ``step_size = 0`` and the caller keeps the positions unchanged.
    """
    if area_floor is None:
        area_floor = params.area_guard_factor * float(cache.face_area.mean())
    value0 = terms.value(state.positions)
    slope = float((gradient * direction).sum())
    old_normal = cache.face_normal

    t = 1.0
    trials = 0
    if slope < 0.0:
        for _ in range(params.armijo_max_trials):
            trials += 1
            trial = state.positions + t * direction
            m = triangle_cross(trial, mesh.faces)
            two_area = np.linalg.norm(m, axis=1)
            min_area = 0.5 * float(two_area.min())
            if min_area >= area_floor:
                flipped = (m * old_normal).sum(axis=1) < 0.0
                if not flipped.any():
                    value = terms.value(trial)
                    if value <= value0 + params.armijo_c1 * t * slope:
                        state.positions[:] = trial
                        new_cache = recompute_cache(mesh)
                        return new_cache, StepReport(
                            direction_kind=direction_kind,
                            step_size=t,
                            objective_before=value0,
                            objective_after=value,
                            trials=trials,
                            min_face_area_after=new_cache.min_face_area,
                        )
            t *= params.armijo_shrink

    report = StepReport(
        direction_kind=direction_kind,
        step_size=0.0,
        objective_before=value0,
        objective_after=value0,
        trials=trials,
        min_face_area_after=cache.min_face_area,
    )
    raise LineSearchFailedError("no admissible Armijo step", report=report)


def vertex_update(state, mesh, cache, labels, params, x_data,
                  area_floor=None):
    """One globalized shape-Newton step on the vertex positions.

    Returns the refreshed cache and a :class:`StepReport`.  A failed line
    search is reported with ``step_size = 0`` and leaves the positions and
    cache unchanged.
    """
    terms = ShapeTerms(mesh, state, labels, params, x_data)
    gradient = terms.gradient(state.positions)
    hessian = terms.hessian(state.positions)

    inner = sparse.inner_product_matrix(mesh, cache, params.c_inner)
    scalar_pre = sparse.spd_preconditioner(inner)
    block_pre = sparse.BlockedPreconditioner(scalar_pre)

    newton_dir, cg_report = newton_direction(
        hessian,
        gradient,
        preconditioner=block_pre,
        rtol=params.newton_cg_rtol,
        max_iters=params.newton_cg_max_iters,
    )
    riesz_dir = riesz_gradient(
        gradient, inner, preconditioner=scalar_pre, rtol=params.newton_cg_rtol
    )
    direction, kind = choose_direction(
        newton_dir, gradient, inner, riesz_dir, params.descent_kappa
    )

    try:
        new_cache, report = armijo_search(
            state, mesh, cache, terms, direction, gradient, params,
            area_floor=area_floor, direction_kind=kind,
        )
    except LineSearchFailedError as err:
        new_cache, report = cache, err.report
    report.cg_iterations = cg_report.iterations
    report.cg_termination = cg_report.termination
    return new_cache, report
