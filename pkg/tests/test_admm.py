import numpy as np
import pytest

from normalprior import admm, prox, shapeopt
from normalprior.admm import (
    _phi_matrix,
    _phi_rhs,
    check_convergence,
    initial_state,
    labels_used,
    phi_solve,
    run,
    update_multipliers,
)
from normalprior.energy import LabelSet, ModelParams
from normalprior.errors import NonFiniteStateError
from normalprior.gen import axis_labels, gen_grid_cube, gen_fibonacci_labels
from normalprior.mesh import recompute_cache


def table3_params(**kw):
    base = dict(alpha=1.0, beta=1e-8, mu=1e-7, rho1=12.5, rho2=1.25,
                rho3=12.5, c_inner=0.3, cg_rtol_phi=1e-6)
    base.update(kw)
    return ModelParams(**base)


def test_phi_solve_decoupled_closed_form(tetra, rng):
    # with rho2 = 0 the system is diagonal: phi = w - tau - (alpha/rho3)|u|
    labels = gen_fibonacci_labels(2)
    cache = recompute_cache(tetra)
    alpha, rho3 = 0.9, 1.7
    state = initial_state(tetra, cache, labels)
    state.u = rng.standard_normal(state.u.shape)
    state.w = rng.standard_normal(state.w.shape)
    state.tau = rng.standard_normal(state.tau.shape)
    A = _phi_matrix(tetra, cache, 0.0, rho3)
    b = _phi_rhs(state, tetra, cache, alpha, 0.0, rho3)
    got = np.linalg.solve(A.toarray(), b)
    unorm = np.linalg.norm(state.u, axis=2)
    expected = state.w - state.tau - (alpha / rho3) * unorm
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_phi_solve_matches_dense_oracle(tetra, rng):
    labels = gen_fibonacci_labels(3)
    cache = recompute_cache(tetra)
    params = ModelParams(alpha=0.8, beta=0.1, rho1=1.0, rho2=0.9, rho3=1.3,
                         cg_rtol_phi=1e-12)
    state = initial_state(tetra, cache, labels)
    state.u = rng.standard_normal(state.u.shape)
    state.v = rng.standard_normal(state.v.shape)
    state.w = rng.standard_normal(state.w.shape)
    state.eta = rng.standard_normal(state.eta.shape)
    state.tau = rng.standard_normal(state.tau.shape)
    got = phi_solve(state, tetra, cache, params)
    A = _phi_matrix(tetra, cache, params.rho2, params.rho3).toarray()
    b = _phi_rhs(state, tetra, cache, params.alpha, params.rho2, params.rho3)
    ref = np.linalg.solve(A, b)
    np.testing.assert_allclose(got, ref, rtol=1e-8, atol=1e-10)


def test_phi_solve_constant_when_data_constant(tetra):
    # alpha = 0, v = eta = 0 and w - tau constant: the Laplacian part drops
    labels = gen_fibonacci_labels(2)
    cache = recompute_cache(tetra)
    params = ModelParams(alpha=0.0, beta=0.1, rho2=2.0, rho3=1.5,
                         cg_rtol_phi=1e-10)
    state = initial_state(tetra, cache, labels)
    state.w = np.full_like(state.w, 0.4)
    state.tau = np.full_like(state.tau, -0.1)
    got = phi_solve(state, tetra, cache, params)
    np.testing.assert_allclose(got, 0.5, rtol=1e-9)


def test_update_multipliers_examples(tetra):
    labels = LabelSet(np.eye(3))
    cache = recompute_cache(tetra)
    state = initial_state(tetra, cache, labels)

    # consistent splits leave the multipliers unchanged
    update_multipliers(state, tetra, cache, labels)
    np.testing.assert_allclose(state.lam, 0.0, atol=1e-15)
    np.testing.assert_allclose(state.eta, 0.0, atol=1e-15)
    np.testing.assert_allclose(state.tau, 0.0, atol=1e-15)

    # zero split: lambda accumulates n - g, k times over k iterations
    state.u[:] = 0.0
    for k in range(1, 4):
        update_multipliers(state, tetra, cache, labels)
        expected = k * (cache.face_normal[:, None, :]
                        - labels.vectors[None, :, :])
        np.testing.assert_allclose(state.lam, expected, rtol=1e-12)


def test_update_multipliers_paper_literal_mode(tetra):
    labels = LabelSet(np.eye(3))
    cache = recompute_cache(tetra)
    state = initial_state(tetra, cache, labels)
    update_multipliers(state, tetra, cache, labels, paper_literal=True)
    expected = cache.face_normal[:, None, :] - labels.vectors[None, :, :]
    np.testing.assert_allclose(state.lam, expected, atol=1e-15)


def test_check_convergence(tetra):
    labels = LabelSet(np.eye(3))
    cache = recompute_cache(tetra)
    a = initial_state(tetra, cache, labels)
    b = a.copy()
    ok, deltas = check_convergence(a, b, tol=1e-12)
    assert ok and max(deltas.values()) == 0.0

    b.positions = b.positions.copy()
    b.positions[0, 0] += 2e-6
    ok, deltas = check_convergence(a, b, tol=1e-6)
    assert not ok and deltas["positions"] == pytest.approx(2e-6)

    c = a.copy()
    for name in c.VARIABLES:
        getattr(c, name).flat[0] += 5e-7
    ok, _ = check_convergence(a, c, tol=1e-6)
    assert ok


def test_labels_used_examples():
    assert labels_used(np.tile([1.0, 0.0, 0.0], (5, 1))) == 1
    assert labels_used(np.eye(4)) == 4
    assert labels_used(np.array([[0.6, 0.4], [0.4, 0.6]])) == 2
    # ties break toward the lower index
    assert labels_used(np.full((3, 4), 0.25)) == 1


def test_run_update_order(monkeypatch, tetra):
    calls = []
    originals = {
        "u": prox.u_update, "v": prox.v_update, "w": prox.w_update,
        "phi": admm.phi_solve, "x": shapeopt.vertex_update,
        "mult": admm.update_multipliers,
    }
    monkeypatch.setattr(admm.prox, "u_update",
                        lambda *a, **k: calls.append("u") or originals["u"](*a, **k))
    monkeypatch.setattr(admm.prox, "v_update",
                        lambda *a, **k: calls.append("v") or originals["v"](*a, **k))
    monkeypatch.setattr(admm.prox, "w_update",
                        lambda *a, **k: calls.append("w") or originals["w"](*a, **k))
    monkeypatch.setattr(admm, "phi_solve",
                        lambda *a, **k: calls.append("phi") or originals["phi"](*a, **k))
    monkeypatch.setattr(admm.shapeopt, "vertex_update",
                        lambda *a, **k: calls.append("x") or originals["x"](*a, **k))
    monkeypatch.setattr(admm, "update_multipliers",
                        lambda *a, **k: calls.append("mult") or originals["mult"](*a, **k))
    labels = LabelSet(np.eye(3))
    params = table3_params(admm_max_iters=2, admm_tol=1e-14)
    run(tetra, labels, params)
    assert calls[:6] == ["u", "v", "w", "phi", "x", "mult"]
    assert calls[6:12] == ["u", "v", "w", "phi", "x", "mult"]


def test_run_zero_iterations(tetra):
    labels = LabelSet(np.eye(3))
    params = table3_params(admm_max_iters=0)
    before = tetra.positions.copy()
    result = run(tetra, labels, params)
    assert result.iterations == 0
    assert not result.converged
    np.testing.assert_array_equal(tetra.positions, before)


def test_run_pure_fidelity_keeps_data(tetra):
    # alpha = beta = mu = 0: the initial state is an exact fixed point
    labels = LabelSet(np.eye(3))
    params = ModelParams(alpha=0.0, beta=0.0, mu=0.0, rho1=1.0, rho2=1.0,
                         rho3=1.0, admm_tol=1e-10, admm_max_iters=50,
                         cg_rtol_phi=1e-10)
    x_data = tetra.positions.copy()
    result = run(tetra, labels, params)
    assert result.converged
    np.testing.assert_allclose(tetra.positions, x_data, atol=1e-12)


def test_run_cube_fixed_point():
    # aligned cube with axis labels: the scheme reaches its fixed point
    cube = gen_grid_cube(1, size=2.0)
    labels = axis_labels()
    params = table3_params(admm_tol=1e-9, admm_max_iters=800)
    result = run(cube, labels, params)
    assert result.converged
    last = result.metrics[-1]
    assert last.dx <= 1e-8
    assert last.r_u <= 1e-6
    assert last.r_v <= 1e-6
    assert last.r_w <= 1e-6
    assert labels_used(result.state.w) == 6


def test_run_metrics_are_deterministic():
    def one_run():
        cube = gen_grid_cube(1, size=2.0)
        labels = axis_labels()
        params = table3_params(admm_max_iters=10, admm_tol=1e-14)
        res = run(cube, labels, params)
        return [m.as_dict() for m in res.metrics], cube.positions.copy()

    m1, p1 = one_run()
    m2, p2 = one_run()
    assert m1 == m2
    np.testing.assert_array_equal(p1, p2)


def test_run_aborts_on_nonfinite(monkeypatch, tetra):
    labels = LabelSet(np.eye(3))
    params = table3_params(admm_max_iters=5)

    def bad_phi(*a, **k):
        out = phi_solve(*a, **k)
        out[0, 0] = np.inf
        return out

    monkeypatch.setattr(admm, "phi_solve", bad_phi)
    with pytest.raises(NonFiniteStateError):
        run(tetra, labels, params)


def test_lagrangian_objective_consistency_at_fixed_point():
    # with residuals <= eps, the Lagrangian equals the objective up to the
    # multiplier terms (scaled-dual constants) plus O(eps) cross terms
    cube = gen_grid_cube(1, size=2.0)
    labels = axis_labels()
    params = table3_params(admm_tol=1e-9, admm_max_iters=800)
    result = run(cube, labels, params)
    assert result.converged
    st = result.state
    cache = recompute_cache(cube)
    eps = max(result.metrics[-1].r_u, result.metrics[-1].r_v,
              result.metrics[-1].r_w)
    assert eps <= 1e-6

    area, length = cache.face_area, cache.edge_length
    dual_const = 0.5 * params.rho1 * (area * (st.lam ** 2).sum((1, 2))).sum()
    dual_const += 0.5 * params.rho2 * (length * (st.eta ** 2).sum(1)).sum()
    dual_const += 0.5 * params.rho3 * (area * (st.tau ** 2).sum(1)).sum()

    from normalprior.energy import augmented_lagrangian, objective_value

    lag = augmented_lagrangian(st, cube, cache, labels, params,
                               cube.positions)
    obj = objective_value(st, cube, cache, labels, params, cube.positions)
    # C bounds the linear residual couplings: alpha phi terms, beta terms
    # and the 2 lam . res style products
    C = (params.alpha * (area[:, None] * np.abs(st.phi)).sum()
         + params.beta * length.sum() * labels.count
         + params.rho1 * (area[:, None] * np.linalg.norm(st.lam, axis=2)
                          ).sum()
         + params.rho2 * (length[:, None] * np.abs(st.eta)).sum()
         + params.rho3 * (area[:, None] * np.abs(st.tau)).sum()
         + 1.0)
    assert abs(lag - obj - dual_const) <= C * eps


def test_run_accepts_initial_assignment_and_multipliers(tetra, rng):
    labels = LabelSet(np.eye(3))
    params = table3_params(admm_max_iters=3, admm_tol=1e-14)
    nf, ne, nl = tetra.n_faces, tetra.n_edges, labels.count
    phi0 = np.abs(rng.standard_normal((nf, nl)))
    phi0 /= phi0.sum(axis=1, keepdims=True)
    lam0 = 0.01 * rng.standard_normal((nf, nl, 3))
    eta0 = 0.01 * rng.standard_normal((ne, nl))
    tau0 = 0.01 * rng.standard_normal((nf, nl))
    res = run(tetra, labels, params, phi0=phi0, lam0=lam0, eta0=eta0,
              tau0=tau0)
    assert res.iterations == 3

    with pytest.raises(ValueError):
        run(tetra, labels, params, phi0=np.zeros((nf + 1, nl)))


def test_run_paper_literal_dual_differs(tetra):
    labels = LabelSet(np.eye(3))
    params = table3_params(admm_max_iters=4, admm_tol=1e-14)
    from normalprior import build_mesh

    literal_mesh = build_mesh(tetra.positions.copy(), tetra.faces.copy())
    standard = run(tetra, labels, params)
    literal = run(literal_mesh, labels, params, paper_literal_dual=True)
    # the printed lambda rule keeps accumulating n - g and cannot settle
    assert literal.metrics[-1].dlam > standard.metrics[-1].dlam
