"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criteria 5 and 6 assert a reconstruction-error ratio that is not attainable
with the isotropic per-vertex noise this package generates (even projecting
the noisy vertices exactly back onto the true surface leaves the tangential
noise, about 0.6 of the total); see notes in the repository docs.  They are
implemented as stated and report the measured values.
"""

import json
import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

import normalprior as npr
from normalprior import cli
from normalprior.energy import ModelParams, ShapeTerms
from normalprior.mesh import recompute_cache
from normalprior.prox import shrink, shrink_rows, project_simplex
from normalprior.sparse import (
    CONVERGED,
    IC0Preconditioner,
    cg_solve,
    ic0,
    inner_product_matrix,
    truncated_cg,
)

TABLE2 = dict(alpha=20.0, beta=0.001, mu=1e-5, rho1=1000.0, rho2=10.0,
              rho3=1000.0, c_inner=0.1)
TABLE3 = dict(alpha=1.0, beta=1e-8, mu=1e-7, rho1=12.5, rho2=1.25,
              rho3=12.5, c_inner=0.3)
# the printed inner tolerance 1e-2 destabilizes the outer loop (see docs);
# experiment runs use a safely tight value
PHI_RTOL = 1e-6


def report(index, ok, detail):
    print(f"\nACCEPTANCE {index:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def test_criterion_01_shrink_oracle(rng):
    t0 = time.time()
    total = 10_000
    per_dim = total // 3
    worst_gap = -np.inf
    for n in (1, 2, 3):
        count = per_dim if n < 3 else total - 2 * per_dim
        gamma = rng.uniform(-3.0, 3.0, size=count)
        c = rng.uniform(-3.0, 3.0, size=(count, n))
        u = shrink_rows(gamma, c)
        obj_u = gamma * np.linalg.norm(u, axis=1) + 0.5 * (
            ((u - c) ** 2).sum(axis=1)
        )
        cands = rng.uniform(-8.0, 8.0, size=(10_000, n))
        cand_norm = np.linalg.norm(cands, axis=1)
        cand_sq = (cands ** 2).sum(axis=1)
        for lo in range(0, count, 250):
            hi = min(lo + 250, count)
            dots = cands @ c[lo:hi].T
            vals = (
                gamma[lo:hi][None, :] * cand_norm[:, None]
                + 0.5 * cand_sq[:, None]
                - dots
                + 0.5 * (c[lo:hi] ** 2).sum(axis=1)[None, :]
            )
            gap = (obj_u[lo:hi] - vals.min(axis=0)).max()
            worst_gap = max(worst_gap, gap)

    # the three proof cases, directly
    cases_ok = True
    for _ in range(300):
        n = int(rng.integers(1, 4))
        c = rng.uniform(-3, 3, size=n)
        nc = np.linalg.norm(c)
        if nc == 0.0:
            continue
        g1 = nc * rng.uniform(1.0, 2.0)
        cases_ok &= np.allclose(shrink(g1, c).minimizer, 0.0)
        g2 = rng.uniform(-nc, nc * 0.999)
        t1 = 1.0 - g2 / nc
        cases_ok &= np.allclose(shrink(g2, c).minimizer, t1 * c, rtol=1e-12)
        g3 = -nc * rng.uniform(1.001, 3.0)
        t1 = 1.0 - g3 / nc
        cases_ok &= np.allclose(shrink(g3, c).minimizer, t1 * c, rtol=1e-12)
    elapsed = time.time() - t0
    ok = worst_gap <= 1e-8 and cases_ok and elapsed < 5.0
    assert report(1, ok, f"shrink oracle gap {worst_gap:.2e}, "
                         f"proof cases {cases_ok}, {elapsed:.2f}s")


def _bisection_simplex(y):
    lo = -y.max() - 1.0
    hi = -y.min() + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(y + mid, 0.0).sum() > 1.0:
            hi = mid
        else:
            lo = mid
    return np.maximum(y + 0.5 * (lo + hi), 0.0)


def test_criterion_02_simplex_projection(rng):
    t0 = time.time()
    worst = 0.0
    sums_ok = True
    for i in range(1000):
        L = int(rng.integers(2, 7))
        y = rng.uniform(-2.0, 2.0, size=L)
        got = project_simplex(y)
        ref = _bisection_simplex(y)
        worst = max(worst, float(np.linalg.norm(got - ref)))
        sums_ok &= abs(got.sum() - 1.0) <= 1e-12 and (got >= 0).all()
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and sums_ok and elapsed < 10.0
    assert report(2, ok, f"simplex projection max err {worst:.2e}, "
                         f"sums ok {sums_ok}, {elapsed:.2f}s")


def test_criterion_03_derivative_checks(rng):
    t0 = time.time()
    mesh = npr.gen_icosphere(2)
    labels = npr.gen_fibonacci_labels(5)
    params = ModelParams(alpha=0.9, beta=0.2, mu=0.03, rho1=1.4, rho2=0.8,
                         rho3=1.1)
    x_data = mesh.positions + 0.03 * rng.standard_normal(mesh.positions.shape)
    nf, ne, nl = mesh.n_faces, mesh.n_edges, labels.count
    state = npr.AdmmState(
        positions=mesh.positions,
        phi=0.4 * rng.standard_normal((nf, nl)),
        u=0.4 * rng.standard_normal((nf, nl, 3)),
        v=0.4 * rng.standard_normal((ne, nl)),
        w=0.4 * rng.standard_normal((nf, nl)),
        lam=0.4 * rng.standard_normal((nf, nl, 3)),
        eta=0.4 * rng.standard_normal((ne, nl)),
        tau=0.4 * rng.standard_normal((nf, nl)),
    )
    terms = ShapeTerms(mesh, state, labels, params, x_data)
    span = np.linalg.norm(mesh.positions.max(0) - mesh.positions.min(0))
    h = 1e-5 * span

    grad = terms.gradient(mesh.positions).ravel()
    flat = mesh.positions.ravel()
    fd = np.empty_like(grad)
    for i in range(flat.size):
        up = flat.copy(); up[i] += h
        dn = flat.copy(); dn[i] -= h
        fd[i] = (terms.value(up.reshape(-1, 3))
                 - terms.value(dn.reshape(-1, 3))) / (2 * h)
    grad_err = np.abs(grad - fd).max() / np.abs(fd).max()

    hess = terms.hessian(mesh.positions)
    hvp_err = 0.0
    for _ in range(5):
        d = rng.standard_normal(mesh.positions.shape)
        d /= np.abs(d).max()
        up = terms.gradient(mesh.positions + h * d).ravel()
        dn = terms.gradient(mesh.positions - h * d).ravel()
        ref = (up - dn) / (2 * h)
        hvp_err = max(hvp_err,
                      float(np.abs(hess @ d.ravel() - ref).max()
                            / np.abs(ref).max()))
    sym_err = float(abs(hess - hess.T).max() / abs(hess).max())
    elapsed = time.time() - t0
    ok = grad_err <= 1e-6 and hvp_err <= 1e-5 and sym_err <= 1e-10 \
        and elapsed < 60.0
    assert report(3, ok, f"grad FD err {grad_err:.2e}, HVP err {hvp_err:.2e},"
                         f" symmetry {sym_err:.2e}, {elapsed:.1f}s")


def test_criterion_04_cube_fixed_point():
    cube = npr.gen_grid_cube(2, size=2.0)
    labels = npr.axis_labels()
    params = ModelParams(**TABLE3, admm_tol=1e-9, admm_max_iters=1500,
                         cg_rtol_phi=PHI_RTOL)
    result = npr.run(cube, labels, params, x_data=cube.positions.copy())
    last = result.metrics[-1]
    simplex_ok = bool(
        np.abs(result.state.w.sum(axis=1) - 1.0).max() <= 1e-12
        and (result.state.w >= -1e-15).all()
    )
    ok = (result.converged and last.dx <= 1e-8 and last.r_u <= 1e-6
          and last.r_v <= 1e-6 and last.r_w <= 1e-6 and simplex_ok)
    assert report(4, ok,
                  f"converged {result.converged} in {result.iterations} its, "
                  f"final dx {last.dx:.2e}, residuals "
                  f"({last.r_u:.2e}, {last.r_v:.2e}, {last.r_w:.2e})")


def _assigned_normal_distance(mesh, w, labels):
    cache = recompute_cache(mesh)
    assigned = np.argmax(w, axis=1)
    return np.linalg.norm(
        cache.face_normal - labels.vectors[assigned], axis=1
    ), assigned


def test_criterion_05_cube_denoising():
    t0 = time.time()
    truth = npr.gen_grid_cube(6, size=2.0)
    assert truth.n_faces >= 400
    noisy = npr.add_noise(truth, npr.NoiseSpec(0.04, seed=11))
    f1_noisy = npr.fidelity_f1(noisy.positions, truth.positions)
    labels = npr.axis_labels()
    params = ModelParams(**TABLE3, admm_tol=1e-6, admm_max_iters=2000,
                         cg_rtol_phi=PHI_RTOL)
    result = npr.run(noisy, labels, params)
    f1_final = npr.fidelity_f1(noisy.positions, truth.positions)
    ratio = f1_final / f1_noisy
    dist, _ = _assigned_normal_distance(noisy, result.state.w, labels)
    aligned = float((dist <= 0.05).mean())
    elapsed = time.time() - t0
    ok = ratio <= 0.3 and aligned >= 0.95 and elapsed < 600.0
    report(5, ok, f"F1 ratio {ratio:.3f} (need <= 0.3), aligned "
                  f"{aligned * 100:.1f}% (need >= 95%), {elapsed:.0f}s")
    assert aligned >= 0.95
    assert elapsed < 600.0
    # Unattainable under isotropic vertex noise: projecting the noisy
    # vertices exactly onto the true surface already leaves ~0.6 of the
    # noise energy (tangential components), bounding any shape-driven
    # method above the required 0.3.  Kept as stated; see docs.
    assert ratio <= 0.3


def test_criterion_06_skyline():
    t0 = time.time()
    truth, _ = npr.gen_skyline(seed=7)
    assert 5500 <= truth.n_faces <= 7000
    noisy = npr.add_noise(truth, npr.NoiseSpec(0.04, seed=13))
    f1_noisy = npr.fidelity_f1(noisy.positions, truth.positions)
    labels = npr.axis_labels()
    params = ModelParams(**TABLE3, admm_tol=1e-6, admm_max_iters=3000,
                         cg_rtol_phi=PHI_RTOL)
    result = npr.run(noisy, labels, params)
    ratio = npr.fidelity_f1(noisy.positions, truth.positions) / f1_noisy
    elapsed = time.time() - t0
    ok = ratio <= 0.35 and elapsed < 1800.0
    report(6, ok, f"F1 ratio {ratio:.3f} (need <= 0.35), "
                  f"{result.iterations} its, {elapsed:.0f}s")
    assert elapsed < 1800.0
    # Same structural floor as criterion 5; kept as stated, see docs.
    assert ratio <= 0.35


def _regions_connected(mesh, assigned):
    for ell in np.unique(assigned):
        sel = np.flatnonzero(assigned == ell)
        remap = -np.ones(mesh.n_faces, dtype=int)
        remap[sel] = np.arange(sel.size)
        ep, em = mesh.edge_face_plus, mesh.edge_face_minus
        mask = (assigned[ep] == ell) & (assigned[em] == ell)
        graph = sp.coo_matrix(
            (np.ones(mask.sum()), (remap[ep[mask]], remap[em[mask]])),
            shape=(sel.size, sel.size),
        )
        pieces, _ = csgraph.connected_components(graph, directed=False)
        if pieces != 1:
            return False
    return True


def test_criterion_07_platonic_deformation():
    t0 = time.time()
    sphere = npr.gen_icosphere(3)
    assert sphere.n_faces == 1280
    labels = npr.gen_platonic_labels("tetrahedron")
    params = ModelParams(**TABLE2, admm_tol=1e-6, admm_max_iters=5000,
                         cg_rtol_phi=PHI_RTOL)
    result = npr.run(sphere, labels, params)
    dist, assigned = _assigned_normal_distance(sphere, result.state.w, labels)
    connected = _regions_connected(sphere, assigned)
    used = npr.labels_used(result.state.w)
    elapsed = time.time() - t0
    ok = (result.iterations <= 5000 and dist.max() <= 0.05 and used == 4
          and connected and elapsed < 1800.0)
    assert report(7, ok,
                  f"{result.iterations} its, max normal dist {dist.max():.2e}"
                  f" (need <= 0.05), labels used {used} (need 4), "
                  f"connected {connected}, {elapsed:.0f}s")


def test_criterion_08_sphere_label_economy():
    t0 = time.time()
    labels = npr.gen_fibonacci_labels(20)
    used = []
    for beta, rho in ((0.001, 2.0), (0.01, 2.0), (0.1, 10.0)):
        sphere = npr.gen_icosphere(3)
        noisy = npr.add_noise(sphere, npr.NoiseSpec(0.01, seed=5))
        params = ModelParams(alpha=1.0, beta=beta, mu=1e-6, rho1=rho,
                             rho2=rho, rho3=rho, c_inner=0.1, admm_tol=1e-6,
                             admm_max_iters=1500, cg_rtol_phi=PHI_RTOL)
        result = npr.run(noisy, labels, params)
        used.append(npr.labels_used(result.state.w))
    elapsed = time.time() - t0
    monotone = used[0] >= used[1] >= used[2]
    ok = monotone and used[2] <= 16 and elapsed < 2700.0
    assert report(8, ok, f"labels used {used} (non-increasing, last <= 16), "
                         f"{elapsed:.0f}s")


def test_criterion_09_solver_suite(rng):
    mesh = npr.gen_icosphere(3)
    cache = recompute_cache(mesh)
    A = inner_product_matrix(mesh, cache, 0.1)
    b = np.cos(0.37 * np.arange(A.shape[0]))
    plain = cg_solve(A, b, rtol=1e-8)
    pre = IC0Preconditioner(ic0(A))
    pcg = cg_solve(A, b, rtol=1e-8, preconditioner=pre)
    faster = (pcg.termination == CONVERGED
              and pcg.iterations < plain.iterations)

    descent = True
    for _ in range(50):
        n = int(rng.integers(2, 30))
        diag = rng.uniform(-2.0, 2.0, size=n)
        diag[rng.integers(0, n)] = -1.0  # force indefiniteness
        M = sp.diags(diag).tocsr()
        bb = rng.standard_normal(n)
        rep = truncated_cg(M, bb, rtol=1e-10)
        descent &= float(rep.x @ bb) >= -1e-12
    ok = faster and descent
    assert report(9, ok, f"PCG {pcg.iterations} its < CG {plain.iterations} "
                         f"its: {faster}; truncated CG descent: {descent}")


def test_criterion_10_determinism(tmp_path):
    base = tmp_path / "in.obj"
    cube = npr.gen_grid_cube(2, size=2.0)
    from normalprior import fileio

    fileio.write_mesh(base, cube)

    def one(tag):
        out = tmp_path / f"{tag}.obj"
        args = [
            "denoise", "--input", str(base), "--output", str(out),
            "--labels", "axes", "--alpha", "1.0", "--beta", "1e-8",
            "--mu", "1e-7", "--rho1", "12.5", "--rho2", "1.25",
            "--rho3", "12.5", "--c-inner", "0.3", "--tol", "1e-8",
            "--max-iters", "60", "--cg-rtol-phi", "1e-6",
            "--noise-factor", "0.02", "--seed", "21",
        ]
        assert cli.main(args) == 0
        return (out.read_text(),
                (tmp_path / f"{tag}.obj.labels.csv").read_text(),
                (tmp_path / f"{tag}.obj.metrics.ndjson").read_text())

    a = one("a")
    b = one("b")
    ok = a == b
    rows = a[2].strip().splitlines()
    ok = ok and len(rows) == 60 and json.loads(rows[0])["iteration"] == 0
    assert report(10, ok, f"byte-identical outputs across reruns: {a == b}")
