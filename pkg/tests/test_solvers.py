import numpy as np
import pytest

from oracles import central_diff_grad, grid_global_min, model_objective_1d
from spfreg.linop import DiffOp1D, GradOperator2D, MatrixOperator
from spfreg.penalty import Partition, prox_compositional_conjugate
from spfreg.solvers import (
    DivergenceError,
    ProblemSpec,
    RegimeError,
    SolverParams,
    convexity_regime,
    default_params,
    grad_F,
    objective,
    rof_objective,
    smooth_part,
    solve,
    solve_dca,
    solve_pd,
    solve_pdhg,
    solve_rof,
)

ALGOS = ["rof", "pd", "dca", "pdhg"]


def scalar_spec(z, lam=1.0, alpha=1.5):
    return ProblemSpec(z=[z], lam=lam, operator=MatrixOperator([[1.0]]), alpha=alpha)


def tight(spec, algo, **kw):
    base = default_params(spec, algo)
    opts = dict(max_iter=20000, tol=1e-12, dca_outer_max=200, dca_inner_max=2000)
    opts.update(kw)
    return SolverParams(**{**base.__dict__, **opts})


def blocky_image(rng, n=32, eta=20.0):
    img = np.full((n, n), rng.uniform(40, 200))
    for _ in range(4):
        r0, c0 = rng.integers(0, n - 4, 2)
        h, w = rng.integers(4, n // 2, 2)
        img[r0:r0 + h, c0:c0 + w] = rng.uniform(20, 235)
    return img + eta * rng.standard_normal((n, n)), img


# --- problem setup ----------------------------------------------------------


def test_spec_defaults():
    spec = ProblemSpec.for_image(np.zeros((8, 8)), lam=2.0)
    nb = GradOperator2D(8).closed_form_norm_sq()
    assert spec.alpha == pytest.approx(1.5 * 2.0 * nb, rel=1e-6)
    assert spec.box == (0.0, 255.0)
    assert spec.partition.n_blocks == 64
    assert convexity_regime(spec) == "strictly-convex"


def test_spec_validation():
    with pytest.raises(ValueError):
        ProblemSpec(z=np.zeros(3), lam=0.0, operator=DiffOp1D(3))
    with pytest.raises(ValueError):
        ProblemSpec(z=np.zeros(3), lam=1.0, operator=DiffOp1D(4))
    with pytest.raises(ValueError):
        ProblemSpec(z=np.zeros(3), lam=1.0, operator=DiffOp1D(3), box=(1, 0))
    with pytest.raises(ValueError):
        ProblemSpec(z=np.zeros(3), lam=1.0, operator=DiffOp1D(3), partition=Partition.singletons(4))


def test_objective_examples():
    spec = scalar_spec(3.0)
    assert objective(spec, np.array([3.0])) == pytest.approx(0.75)
    assert objective(spec, np.array([0.0])) == pytest.approx(4.5)
    flat = ProblemSpec.for_image(np.full((4, 4), 9.0), lam=3.0)
    assert objective(flat, flat.z) == 0.0
    with pytest.raises(ValueError):
        objective(spec, np.zeros(2))


def test_objective_matches_dense_definition():
    rng = np.random.default_rng(0)
    z = rng.normal(0, 2, 6)
    spec = ProblemSpec.for_signal(z, lam=0.7, alpha=1.3)
    x = rng.normal(0, 2, 6)
    D = DiffOp1D(6).to_dense()
    assert objective(spec, x) == pytest.approx(model_objective_1d(x, z, 0.7, 1.3, D))
    assert rof_objective(spec, x) == pytest.approx(model_objective_1d(x, z, 0.7, None, D))


@pytest.mark.parametrize(
    "lam,alpha,want",
    [(1, 1.5, "strictly-convex"), (1, 1, "convex"), (1, 0.5, "nonconvex-possible")],
)
def test_convexity_regime_examples(lam, alpha, want):
    assert convexity_regime(lam=lam, alpha=alpha, norm_sq=1.0) == want


def test_default_params_examples():
    spec = ProblemSpec.for_image(np.zeros((16, 16)), lam=16.0)
    object.__setattr__(spec, "alpha", 192.0)
    spec.__dict__["norm_sq"] = 8.0  # pin the cached norm to the textbook value
    pd = default_params(spec, "pd")
    assert (pd.sigma, pd.rho, pd.max_iter, pd.tol) == (0.1, 1.0, 300, 1e-4)
    assert pd.tau == pytest.approx(0.99 / 1.3)
    pdhg = default_params(spec, "pdhg")
    assert pdhg.sigma == pytest.approx(1 / 96)
    assert pdhg.tau == pytest.approx(0.99 * 96 / 8)
    dca = default_params(spec, "dca")
    assert (dca.dca_outer_max, dca.dca_inner_max) == (10, 100)
    with pytest.raises(ValueError):
        default_params(spec, "admm")


# --- gradient ----------------------------------------------------------------


def test_grad_F_scalar_example():
    spec = ProblemSpec(z=[0.0], lam=1.0, operator=MatrixOperator([[1.0]]), alpha=1.5)
    assert grad_F(spec, np.array([3.0]))[0] == pytest.approx(2.0)
    flat = ProblemSpec.for_image(np.full((3, 3), 5.0), lam=1.0)
    assert np.all(grad_F(flat, flat.z) == 0)


def test_grad_F_finite_differences_2d():
    rng = np.random.default_rng(1)
    z = rng.uniform(0, 255, 16)
    spec = ProblemSpec.for_image(z, lam=10.0, n_side=4)
    x = rng.uniform(0, 255, 16)
    fd = central_diff_grad(lambda v: smooth_part(spec, v), x, h=1e-4)
    g = grad_F(spec, x)
    assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


# --- tiny problems with known answers ------------------------------------------


@pytest.mark.parametrize("algo", ["pd", "dca", "pdhg"])
def test_scalar_unbiased_and_thresholded(algo):
    for z, want in [(3.0, 3.0), (1.0, 0.0)]:
        spec = scalar_spec(z)
        rep = solve(spec, algo, tight(spec, algo))
        assert rep.x_final[0] == pytest.approx(want, abs=1e-3)


def test_rof_two_point_toy():
    spec = ProblemSpec.for_signal([0.0, 10.0], lam=1.0)
    rep = solve_rof(spec, tight(spec, "rof"))
    np.testing.assert_allclose(rep.x_final, [1.0, 9.0], atol=1e-3)


@pytest.mark.parametrize("algo", ALGOS)
def test_flat_data_is_fixed_point(algo):
    spec = ProblemSpec.for_image(np.full((16, 16), 80.0), lam=7.0)
    rep = solve(spec, algo)
    np.testing.assert_allclose(rep.x_final, spec.z)
    assert rep.converged


@pytest.mark.parametrize("algo", ALGOS)
def test_feasible_output(algo):
    rng = np.random.default_rng(2)
    z = rng.normal(128, 150, (16, 16))  # far outside [0, 255]
    rep = solve(ProblemSpec.for_image(z, lam=10.0), algo)
    assert rep.x_final.min() >= 0.0 and rep.x_final.max() <= 255.0


@pytest.mark.parametrize("d", [2, 3])
def test_small_global_optimum(d):
    rng = np.random.default_rng(d)
    z = rng.uniform(0, 1.2, d)
    lam = 0.15
    spec = ProblemSpec.for_signal(z, lam=lam)
    best = grid_global_min(z, lam, spec.alpha)
    for algo in ("pd", "dca", "pdhg"):
        rep = solve(spec, algo, tight(spec, algo))
        assert abs(objective(spec, rep.x_final) - best) <= 1e-4


# --- reports and invariants -------------------------------------------------


@pytest.mark.parametrize("algo", ALGOS)
def test_report_contract(algo):
    rng = np.random.default_rng(3)
    z, _ = blocky_image(rng)
    spec = ProblemSpec.for_image(z, lam=12.0)
    rep = solve(spec, algo)
    assert rep.algorithm == algo and rep.wall_seconds >= 0
    assert rep.converged
    assert rep.rel_change_history[-1] <= default_params(spec, algo).tol
    assert len(rep.rel_change_history) == rep.iterations


def test_dca_monotone_and_step_vanishing():
    rng = np.random.default_rng(4)
    for _ in range(5):
        z, _ = blocky_image(rng)
        spec = ProblemSpec.for_image(z, lam=float(rng.uniform(8, 20)))
        rep = solve_dca(spec)
        assert np.all(np.diff(rep.objective_history) <= 1e-8)
        assert rep.converged and rep.iterations < 10
        assert len(rep.objective_history) == rep.iterations + 1
        steps = rep.rel_change_history
        assert steps[-1] <= 1e-4 and steps[-1] < steps[0]


def test_dca_constant_data_one_step():
    spec = ProblemSpec.for_image(np.full((8, 8), 300.0), lam=3.0)
    rep = solve_dca(spec)
    assert rep.iterations == 1
    np.testing.assert_allclose(rep.x_final, 255.0)


def test_pd_fixed_point_residual():
    rng = np.random.default_rng(5)
    z, _ = blocky_image(rng)
    spec = ProblemSpec.for_image(z, lam=15.0)
    params = default_params(spec, "pd")
    rep = solve_pd(spec)
    x, y = rep.x_final, rep.extras["y"]
    op, lam = spec.operator, spec.lam
    # forward-backward map of the scaled problem evaluated at the final pair
    g = lam * prox_compositional_conjugate(op.apply(x) / spec.alpha, spec.partition)
    xt = spec.project(x - params.tau * (x - spec.z) + params.tau * op.apply_adjoint(g - y))
    yt = prox_compositional_conjugate(y + params.sigma * op.apply(2 * xt - x), spec.partition, radius=lam)
    res = np.sqrt(np.sum((xt - x) ** 2) + np.sum((yt - y) ** 2))
    assert res <= 10 * params.tol * np.linalg.norm(x)


def test_cross_solver_agreement_small():
    rng = np.random.default_rng(6)
    z, _ = blocky_image(rng, n=24)
    spec = ProblemSpec.for_image(z, lam=14.0)
    xs = {a: solve(spec, a).x_final for a in ("pd", "dca", "pdhg")}
    for a in xs:
        for b in xs:
            assert np.linalg.norm(xs[a] - xs[b]) <= 1e-2 * np.linalg.norm(xs[b])


def test_denoising_improves_psnr():
    from spfreg.imaging import psnr

    rng = np.random.default_rng(7)
    z, clean = blocky_image(rng, n=48)
    spec = ProblemSpec.for_image(z, lam=15.0)
    before = psnr(clean, z)
    for algo in ALGOS:
        out = solve(spec, algo).x_final.reshape(48, 48, order="F")
        assert psnr(clean, out) > before + 5


# --- parameter checks ------------------------------------------------------------


def test_pd_refuses_nonconvex_regime():
    spec = ProblemSpec.for_image(np.zeros((8, 8)), lam=5.0, alpha_factor=0.9)
    with pytest.raises(RegimeError, match="lam"):
        solve_pd(spec)
    edge = ProblemSpec.for_image(np.zeros((8, 8)), lam=5.0, alpha_factor=1.0)
    with pytest.raises(RegimeError):
        solve_pd(edge)


def test_step_size_checks():
    spec = ProblemSpec.for_image(np.zeros((8, 8)), lam=5.0)
    with pytest.raises(RegimeError):
        solve_rof(spec, SolverParams(sigma=0.1, tau=2.0))
    with pytest.raises(RegimeError):
        solve_pd(spec, SolverParams(sigma=0.1, tau=0.5, rho=1.5))
    with pytest.raises(RegimeError):
        solve_dca(spec, SolverParams(sigma=0.1, tau=0.5, dca_outer_max=0))
    good = default_params(spec, "pdhg")
    with pytest.raises(RegimeError, match="sigma"):
        solve_pdhg(spec, SolverParams(sigma=2 * good.sigma, tau=good.tau / 2))
    with pytest.raises(RegimeError):
        solve_pdhg(spec, SolverParams(sigma=good.sigma, tau=2 * good.tau))
    low = ProblemSpec.for_image(np.zeros((8, 8)), lam=5.0, alpha_factor=0.5)
    with pytest.raises(RegimeError):
        solve_pdhg(low)


def test_pdhg_allows_convex_boundary():
    z = np.random.default_rng(8).uniform(0, 255, (8, 8))
    spec = ProblemSpec.for_image(z, lam=5.0, alpha_factor=1.0)
    assert convexity_regime(spec) == "convex"
    assert np.all(np.isfinite(solve_pdhg(spec).x_final))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected():
    spec = ProblemSpec.for_signal([1e308, -1e308, 1e308], lam=1.0)
    with pytest.raises(DivergenceError, match="divergence detected"):
        solve_rof(spec)


def test_unknown_algorithm():
    with pytest.raises(ValueError, match="unknown algorithm"):
        solve(scalar_spec(1.0), "admm")


def test_callbacks_see_iterates():
    spec = ProblemSpec.for_signal(np.repeat([0.0, 3.0], 10), lam=0.5)
    seen = []
    solve_pdhg(spec, callback=lambda k, s: seen.append((k, sorted(s))))
    assert seen[0] == (1, ["prox_input", "theta", "u", "x"])
    seen.clear()
    solve_dca(spec, callback=lambda k, s: seen.append(k))
    assert seen[0] == 0
