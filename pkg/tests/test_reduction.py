import numpy as np
import pytest

from nestedhyp import datasets, group, lorentz, nested, optim, reduction
from nestedhyp.errors import DimensionError, InputError

FAST = reduction.ReductionConfig(restarts=1)


def planted(rng, n=2, count=50, r=None):
    level = nested.NestingLevel(group.random_lorentz(n, rng),
                                float(rng.normal()) if r is None else r)
    z = lorentz.sample_wrapped_normal(lorentz.origin(n - 1), 1.0, count, rng)
    return level, nested.embed(level, z)


# ---- nested-hyperboloid fitting ---------------------------------------------

def test_identity_nested_data_is_exact(rng):
    z = lorentz.sample_wrapped_normal(lorentz.origin(2), 1.0, 40, rng)
    X = nested.stack_embed(nested.NestingStack.identity(4, 2), z)
    res = reduction.fit_nh(X, 2, FAST)
    assert res.mean_squared_error < 1e-8


def test_planted_recovery_l2_to_l1(rng):
    _, X = planted(rng)
    res = reduction.fit_nh(X, 1, reduction.ReductionConfig(restarts=3))
    assert res.mean_squared_error < 1e-6


def test_level_loss_is_reconstruction_loss(rng):
    level = nested.NestingLevel(group.random_lorentz(3, rng), 0.4)
    X = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 30, rng)
    assert reduction.level_loss(X, level.normal, level.r) == pytest.approx(
        nested.reconstruction_loss(level, X), rel=1e-9)


def test_level_gradient_vs_fd(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 20, rng)
    obj, grad = reduction._level_objective(X)
    params = reduction._level_params(group.random_rotation(3, rng), 0.3,
                                     group.random_rotation(3, rng), -0.2)
    assert optim.fd_check(obj, params, grad, tol=1e-5).passed


def test_stack_gradient_vs_fd(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 25, rng)
    stack = nested.NestingStack((nested.NestingLevel(group.random_lorentz(4, rng), 0.2),
                                 nested.NestingLevel(group.random_lorentz(3, rng), -0.3)))
    obj, grad = reduction._stack_objective(X)
    params = reduction._stack_params(stack)
    assert obj([p.value for p in params]) == pytest.approx(nested.reconstruction_loss(stack, X))
    assert optim.fd_check(obj, params, grad, tol=1e-5).passed


def test_fit_never_worse_than_identity(rng):
    X = lorentz.sample_wrapped_normal(lorentz.lift([0.5, 0.0, -0.3, 0.2]), 1.0, 40, rng)
    res = reduction.fit_nh(X, 2, FAST)
    ident = nested.reconstruction_loss(nested.NestingStack.identity(4, 2), X)
    assert res.mean_squared_error <= ident + 1e-12


def test_fit_not_worse_than_tpca(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(5), 1.2, 60, rng)
    nh = reduction.fit_nh(X, 2, FAST)
    tp = reduction.fit_tangent_pca(X, 2)
    assert nh.mean_squared_error <= tp.mean_squared_error + 1e-12


def test_fit_isometry_equivariant(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 40, rng)
    A = group.random_lorentz(3, rng)
    # run to convergence so both fits reach the same (isometry-invariant) minimum
    tight = optim.OptimizerConfig(max_iter=500, grad_tol=1e-8)
    cfg = reduction.ReductionConfig(restarts=1, optimizer=tight, joint=False)
    a = reduction.fit_nh(X, 2, cfg).mean_squared_error
    b = reduction.fit_nh(X @ A.T, 2, cfg).mean_squared_error
    assert b == pytest.approx(a, rel=1e-3)


def test_offset_curve_beats_tpca():
    X = datasets.toy_offset_curve()
    nh = reduction.fit_nh(X, 1)
    tp = reduction.fit_tangent_pca(X, 1)
    assert nh.mean_squared_error <= 0.25 * tp.mean_squared_error


def test_result_mse_consistent(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 30, rng)
    res = reduction.fit_nh(X, 1, FAST)
    assert res.mean_squared_error == pytest.approx(float(np.mean(res.errors**2)), abs=1e-12)
    assert res.mean_squared_error == pytest.approx(nested.reconstruction_loss(res.model, X), abs=1e-12)


def test_fit_input_errors(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 10, rng)
    with pytest.raises(DimensionError):
        reduction.fit_nh(X, 3)
    with pytest.raises(DimensionError):
        reduction.fit_nh(X, 0)
    with pytest.raises(InputError):
        reduction.fit_nh(X[:1], 1)
    with pytest.raises(InputError):
        reduction.fit("pga", X, 1)


# ---- tangent PCA -------------------------------------------------------------

def test_tpca_exact_on_geodesic(rng):
    mu = lorentz.lift([0.4, -0.2, 0.7])
    u = lorentz.project_tangent(mu, rng.standard_normal(4))
    u /= lorentz.lorentz_magnitude(u)
    X = lorentz.exp_map(mu, np.linspace(-2, 2, 21)[:, None] * u)
    res = reduction.fit_tangent_pca(X, 1)
    assert np.max(res.errors) < 1e-8


def test_tpca_basis_invariants(rng):
    X = lorentz.sample_wrapped_normal(lorentz.lift([0.3, 0.3, 0.0, 1.0]), 0.8, 50, rng)
    model = reduction.fit_tangent_pca(X, 2).model
    G = lorentz.lorentz_inner(model.frame.T[:, None, :], model.frame.T[None, :, :])
    np.testing.assert_allclose(G, np.eye(4), atol=1e-8)
    np.testing.assert_allclose(lorentz.lorentz_inner(model.frame.T, model.mean), 0, atol=1e-8)


def test_tpca_isotropic_explained_variance(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(10), 0.3, 10_000, rng)
    ratio = reduction.fit_tangent_pca(X, 2).model.explained_variance_ratio()
    assert ratio == pytest.approx(0.2, abs=0.02)


def test_tpca_errors_match_direct_oracle(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 40, rng)
    res = reduction.fit_tangent_pca(X, 2)
    m = res.model
    direct = []
    for x in X:
        v = lorentz.log_map(m.mean, x)
        proj = sum(lorentz.lorentz_inner(v, b) * b for b in m.basis.T)
        direct.append(lorentz.geodesic_distance(x, lorentz.exp_map(m.mean, proj)) ** 2)
    assert res.mean_squared_error == pytest.approx(np.mean(direct), rel=1e-9)


def test_tangent_pca_stack_matches_tpca_on_subspace(rng):
    m = reduction.fit_tangent_pca(lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 40, rng), 2).model
    stack = reduction.tangent_pca_stack(m)
    assert (stack.ambient_dim, stack.target_dim) == (4, 2)
    # the geodesic submanifold spanned by the kept basis is reproduced exactly
    pts = lorentz.exp_map(m.mean, rng.standard_normal((10, 2)) @ m.basis.T)
    assert nested.reconstruction_loss(stack, pts) < 1e-16


# ---- evaluation and sweeps ---------------------------------------------------

def test_evaluate(rng):
    level, X = planted(rng, n=3, count=20)
    res = reduction.evaluate(nested.NestingStack((level,)), X)
    assert np.max(res.errors) < 1e-7
    Y = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 20, rng)
    fitted = reduction.fit_nh(Y, 2, FAST)
    again = reduction.evaluate(fitted.model, Y)
    assert again.mean_squared_error == pytest.approx(nested.reconstruction_loss(fitted.model, Y))
    tp = reduction.fit_tangent_pca(Y, 2)
    assert reduction.evaluate(tp.model, Y).mean_squared_error == pytest.approx(tp.mean_squared_error)
    with pytest.raises(DimensionError):
        reduction.evaluate(fitted.model, lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 5, rng))


def test_evaluate_method_repeats(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 20, rng)
    one = reduction.evaluate_method("tpca", X, 1, repeats=1)
    assert one.std_error == 0 and len(one.values) == 1
    two = reduction.evaluate_method("nh", X, 1, FAST, repeats=2)
    assert len(two.values) == 2 and two.std_error >= 0


def test_variance_sweep_small():
    rows = reduction.variance_sweep(4, 2, [1e-4, 1.0], 30, [0, 1], FAST)
    assert [(r.sigma, r.method) for r in rows] == [(1e-4, "nh"), (1e-4, "tpca"), (1.0, "nh"), (1.0, "tpca")]
    assert rows[0].mean_error < 1e-7 and rows[1].mean_error < 1e-7
    assert rows[2].mean_error <= rows[3].mean_error
    assert reduction.SWEEP_HEADER == ("sigma", "method", "mean_error", "std_error", "seconds")
    with pytest.raises(DimensionError):
        reduction.variance_sweep(2, 2, [1.0], 10, [0])


def test_tpca_error_grows_with_sigma():
    sigmas = [0.2, 0.6, 1.0, 1.4]
    errs = [reduction.fit_tangent_pca(lorentz.sample_wrapped_normal(lorentz.origin(6), s, 100, 3), 2)
            .mean_squared_error for s in sigmas]
    inversions = sum(b < a for a, b in zip(errs, errs[1:]))
    assert inversions <= 1
