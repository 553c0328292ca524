import numpy as np
import pytest
from hypothesis import given, strategies as st

from nestedhyp import group, lorentz, nested
from nestedhyp.errors import DimensionError, InputError

seeds = st.integers(0, 2**31 - 1)
offsets = st.floats(-2.5, 2.5)


def random_level(m, rng, r=None):
    return nested.NestingLevel(group.random_lorentz(m + 1, rng),
                               float(rng.standard_normal()) if r is None else r)


def test_level_invariants(rng):
    level = random_level(3, rng)
    J4, J3 = lorentz.minkowski_form(4), lorentz.minkowski_form(3)
    assert lorentz.lorentz_inner(level.normal, level.normal) == pytest.approx(1, abs=1e-9)
    np.testing.assert_allclose(level.frame.T @ J4 @ level.frame, J3, atol=1e-9)
    assert level.inner_dim == 3 and level.outer_dim == 4
    assert not level.Lambda.flags.writeable


def test_embed_identity_examples():
    x = lorentz.lift([0.3, -0.4])
    np.testing.assert_allclose(nested.embed(nested.NestingLevel.identity(2), x), np.r_[x, 0])
    t = 0.8
    y = nested.embed(nested.NestingLevel.identity(2, t), x)
    np.testing.assert_allclose(y, np.r_[np.cosh(t) * x, np.sinh(t)])
    assert lorentz.lorentz_inner(y, y) == pytest.approx(-1)


def test_embed_dimension_mismatch():
    with pytest.raises(DimensionError):
        nested.embed(nested.NestingLevel.identity(2), lorentz.origin(3))
    with pytest.raises(DimensionError):
        nested.project(nested.NestingLevel.identity(2), lorentz.origin(2))


@given(seeds, st.integers(1, 5))
def test_embed_outputs_points(seed, m):
    rng = np.random.default_rng(seed)
    level = random_level(m, rng)
    x = lorentz.sample_wrapped_normal(lorentz.origin(m), 1.0, 20, rng)
    assert lorentz.is_point(nested.embed(level, x))


@given(seeds, offsets)
def test_left_inverse(seed, r):
    rng = np.random.default_rng(seed)
    level = random_level(3, rng, r)
    x = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 20, rng)
    np.testing.assert_allclose(nested.project(level, nested.embed(level, x)), x, atol=1e-9)


def test_project_examples():
    level = nested.NestingLevel.identity(2)
    x = lorentz.lift([0.5, 1.0])
    np.testing.assert_allclose(nested.project(level, np.r_[x, 0]), x)
    y = lorentz.lift([0.5, 1.0, 0.7])
    expected = y[:3] / np.sqrt(-lorentz.lorentz_inner(y[:3], y[:3]))
    np.testing.assert_allclose(nested.project(level, y), expected)


def test_projection_ignores_normal_offset(rng):
    level = random_level(2, rng)
    x = lorentz.sample_wrapped_normal(lorentz.origin(2), 1.0, 10, rng)
    for r2 in (-1.0, 0.3, 2.0):
        y = np.cosh(r2) * (x @ level.frame.T) + np.sinh(r2) * level.normal
        np.testing.assert_allclose(nested.project(level, y), x, atol=1e-9)


def test_reconstruct_idempotent(rng):
    level = random_level(3, rng)
    x = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 30, rng)
    once = nested.reconstruct(level, x)
    np.testing.assert_allclose(nested.reconstruct(level, once), once, atol=1e-9)
    z = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 30, rng)
    np.testing.assert_allclose(nested.reconstruct(level, nested.embed(level, z)),
                               nested.embed(level, z), atol=1e-9)


def test_reconstruct_is_nearest_point(rng):
    # grid oracle: sample the 1-dim image in L^2 at spacing 1e-3
    level = random_level(1, rng)
    ts = np.arange(-8, 8, 1e-3)
    curve = nested.embed(level, lorentz.lift(ts[:, None]))
    X = lorentz.sample_wrapped_normal(lorentz.origin(2), 1.0, 10, rng)
    for x in X:
        best = np.min(lorentz.geodesic_distance(x, curve))
        got = lorentz.geodesic_distance(x, nested.reconstruct(level, x))
        assert got <= best + 1e-9
        assert got == pytest.approx(best, abs=1e-5)
        assert nested.distance_to_image(level, x) == pytest.approx(got, abs=1e-9)


def test_isometry_at_zero_offset(rng):
    for _ in range(100):
        level = random_level(3, rng, 0.0)
        x, y = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 2, rng)
        d0 = lorentz.geodesic_distance(x, y)
        d1 = lorentz.geodesic_distance(nested.embed(level, x), nested.embed(level, y))
        assert abs(d1 - d0) < 1e-9


def test_offset_does_not_shrink_distances(rng):
    for _ in range(50):
        level = random_level(2, rng)
        x, y = lorentz.sample_wrapped_normal(lorentz.origin(2), 1.0, 2, rng)
        d1 = lorentz.geodesic_distance(nested.embed(level, x), nested.embed(level, y))
        assert d1 >= lorentz.geodesic_distance(x, y) - 1e-9


def test_equivariance(rng):
    for _ in range(100):
        level = random_level(3, rng)
        R = group.random_lorentz(3, rng)
        x = lorentz.sample_wrapped_normal(lorentz.origin(3), 0.5, 1, rng)[0]
        lhs = nested.embed(level, R @ x)
        rhs = nested.conjugated_action(level, R, nested.embed(level, x))
        assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(lhs))) < 1e-8


def test_conjugation_identity_and_invariants(rng):
    level = random_level(2, rng)
    y = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 5, rng)
    np.testing.assert_allclose(nested.conjugated_action(level, np.eye(3), y), y, atol=1e-9)
    C = nested.conjugation_matrix(level, group.random_lorentz(2, rng))
    assert group.is_lorentz(C, tol=1e-8)
    with pytest.raises(DimensionError):
        nested.conjugated_action(level, np.eye(4), y)


# ---- stacks ------------------------------------------------------------------

def random_stack(n, m, rng):
    return nested.NestingStack(tuple(random_level(k - 1, rng) for k in range(n, m, -1)))


def test_stack_validation():
    with pytest.raises(InputError):
        nested.NestingStack(())
    with pytest.raises(DimensionError):
        nested.NestingStack((nested.NestingLevel.identity(3), nested.NestingLevel.identity(3)))
    s = nested.NestingStack.identity(5, 2)
    assert (s.ambient_dim, s.target_dim, len(s)) == (5, 2, 3)


def test_single_level_stack_matches_level(rng):
    level = random_level(3, rng)
    x = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 10, rng)
    np.testing.assert_allclose(nested.stack_project([level], x), nested.project(level, x))
    z = nested.project(level, x)
    np.testing.assert_allclose(nested.stack_embed(level, z), nested.embed(level, z))


def test_identity_stack_truncates_and_pads():
    s = nested.NestingStack.identity(4, 2)
    x = lorentz.lift([0.3, 0.2, 0.0, 0.0])
    np.testing.assert_allclose(nested.stack_project(s, x), x[:3])
    np.testing.assert_allclose(nested.stack_embed(s, x[:3]), x)


def test_stack_closed_form(rng):
    for _ in range(20):
        stack = random_stack(5, 2, rng)
        x = lorentz.sample_wrapped_normal(lorentz.origin(5), 1.0, 20, rng)
        np.testing.assert_allclose(nested.stack_project(stack, x),
                                   nested.stack_project_closed_form(stack, x), atol=1e-9)
    assert nested.stack_frame(stack).shape == (6, 3)


def test_reconstruction_loss(rng):
    stack = random_stack(4, 2, rng)
    z = lorentz.sample_wrapped_normal(lorentz.origin(2), 1.0, 30, rng)
    assert nested.reconstruction_loss(stack, nested.stack_embed(stack, z)) < 1e-12
    assert nested.reconstruction_loss(nested.NestingStack.identity(3, 1), lorentz.origin(3)) == 0
    X = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 30, rng)
    direct = 0.0
    for x in X:
        y = x
        for level in stack.levels:
            y = nested.project(level, y)
        for level in reversed(stack.levels):
            y = nested.embed(level, y)
        direct += np.arccosh(max(1.0, -lorentz.lorentz_inner(x, y))) ** 2
    assert nested.reconstruction_loss(stack, X) == pytest.approx(direct / len(X), rel=1e-8)
    with pytest.raises(InputError):
        nested.reconstruction_loss(stack, np.zeros((0, 5)))


def test_loss_invariant_under_global_isometry(rng):
    stack = random_stack(4, 2, rng)
    X = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 30, rng)
    A = group.random_lorentz(4, rng)
    moved = nested.transform_stack(stack, A)
    assert nested.reconstruction_loss(moved, X @ A.T) == pytest.approx(
        nested.reconstruction_loss(stack, X), abs=1e-8)


def test_embedded_curve(rng):
    stack = random_stack(3, 1, rng)
    pts = nested.embedded_curve(stack, np.linspace(-1, 1, 7))
    assert pts.shape == (7, 4) and lorentz.is_point(pts)
    with pytest.raises(DimensionError):
        nested.embedded_curve(random_stack(3, 2, rng), [0.0])
