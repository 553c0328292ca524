import numpy as np
import pytest
from hypothesis import given, strategies as st

from nestedhyp import group, lorentz
from nestedhyp.errors import DegenerateInputError, InvalidLorentzError, InvalidRotationError

seeds = st.integers(0, 2**31 - 1)
dims = st.integers(1, 6)


def invariants_hold(A, tol=1e-9):
    n = A.shape[0] - 1
    J = lorentz.minkowski_form(n)
    return (np.max(np.abs(A @ J @ A.T - J)) < tol and np.max(np.abs(A.T @ J @ A - J)) < tol
            and A[0, 0] > 0 and abs(np.linalg.det(A) - 1) < 1e-8)


# ---- boosts and rotations ----------------------------------------------------

def test_boost_examples():
    np.testing.assert_array_equal(group.boost_along_first_axis(0.0, 3), np.eye(4))
    c, s = np.cosh(1.0), np.sinh(1.0)
    np.testing.assert_allclose(group.boost_along_first_axis(1.0, 1), [[c, s], [s, c]])


@given(st.floats(-3, 3), st.floats(-3, 3), dims)
def test_boost_addition(a, b, n):
    lhs = group.boost_along_first_axis(a, n) @ group.boost_along_first_axis(b, n)
    np.testing.assert_allclose(lhs, group.boost_along_first_axis(a + b, n), rtol=1e-10, atol=1e-10)
    assert invariants_hold(group.boost_along_first_axis(a, n))


def test_boost_derivative_vs_fd():
    h = 1e-6
    fd = (group.boost_along_first_axis(0.3 + h, 2) - group.boost_along_first_axis(0.3 - h, 2)) / (2 * h)
    np.testing.assert_allclose(group.boost_derivative(0.3, 2), fd, atol=1e-8)


def test_rotation_embed(rng):
    np.testing.assert_array_equal(group.rotation_embed(np.eye(3)), np.eye(4))
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(group.rotation_embed(R) @ lorentz.origin(2), lorentz.origin(2))
    X = lorentz.sample_wrapped_normal(lorentz.origin(2), 1.0, 100, rng)
    Y = lorentz.sample_wrapped_normal(lorentz.origin(2), 1.0, 100, rng)
    A = group.rotation_embed(R)
    np.testing.assert_allclose(lorentz.geodesic_distance(X @ A.T, Y @ A.T),
                               lorentz.geodesic_distance(X, Y), atol=1e-10)
    with pytest.raises(InvalidRotationError):
        group.rotation_embed(np.diag([1.0, -1.0]))
    with pytest.raises(InvalidRotationError):
        group.rotation_embed(2 * np.eye(2))


@given(seeds, dims)
def test_random_rotation_is_special_orthogonal(seed, n):
    R = group.random_rotation(n, seed)
    assert group.is_rotation(R)
    np.testing.assert_array_equal(R, group.random_rotation(n, seed))


# ---- origin boost ------------------------------------------------------------

def test_origin_boost_examples(rng):
    np.testing.assert_allclose(group.origin_boost(lorentz.origin(3)), np.eye(4))
    t = 0.8
    np.testing.assert_allclose(group.origin_boost([np.cosh(t), np.sinh(t), 0]),
                               group.boost_along_first_axis(t, 2), atol=1e-14)
    mu = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.5, 50, rng)
    for m in mu:
        B = group.origin_boost(m)
        np.testing.assert_allclose(B @ lorentz.origin(4), m, atol=1e-10 * m[0])
        np.testing.assert_array_equal(B, B.T)
        assert invariants_hold(B, tol=1e-9 * m[0] ** 2)


def test_transitivity(rng):
    X = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 20, rng)
    Y = lorentz.sample_wrapped_normal(lorentz.origin(3), 1.0, 20, rng)
    for x, y in zip(X, Y):
        A = group.origin_boost(y) @ group.lorentz_inverse(group.origin_boost(x))
        np.testing.assert_allclose(A @ x, y, atol=1e-9)


# ---- Gram-Schmidt ------------------------------------------------------------

def test_gram_schmidt_examples():
    np.testing.assert_allclose(group.adapted_gram_schmidt(np.eye(4)), np.eye(4))
    np.testing.assert_allclose(group.adapted_gram_schmidt(np.diag([2.0, 3.0, 5.0])), np.eye(3))


def _gram_schmidt_input(rng, n):
    M = rng.standard_normal((n + 1, n + 1))
    M[:, 0] = lorentz.sample_wrapped_normal(lorentz.origin(n), 1.0, 1, rng)[0]
    return M


def test_gram_schmidt_invariants_and_idempotence(rng):
    for _ in range(100):
        n = int(rng.integers(1, 6))
        E = group.adapted_gram_schmidt(_gram_schmidt_input(rng, n))
        assert invariants_hold(E)
        np.testing.assert_allclose(group.adapted_gram_schmidt(E), E, atol=1e-10)


def test_gram_schmidt_keeps_first_direction(rng):
    M = _gram_schmidt_input(rng, 3)
    E = group.adapted_gram_schmidt(M)
    np.testing.assert_allclose(E[:, 0], M[:, 0], atol=1e-12)


def test_gram_schmidt_degenerate():
    with pytest.raises(DegenerateInputError) as e:
        group.adapted_gram_schmidt(np.diag([-1.0, 1.0, 1.0]))
    assert e.value.step == 0
    M = np.eye(3)
    M[:, 2] = M[:, 1]
    with pytest.raises(DegenerateInputError) as e:
        group.adapted_gram_schmidt(M)
    assert e.value.step == 2
    M = np.eye(3)
    M[:, 1] = [1.0, 0.0, 0.0]  # timelike where spacelike is required
    with pytest.raises(DegenerateInputError) as e:
        group.adapted_gram_schmidt(M)
    assert e.value.step == 1


# ---- random Lorentz matrices and factorizations -----------------------------

@given(seeds, dims)
def test_random_lorentz_invariants(seed, n):
    A = group.random_lorentz(n, seed)
    assert invariants_hold(A, tol=1e-9 * max(1.0, A[0, 0] ** 2))
    assert (A @ lorentz.origin(n))[0] > 0
    np.testing.assert_allclose(A @ group.lorentz_inverse(A), np.eye(n + 1), atol=1e-9 * A[0, 0] ** 2)


def test_group_closure_and_isometry(rng):
    A, B = group.random_lorentz(4, rng), group.random_lorentz(4, rng)
    assert group.is_lorentz(A @ B)
    X = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 100, rng)
    Y = lorentz.sample_wrapped_normal(lorentz.origin(4), 1.0, 100, rng)
    np.testing.assert_allclose(lorentz.geodesic_distance(X @ A.T, Y @ A.T),
                               lorentz.geodesic_distance(X, Y), atol=1e-9)


def test_check_lorentz_rejects():
    with pytest.raises(InvalidLorentzError):
        group.check_lorentz(2 * np.eye(3))
    with pytest.raises(InvalidLorentzError):
        group.check_lorentz(np.diag([-1.0, 1.0, 1.0]))  # time reversal
    with pytest.raises(InvalidLorentzError):
        group.check_lorentz(np.diag([1.0, -1.0, 1.0]))  # orientation reversal


def test_axis_decompose_examples():
    d = group.axis_decompose(np.eye(4))
    np.testing.assert_allclose(d.P, np.eye(3))
    np.testing.assert_allclose(d.Q, np.eye(3))
    assert d.alpha == 0
    d = group.axis_decompose(group.boost_along_first_axis(0.9, 3))
    assert d.alpha == pytest.approx(0.9)
    np.testing.assert_allclose(d.P, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(d.Q, np.eye(3), atol=1e-12)


def test_axis_decompose_round_trip(rng):
    for k in range(100):
        n = int(rng.integers(1, 6))
        A = group.random_lorentz(n, rng)
        d = group.axis_decompose(A)
        assert group.is_rotation(d.P) and group.is_rotation(d.Q)
        if n >= 2:
            assert d.alpha >= 0
        np.testing.assert_allclose(d.recompose(), A, atol=1e-8)


def test_axis_decompose_pure_rotation(rng):
    R = group.random_rotation(3, rng)
    d = group.axis_decompose(group.rotation_embed(R))
    assert d.alpha == 0
    np.testing.assert_allclose(d.P @ d.Q.T, R, atol=1e-12)


def test_polar_decompose(rng):
    rot, B = group.polar_decompose(np.eye(3))
    np.testing.assert_allclose(rot, np.eye(3))
    np.testing.assert_allclose(B, np.eye(3))
    B0 = group.pure_boost(np.array([0.3, -1.1, 0.4]))
    rot, B = group.polar_decompose(B0)
    np.testing.assert_allclose(rot, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(B, B0, atol=1e-12)
    for _ in range(100):
        A = group.random_lorentz(int(rng.integers(1, 6)), rng)
        rot, B = group.polar_decompose(A)
        np.testing.assert_allclose(rot @ B, A, atol=1e-8)
        np.testing.assert_allclose(rot[0], np.eye(A.shape[0])[0], atol=1e-8)
        assert group.is_rotation(rot[1:, 1:], tol=1e-8)
        np.testing.assert_allclose(B, B.T)


def test_compose_gradients_vs_fd(rng):
    n, m = 4, 2
    P = group.random_rotation(n, rng)[:m]
    Q = group.random_rotation(n, rng)
    alpha = 0.7
    C = rng.standard_normal((m + 1, n + 1))

    def f(P, alpha, Q):
        return float(np.sum(C * group.compose(P, alpha, Q)))

    dP, dalpha, dQ = group.compose_gradients(P, alpha, Q, C)
    h = 1e-6
    E = np.zeros_like(P)
    E[1, 2] = 1
    assert (f(P + h * E, alpha, Q) - f(P - h * E, alpha, Q)) / (2 * h) == pytest.approx(dP[1, 2], abs=1e-7)
    assert (f(P, alpha + h, Q) - f(P, alpha - h, Q)) / (2 * h) == pytest.approx(dalpha, abs=1e-7)
    E = np.zeros_like(Q)
    E[3, 0] = 1
    assert (f(P, alpha, Q + h * E) - f(P, alpha, Q - h * E)) / (2 * h) == pytest.approx(dQ[3, 0], abs=1e-7)
