import numpy as np
import pytest

from ballstab.core.exceptions import DomainError
from ballstab.engine.algebra import (
    cross2,
    det2,
    inv2,
    matvec,
    omega_cross,
    reorthonormalize,
    rotation_increment,
    skew,
)


def test_skew_3d_unit_z():
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert np.array_equal(skew(np.array([0.0, 0.0, 1.0])), expected)


def test_skew_zero():
    assert np.array_equal(skew(np.zeros(3)), np.zeros((3, 3)))
    assert np.array_equal(skew(0.0), np.zeros((2, 2)))


def test_skew_matches_cross_product():
    rng = np.random.default_rng(0)
    for _ in range(20):
        w, v = rng.normal(size=(2, 3))
        np.testing.assert_allclose(skew(w) @ v, np.cross(w, v), atol=1e-14)


def test_skew_2d_matches_omega_cross():
    rng = np.random.default_rng(1)
    for _ in range(20):
        w = float(rng.normal())
        v = rng.normal(size=2)
        np.testing.assert_allclose(skew(w) @ v, omega_cross(w, v), atol=1e-15)
        # planar reduction of the 3D product (0, 0, w) x (v, 0)
        np.testing.assert_allclose(
            np.cross([0.0, 0.0, w], [v[0], v[1], 0.0])[:2], omega_cross(w, v), atol=1e-15
        )


def test_skew_rejects_other_shapes():
    with pytest.raises(DomainError):
        skew(np.zeros(2))


def test_cross2_sign_and_torque_convention():
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert cross2(e1, e2) == 1.0
    assert cross2(e2, e1) == -1.0
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 2))
    assert cross2(a, b) == pytest.approx(np.cross([*a, 0.0], [*b, 0.0])[2])


def test_fieldwise_helpers():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(2, 5, 7))
    b = rng.normal(size=(2, 5, 7))
    expected = a[0] * b[1] - a[1] * b[0]
    assert np.array_equal(cross2(a, b), expected)
    Q = np.array([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(matvec(Q, a), np.stack([-a[1], a[0]]))


def test_inverse_and_determinant_nodewise():
    rng = np.random.default_rng(5)
    M = np.eye(2)[:, :, None, None] + 0.1 * rng.normal(size=(2, 2, 4, 6))
    inv = inv2(M)
    prod = np.einsum("ab...,bc...->ac...", M, inv)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(2)[:, :, None, None], prod.shape), atol=1e-13)
    np.testing.assert_allclose(det2(M), np.linalg.det(np.moveaxis(M, (0, 1), (-2, -1))), atol=1e-14)


def test_rotation_increment_quarter_turn():
    R = rotation_increment(np.array([0.0, 0.0, 1.0]), np.pi / 2)
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(R, expected, atol=1e-15)


def test_reorthonormalize_restores_orthogonality():
    rng = np.random.default_rng(6)
    Q = rotation_increment(rng.normal(size=3), 0.7) + 1e-6 * rng.normal(size=(3, 3))
    U = reorthonormalize(Q)
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-12)
    assert np.linalg.det(U) == pytest.approx(1.0)
