"""2D reductions of cross products and skew matrices, plus 3D rotation helpers.

Vectors carry their components on axis 0, so every helper works node-wise
on fields of shape (2, ...) as well as on plain 2-vectors.
"""

import numpy as np
from scipy.linalg import polar
from scipy.spatial.transform import Rotation

from ..core.exceptions import DomainError


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Scalar 2D cross product a_1 b_2 - a_2 b_1."""
    return a[0] * b[1] - a[1] * b[0]


def omega_cross(omega: float | np.ndarray, v: np.ndarray) -> np.ndarray:
    """omega x v for a scalar (out-of-plane) angular velocity: omega (-v_2, v_1)."""
    return np.stack([-omega * v[1], omega * v[0]])


def skew(omega: float | np.ndarray) -> np.ndarray:
    """Matrix A(omega) with A(omega) v = omega x v.

    A scalar gives the 2D matrix [[0, -w], [w, 0]]; a 3-vector gives the
    3D cross-product matrix.
    """
    w = np.asarray(omega, dtype=float)
    if w.ndim == 0:
        return np.array([[0.0, -float(w)], [float(w), 0.0]])
    if w.shape == (3,):
        return np.array(
            [
                [0.0, -w[2], w[1]],
                [w[2], 0.0, -w[0]],
                [-w[1], w[0], 0.0],
            ]
        )
    raise DomainError(f"skew needs a scalar or a 3-vector, got shape {w.shape}")


def rotation_increment(omega: np.ndarray, dt: float) -> np.ndarray:
    """exp(A(omega) dt) for a 3-vector omega."""
    return Rotation.from_rotvec(np.asarray(omega, dtype=float) * dt).as_matrix()


def reorthonormalize(Q: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (orthogonal polar factor)."""
    U, _ = polar(Q)
    return U


def matvec(Q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply a constant 2x2 matrix to a vector field of shape (2, ...)."""
    return np.tensordot(Q, v, axes=(1, 0))


def det2(M: np.ndarray) -> np.ndarray:
    return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]


def inv2(M: np.ndarray, det: np.ndarray | None = None) -> np.ndarray:
    """Node-wise inverse of a (2, 2, ...) tensor field."""
    det = det2(M) if det is None else det
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det
