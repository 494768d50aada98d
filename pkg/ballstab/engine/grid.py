"""Polar grid on the reference annulus 1 <= |y - h0| <= R and its FD operators.

Fields are arrays of shape (n_r, n_theta); vector fields (2, n_r, n_theta);
tensor fields (2, 2, n_r, n_theta). The flattened index is i * n_theta + j
(r outer, theta inner), matching the snapshot layout.
"""

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..core.exceptions import DomainError


def radial_first_derivative(n: int, h: float) -> sp.csr_matrix:
    """Central first derivative with second-order one-sided rows at both ends."""
    if n < 3:
        raise DomainError(f"need at least 3 radial nodes, got {n}")
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -1.0
        D[i, i + 1] = 1.0
    D[0, 0:3] = [-3.0, 4.0, -1.0]
    D[n - 1, n - 3 : n] = [1.0, -4.0, 3.0]
    return (D / (2.0 * h)).tocsr()


def radial_second_derivative(n: int, h: float) -> sp.csr_matrix:
    """Central second derivative with second-order one-sided rows at both ends."""
    if n < 4:
        raise DomainError(f"need at least 4 radial nodes, got {n}")
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1 : i + 2] = [1.0, -2.0, 1.0]
    D[0, 0:4] = [2.0, -5.0, 4.0, -1.0]
    D[n - 1, n - 4 : n] = [-1.0, 4.0, -5.0, 2.0]
    return (D / h**2).tocsr()


def periodic_first_derivative(n: int, h: float) -> sp.csr_matrix:
    e = np.ones(n)
    D = sp.diags([-e[:-1], e[:-1]], [-1, 1], shape=(n, n), format="lil")
    D[0, n - 1] = -1.0
    D[n - 1, 0] = 1.0
    return (D / (2.0 * h)).tocsr()


def periodic_second_derivative(n: int, h: float) -> sp.csr_matrix:
    e = np.ones(n)
    D = sp.diags([e[:-1], -2.0 * e, e[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
    D[0, n - 1] = 1.0
    D[n - 1, 0] = 1.0
    return (D / h**2).tocsr()


class Grid:
    """Reference annulus F(0) discretised on a tensor polar grid.

    Nodes sit at r_i = 1 + i dr (i = 0..n_r-1, r_0 = 1 body surface,
    r_{n_r-1} = R container wall) and theta_j = j dtheta (periodic). Cartesian
    derivative operators are chain-rule combinations of the polar ones and
    are assembled once as sparse matrices acting on flattened fields.

    Example:
        >>> grid = Grid(33, 64, 3.0)
        >>> grid.integrate(np.ones(grid.shape))  # 8 pi
    """

    def __init__(self, n_r: int, n_theta: int, container_radius: float):
        if n_r < 4 or n_theta < 4:
            raise DomainError(f"grid too small: n_r={n_r}, n_theta={n_theta}")
        if container_radius <= 1.0:
            raise DomainError(f"container radius must exceed the body radius, got {container_radius}")
        self.n_r = n_r
        self.n_theta = n_theta
        self.R = float(container_radius)
        self.dr = (self.R - 1.0) / (n_r - 1)
        self.dtheta = 2.0 * np.pi / n_theta
        self.r = 1.0 + self.dr * np.arange(n_r)
        self.theta = self.dtheta * np.arange(n_theta)
        self.rr, self.tt = np.meshgrid(self.r, self.theta, indexing="ij")
        self.cos = np.cos(self.tt)
        self.sin = np.sin(self.tt)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    @cached_property
    def y(self) -> np.ndarray:
        """Reference positions relative to h0, shape (2, n_r, n_theta)."""
        return np.stack([self.rr * self.cos, self.rr * self.sin])

    @cached_property
    def inner_normal(self) -> np.ndarray:
        """Unit normal on the body surface directed into the ball, shape (2, n_theta)."""
        return -np.stack([np.cos(self.theta), np.sin(self.theta)])

    # ===== Index sets =====

    @cached_property
    def inner_index(self) -> np.ndarray:
        return np.arange(self.n_theta)

    @cached_property
    def outer_index(self) -> np.ndarray:
        return (self.n_r - 1) * self.n_theta + np.arange(self.n_theta)

    @cached_property
    def boundary_index(self) -> np.ndarray:
        return np.concatenate([self.inner_index, self.outer_index])

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.arange(self.n_theta, (self.n_r - 1) * self.n_theta)

    # ===== Quadrature =====

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid in r times rectangle in theta, with the polar Jacobian r."""
        w_r = np.full(self.n_r, self.dr)
        w_r[0] = w_r[-1] = 0.5 * self.dr
        return (w_r * self.r)[:, None] * np.full(self.n_theta, self.dtheta)[None, :]

    @cached_property
    def area(self) -> float:
        return float(self.weights.sum())

    def integrate(self, field: np.ndarray, jacobian: np.ndarray | None = None) -> float:
        """Quadrature of a scalar field, optionally weighted by det(grad X)."""
        w = self.weights if jacobian is None else self.weights * jacobian
        return float(np.sum(w * field))

    def boundary_integral(self, values: np.ndarray) -> np.ndarray:
        """Trapezoid rule over the unit body circle; the last axis is theta."""
        return np.sum(values, axis=-1) * self.dtheta

    # ===== Sparse operators =====

    @cached_property
    def _eye_r(self) -> sp.csr_matrix:
        return sp.identity(self.n_r, format="csr")

    @cached_property
    def _eye_t(self) -> sp.csr_matrix:
        return sp.identity(self.n_theta, format="csr")

    @cached_property
    def Dr(self) -> sp.csr_matrix:
        return sp.kron(radial_first_derivative(self.n_r, self.dr), self._eye_t, format="csr")

    @cached_property
    def Drr(self) -> sp.csr_matrix:
        return sp.kron(radial_second_derivative(self.n_r, self.dr), self._eye_t, format="csr")

    @cached_property
    def Dt(self) -> sp.csr_matrix:
        return sp.kron(self._eye_r, periodic_first_derivative(self.n_theta, self.dtheta), format="csr")

    @cached_property
    def Dtt(self) -> sp.csr_matrix:
        return sp.kron(self._eye_r, periodic_second_derivative(self.n_theta, self.dtheta), format="csr")

    @cached_property
    def Drt(self) -> sp.csr_matrix:
        return sp.kron(
            radial_first_derivative(self.n_r, self.dr),
            periodic_first_derivative(self.n_theta, self.dtheta),
            format="csr",
        )

    def _diag(self, values: np.ndarray) -> sp.dia_matrix:
        return sp.diags(values.ravel())

    @cached_property
    def Dx(self) -> sp.csr_matrix:
        C, S, Ri = self._diag(self.cos), self._diag(self.sin), self._diag(1.0 / self.rr)
        return (C @ self.Dr - S @ Ri @ self.Dt).tocsr()

    @cached_property
    def Dy(self) -> sp.csr_matrix:
        C, S, Ri = self._diag(self.cos), self._diag(self.sin), self._diag(1.0 / self.rr)
        return (S @ self.Dr + C @ Ri @ self.Dt).tocsr()

    @cached_property
    def Dxx(self) -> sp.csr_matrix:
        c, s, ri = self.cos, self.sin, 1.0 / self.rr
        d = self._diag
        return (
            d(c * c) @ self.Drr
            + d(s * s * ri) @ self.Dr
            + d(s * s * ri * ri) @ self.Dtt
            - d(2.0 * s * c * ri) @ self.Drt
            + d(2.0 * s * c * ri * ri) @ self.Dt
        ).tocsr()

    @cached_property
    def Dyy(self) -> sp.csr_matrix:
        c, s, ri = self.cos, self.sin, 1.0 / self.rr
        d = self._diag
        return (
            d(s * s) @ self.Drr
            + d(c * c * ri) @ self.Dr
            + d(c * c * ri * ri) @ self.Dtt
            + d(2.0 * s * c * ri) @ self.Drt
            - d(2.0 * s * c * ri * ri) @ self.Dt
        ).tocsr()

    @cached_property
    def Dxy(self) -> sp.csr_matrix:
        c, s, ri = self.cos, self.sin, 1.0 / self.rr
        d = self._diag
        return (
            d(s * c) @ (self.Drr - d(ri) @ self.Dr - d(ri * ri) @ self.Dtt)
            + d((c * c - s * s) * ri) @ self.Drt
            - d((c * c - s * s) * ri * ri) @ self.Dt
        ).tocsr()

    @cached_property
    def Lap(self) -> sp.csr_matrix:
        ri = 1.0 / self.rr
        return (self.Drr + self._diag(ri) @ self.Dr + self._diag(ri * ri) @ self.Dtt).tocsr()

    # ===== Field calculus =====

    def apply(self, op: sp.spmatrix, field: np.ndarray) -> np.ndarray:
        return np.asarray(op @ field.ravel()).reshape(self.shape)

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Cartesian gradient of a scalar field, shape (2, n_r, n_theta)."""
        return np.stack([self.apply(self.Dx, f), self.apply(self.Dy, f)])

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        """J[a, b] = d v_a / d y_b for a vector field v of shape (2, n_r, n_theta)."""
        return np.stack([self.grad(v[0]), self.grad(v[1])])

    def div(self, v: np.ndarray) -> np.ndarray:
        return self.apply(self.Dx, v[0]) + self.apply(self.Dy, v[1])

    def hessian(self, f: np.ndarray) -> np.ndarray:
        """H[a, b] = d^2 f / d y_a d y_b, shape (2, 2, n_r, n_theta)."""
        fxx = self.apply(self.Dxx, f)
        fyy = self.apply(self.Dyy, f)
        fxy = self.apply(self.Dxy, f)
        return np.array([[fxx, fxy], [fxy, fyy]])

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.apply(self.Lap, f)

    def grad_div(self, v: np.ndarray) -> np.ndarray:
        """Gradient of the divergence, from second-derivative operators."""
        gx = self.apply(self.Dxx, v[0]) + self.apply(self.Dxy, v[1])
        gy = self.apply(self.Dxy, v[0]) + self.apply(self.Dyy, v[1])
        return np.stack([gx, gy])

    def refined(self, factor: int = 2) -> "Grid":
        """Grid with the same annulus and factor-times finer spacing."""
        return Grid(factor * (self.n_r - 1) + 1, factor * self.n_theta, self.R)
