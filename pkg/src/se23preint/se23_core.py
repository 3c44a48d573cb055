"""
Lie-group machinery for SO(3) and the extended pose group SE_2(3).

An extended pose ``T = (C, v, r)`` collects a rotation ``C`` and two
translational slots, velocity ``v`` and position ``r``. Its 5x5 embedding is

    [[C, v, r],
     [0, 1, 0],
     [0, 0, 1]]

but the embedding is only ever built in tests; every operation here works
blockwise on the 3x3 / 3-vector pieces.

Tangent vectors are 9-vectors ``xi = [phi; theta; zeta]`` (rotation vector
first, then the velocity and position coordinates).

The ``gamma`` family

    Gamma_m(phi) = sum_n (phi^)^n / (n + m)!

is evaluated through the two scalar coefficients multiplying ``phi^`` and
``phi^ @ phi^``. ``Gamma_0`` is the SO(3) exponential and ``Gamma_1`` the SO(3)
left Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MalformedAlgebraError",
    "BranchSingularityError",
    "SMALL_ANGLE",
    "skew",
    "unskew",
    "gamma",
    "gamma_coefficient",
    "exp_so3",
    "log_so3",
    "ExtendedPose",
    "compose",
    "inverse",
    "tangent",
    "split_tangent",
    "hat",
    "vee",
    "exp_se23",
    "log_se23",
    "adjoint",
    "adjoint_inverse",
    "ad_se23",
    "left_jacobian_se23",
    "left_jacobian_inv_se23",
    "right_jacobian_inv_se23",
    "phi_auto",
    "AutomorphismF",
    "automorphism_matrix",
    "bch_gamma_left",
    "bch_gamma_right",
    "nearest_rotation",
]

SMALL_ANGLE = 0.5
"""Angle (rad) below which the gamma coefficients come from their Taylor series."""

_TAYLOR_TERMS = 14
_PI_BRANCH_BAND = 1e-7
_VEE_TOL = 1e-12


class MalformedAlgebraError(ValueError):
    """Raised when a matrix is not an element of the Lie algebra."""


class BranchSingularityError(ValueError):
    """Raised when a logarithm is requested on (or next to) the pi-rotation cut."""


# ---------------------------------------------------------------------------
# SO(3)
# ---------------------------------------------------------------------------


def skew(v):
    """Cross-product matrix of a 3-vector; accepts stacked input of shape (..., 3)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def unskew(S):
    """Inverse of :func:`skew` (reads the lower-triangular entries)."""
    S = np.asarray(S, dtype=float)
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def _taylor_coefficient(theta2, k):
    # sum_n (-1)^n theta^(2n) / (2n + k)!
    total = np.zeros_like(theta2)
    term = np.full_like(theta2, 1.0 / math.factorial(k))
    for n in range(_TAYLOR_TERMS):
        total = total + term
        term = -term * theta2 / ((2 * n + k + 1) * (2 * n + k + 2))
    return total


def _closed_coefficient(theta, k):
    # c_1 = sin/theta, c_2 = (1 - cos)/theta^2, c_{k+2} = (1/k! - c_k)/theta^2
    theta2 = theta * theta
    if k % 2 == 1:
        c = np.sin(theta) / theta
        start = 1
    else:
        c = 2.0 * np.sin(0.5 * theta) ** 2 / theta2
        start = 2
    for j in range(start, k, 2):
        c = (1.0 / math.factorial(j) - c) / theta2
    return c


def _scalar_coefficient(theta, k):
    theta2 = theta * theta
    if theta < SMALL_ANGLE:
        total = 0.0
        term = 1.0 / math.factorial(k)
        for n in range(_TAYLOR_TERMS):
            total += term
            term = -term * theta2 / ((2 * n + k + 1) * (2 * n + k + 2))
        return total
    if k % 2 == 1:
        c = math.sin(theta) / theta
        start = 1
    else:
        c = 2.0 * math.sin(0.5 * theta) ** 2 / theta2
        start = 2
    for j in range(start, k, 2):
        c = (1.0 / math.factorial(j) - c) / theta2
    return c


def gamma_coefficient(theta, k):
    """Series coefficient ``c_k(theta) = sum_n (-1)^n theta^(2n) / (2n + k)!``.

    ``Gamma_m(phi) = I/m! + c_{m+1}(|phi|) phi^ + c_{m+2}(|phi|) phi^ phi^``.
    Below :data:`SMALL_ANGLE` the Taylor series is summed directly, which keeps
    the higher coefficients free of the cancellation present in the closed forms.
    """
    if np.ndim(theta) == 0:
        return _scalar_coefficient(float(theta), k)
    theta = np.asarray(theta, dtype=float)
    small = theta < SMALL_ANGLE
    out = _taylor_coefficient(theta * theta, k)
    if not np.all(small):
        big = ~small
        out[big] = _closed_coefficient(theta[big], k)
    return out


def gamma(m, phi):
    """Evaluate ``Gamma_m(phi)`` for m in {0, 1, 2, 3}.

    Parameters
    ----------
    m : int
        Series order.
    phi : array_like, shape (3,) or (..., 3)
        Rotation vector(s).

    Returns
    -------
    numpy.ndarray, shape (3, 3) or (..., 3, 3)
    """
    if m not in (0, 1, 2, 3):
        raise ValueError(f"gamma order must be 0, 1, 2 or 3, got {m!r}")
    phi = np.asarray(phi, dtype=float)
    if phi.shape == (3,):
        x, y, z = float(phi[0]), float(phi[1]), float(phi[2])
        theta = math.sqrt(x * x + y * y + z * z)
        a = _scalar_coefficient(theta, m + 1)
        b = _scalar_coefficient(theta, m + 2)
        d = 1.0 / math.factorial(m)
        xx, yy, zz, xy, xz, yz = x * x, y * y, z * z, x * y, x * z, y * z
        return np.array(
            [
                [d - b * (yy + zz), b * xy - a * z, b * xz + a * y],
                [b * xy + a * z, d - b * (xx + zz), b * yz - a * x],
                [b * xz - a * y, b * yz + a * x, d - b * (xx + yy)],
            ]
        )
    theta = np.linalg.norm(phi, axis=-1)
    a = gamma_coefficient(theta, m + 1)
    b = gamma_coefficient(theta, m + 2)
    P = skew(phi)
    P2 = P @ P
    eye = np.eye(3) / math.factorial(m)
    return eye + a[..., None, None] * P + b[..., None, None] * P2


def exp_so3(phi):
    """Rotation matrix ``Gamma_0(phi)``."""
    return gamma(0, phi)


def log_so3(C):
    """Rotation vector of a rotation matrix (principal branch).

    The angle is obtained from ``atan2(|w|, (tr C - 1)/2)`` where ``w`` is the
    axial vector of the antisymmetric part; for angles past 2.5 rad the axis
    is re-extracted from the symmetric part, which stays well conditioned as
    the angle approaches pi.

    Raises
    ------
    BranchSingularityError
        If the rotation angle is within 1e-7 of pi.
    """
    C = np.asarray(C, dtype=float)
    w = 0.5 * np.array([C[2, 1] - C[1, 2], C[0, 2] - C[2, 0], C[1, 0] - C[0, 1]])
    s = float(np.linalg.norm(w))
    c = 0.5 * (C[0, 0] + C[1, 1] + C[2, 2] - 1.0)
    c = min(1.0, max(-1.0, c))
    theta = math.atan2(s, c)
    if theta > math.pi - _PI_BRANCH_BAND:
        raise BranchSingularityError(
            f"rotation angle {theta!r} is within {_PI_BRANCH_BAND} of pi; logarithm is not unique"
        )
    if theta < 2.5:
        return w / gamma_coefficient(theta, 1)
    B = 0.5 * (C + C.T) - c * np.eye(3)
    i = int(np.argmax(np.diag(B)))
    axis = B[:, i] / math.sqrt(B[i, i] * (1.0 - c))
    axis /= np.linalg.norm(axis)
    if axis @ w < 0.0:
        axis = -axis
    return theta * axis


def nearest_rotation(C):
    """Project a 3x3 matrix onto SO(3) (polar decomposition via SVD).

    Never applied implicitly by the library; call it explicitly when an
    integration result needs re-orthonormalizing.
    """
    U, _, Vt = np.linalg.svd(np.asarray(C, dtype=float))
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt


# ---------------------------------------------------------------------------
# SE_2(3)
# ---------------------------------------------------------------------------


def _frozen(a, shape):
    a = np.array(a, dtype=float)
    if a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ExtendedPose:
    """Element ``(C, v, r)`` of SE_2(3).

    Parameters
    ----------
    C : array_like, shape (3, 3)
        Rotation matrix; must satisfy ``C^T C = I`` and ``det C = 1`` to 1e-9.
    v : array_like, shape (3,)
        First translational slot (velocity).
    r : array_like, shape (3,)
        Second translational slot (position).
    """

    C: np.ndarray
    v: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        C = _frozen(self.C, (3, 3))
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "v", _frozen(self.v, (3,)))
        object.__setattr__(self, "r", _frozen(self.r, (3,)))
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.r))):
            raise ValueError("extended pose has non-finite entries")
        if np.linalg.norm(C.T @ C - np.eye(3)) > 1e-9 or abs(np.linalg.det(C) - 1.0) > 1e-9:
            raise ValueError("C is not a rotation matrix to within 1e-9")

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3), np.zeros(3))

    def __matmul__(self, other):
        return compose(self, other)

    def inverse(self):
        return inverse(self)

    def as_matrix(self):
        """Dense 5x5 embedding (for tests and debugging)."""
        M = np.eye(5)
        M[:3, :3] = self.C
        M[:3, 3] = self.v
        M[:3, 4] = self.r
        return M

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3], M[:3, 4])

    def allclose(self, other, atol=1e-12):
        return (
            np.allclose(self.C, other.C, rtol=0.0, atol=atol)
            and np.allclose(self.v, other.v, rtol=0.0, atol=atol)
            and np.allclose(self.r, other.r, rtol=0.0, atol=atol)
        )


def compose(A, B):
    """Group product ``A B``."""
    return ExtendedPose(A.C @ B.C, A.C @ B.v + A.v, A.C @ B.r + A.r)


def inverse(T):
    """Group inverse ``(C^T, -C^T v, -C^T r)``."""
    Ct = T.C.T
    return ExtendedPose(Ct, -Ct @ T.v, -Ct @ T.r)


def tangent(phi=(0.0, 0.0, 0.0), theta=(0.0, 0.0, 0.0), zeta=(0.0, 0.0, 0.0)):
    """Stack the three 3-vector components into a 9-vector."""
    xi = np.concatenate([np.asarray(phi, float), np.asarray(theta, float), np.asarray(zeta, float)])
    if xi.shape != (9,) or not np.all(np.isfinite(xi)):
        raise ValueError("tangent vector must be 9 finite numbers")
    return xi


def split_tangent(xi):
    xi = np.asarray(xi, dtype=float)
    return xi[0:3], xi[3:6], xi[6:9]


def hat(xi):
    """5x5 Lie-algebra matrix of a 9-vector."""
    phi, theta, zeta = split_tangent(xi)
    M = np.zeros((5, 5))
    M[:3, :3] = skew(phi)
    M[:3, 3] = theta
    M[:3, 4] = zeta
    return M


def vee(M):
    """Inverse of :func:`hat`.

    Raises
    ------
    MalformedAlgebraError
        If the bottom two rows are not zero or the top-left block is not
        skew-symmetric (tolerance 1e-12).
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (5, 5):
        raise MalformedAlgebraError(f"expected a 5x5 matrix, got shape {M.shape}")
    S = M[:3, :3]
    if np.max(np.abs(M[3:, :]), initial=0.0) > _VEE_TOL or np.max(np.abs(S + S.T)) > _VEE_TOL:
        raise MalformedAlgebraError("matrix does not have the se_2(3) structure")
    return np.concatenate([unskew(S), M[:3, 3], M[:3, 4]])


def exp_se23(xi):
    """Exponential map ``(Gamma_0(phi), Gamma_1(phi) theta, Gamma_1(phi) zeta)``."""
    phi, theta, zeta = split_tangent(xi)
    J = gamma(1, phi)
    return ExtendedPose(gamma(0, phi), J @ theta, J @ zeta)


def log_se23(T):
    """Logarithm of an extended pose, inverse of :func:`exp_se23`."""
    phi = log_so3(T.C)
    J = gamma(1, phi)
    tv = np.linalg.solve(J, np.column_stack([T.v, T.r]))
    return np.concatenate([phi, tv[:, 0], tv[:, 1]])


def adjoint(T):
    """9x9 adjoint matrix, ``T exp(xi) T^-1 = exp(Ad_T xi)``."""
    C = T.C
    A = np.zeros((9, 9))
    A[0:3, 0:3] = C
    A[3:6, 3:6] = C
    A[6:9, 6:9] = C
    A[3:6, 0:3] = skew(T.v) @ C
    A[6:9, 0:3] = skew(T.r) @ C
    return A


def adjoint_inverse(T):
    """Adjoint of ``T^-1`` without forming the inverse explicitly."""
    Ct = T.C.T
    A = np.zeros((9, 9))
    A[0:3, 0:3] = Ct
    A[3:6, 3:6] = Ct
    A[6:9, 6:9] = Ct
    A[3:6, 0:3] = -Ct @ skew(T.v)
    A[6:9, 0:3] = -Ct @ skew(T.r)
    return A


def ad_se23(xi):
    """9x9 matrix of the Lie bracket ``ad_xi``."""
    phi, theta, zeta = split_tangent(xi)
    P = skew(phi)
    a = np.zeros((9, 9))
    a[0:3, 0:3] = P
    a[3:6, 3:6] = P
    a[6:9, 6:9] = P
    a[3:6, 0:3] = skew(theta)
    a[6:9, 0:3] = skew(zeta)
    return a


def left_jacobian_se23(xi, max_terms=200):
    """Left Jacobian ``sum_n ad_xi^n / (n+1)!``, summed until terms fall below roundoff."""
    a = ad_se23(xi)
    J = np.eye(9)
    term = np.eye(9)
    for n in range(1, max_terms):
        term = term @ a / (n + 1)
        J = J + term
        if np.max(np.abs(term)) <= 1e-17 * np.max(np.abs(J)):
            break
    return J


def left_jacobian_inv_se23(xi):
    """Inverse of :func:`left_jacobian_se23`."""
    return np.linalg.inv(left_jacobian_se23(xi))


def right_jacobian_inv_se23(xi):
    """Inverse right Jacobian, ``J_r(xi) = J_l(-xi)``."""
    return np.linalg.inv(left_jacobian_se23(-np.asarray(xi, dtype=float)))


# ---------------------------------------------------------------------------
# The time-indexed automorphism (C, v, r) -> (C, v, r + dt v)
# ---------------------------------------------------------------------------


def phi_auto(dt, T):
    """Apply the automorphism ``(C, v, r) -> (C, v, r + dt v)``."""
    return ExtendedPose(T.C, T.v, T.r + dt * T.v)


def automorphism_matrix(dt):
    """9x9 matrix F with ``phi_auto(dt, exp(xi)) = exp(F xi)``."""
    F = np.eye(9)
    F[6:9, 3:6] = dt * np.eye(3)
    return F


@dataclass(frozen=True)
class AutomorphismF:
    """Duration-tagged automorphism; ``matrix`` materializes F."""

    dt: float

    @property
    def matrix(self):
        return automorphism_matrix(self.dt)

    def __call__(self, T):
        return phi_auto(self.dt, T)

    def __matmul__(self, other):
        return AutomorphismF(self.dt + other.dt)


# ---------------------------------------------------------------------------
# First-order approximations of Gamma_m of a sum
# ---------------------------------------------------------------------------


def bch_gamma_left(m, phi, psi):
    """``Gamma_m(phi + psi) ~= Gamma_0(Gamma_{m+1}(psi) phi) Gamma_m(psi)`` for small ``phi``.

    ``m`` must be 0, 1 or 2 (``Gamma_{m+1}`` has to be available).
    """
    if m not in (0, 1, 2):
        raise ValueError("bch_gamma_left supports m in {0, 1, 2}")
    phi = np.asarray(phi, dtype=float)
    return gamma(0, gamma(m + 1, psi) @ phi) @ gamma(m, psi)


def bch_gamma_right(m, phi, psi):
    """``Gamma_m(phi + psi) ~= Gamma_m(phi) Gamma_0(Gamma_{m+1}(-phi) psi)`` for small ``psi``."""
    if m not in (0, 1, 2):
        raise ValueError("bch_gamma_right supports m in {0, 1, 2}")
    psi = np.asarray(psi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return gamma(m, phi) @ gamma(0, gamma(m + 1, -phi) @ psi)
