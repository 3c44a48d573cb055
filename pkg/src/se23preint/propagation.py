"""
Full-state propagation ``T_j = Gamma * Phi(T_i) * Upsilon`` and covariance
propagation for right (body-local) and left (common-frame) perturbations.

Error conventions
-----------------
Right: ``T = T_hat Exp(xi)``.  Left: ``T = Exp(xi) T_hat``.  Tangent order is
(attitude, velocity, position). IMU noise enters as ``true = measured - eta``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .earth_models import (
    WGS84,
    FrameVariant,
    GeodeticPosition,
    earth_rate_n,
    from_transformed_velocity,
    kinematic_context,
    llh_rates,
    to_transformed_velocity,
)
from .increments import (
    GlobalIncrement,
    ImuBias,
    LocalIncrement,
    SchemeKind,
    gamma_prime,
    global_step,
    local_step,
)
from .se23_core import ExtendedPose, adjoint, adjoint_inverse, automorphism_matrix, gamma, skew

__all__ = [
    "PerturbationSide",
    "NoiseParams",
    "NavState",
    "Covariance9",
    "CovarianceStep",
    "NonPSDError",
    "context_for",
    "propagate_state",
    "extract_local_increment",
    "mechanize",
    "noise_jacobian_G",
    "transition_A",
    "left_noise_input",
    "propagate_cov",
    "transition_product",
    "batch_covariance",
    "right_to_left",
    "left_to_right",
    "symmetrize_psd",
]


class NonPSDError(ValueError):
    """Raised when a covariance or noise matrix has a clearly negative eigenvalue."""


class PerturbationSide(enum.Enum):
    RIGHT_LOCAL = "RightLocal"
    LEFT_COMMON_FRAME = "LeftCommonFrame"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).lower()
        for member in cls:
            short = "right" if member is cls.RIGHT_LOCAL else "left"
            if key in (member.value.lower(), member.name.lower(), short):
                return member
        raise ValueError(f"unknown perturbation side {text!r}")


@dataclass(frozen=True)
class NoiseParams:
    """White-noise densities and bias-process parameters.

    ``gyro_psd`` in rad^2/s and ``accel_psd`` in m^2/s^3 (squares of the usual
    rad/s/sqrt(Hz) and m/s^2/sqrt(Hz) figures).
    """

    gyro_psd: float = 0.0
    accel_psd: float = 0.0
    gyro_bias_sigma: float = 0.0
    accel_bias_sigma: float = 0.0
    bias_tau: float = float("inf")

    def __post_init__(self):
        for name in ("gyro_psd", "accel_psd", "gyro_bias_sigma", "accel_bias_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.bias_tau > 0:
            raise ValueError("bias_tau must be positive")

    def Q(self, dt):
        """Discrete 6x6 noise covariance ``diag(gyro_psd I, accel_psd I) / dt``."""
        return np.diag([self.gyro_psd] * 3 + [self.accel_psd] * 3) / float(dt)


@dataclass(frozen=True, eq=False)
class NavState:
    """Navigation state in one frame variant.

    ``geodetic`` is the latitude/longitude/height anchor used by the NED
    variants to evaluate rates and gravity; it is ``None`` for ECEF variants.
    """

    pose: ExtendedPose
    variant: FrameVariant
    epoch: float = 0.0
    bias: ImuBias = field(default_factory=ImuBias)
    geodetic: GeodeticPosition | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", FrameVariant.parse(self.variant))
        if self.variant.is_ned and self.geodetic is None:
            raise ValueError("NED-family states need a geodetic anchor")


@dataclass(frozen=True, eq=False)
class Covariance9:
    """Symmetric PSD 9x9 covariance tagged with its perturbation side."""

    matrix: np.ndarray
    side: PerturbationSide

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.shape != (9, 9):
            raise ValueError("covariance must be 9x9")
        if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * max(1.0, float(np.max(np.abs(M)))):
            raise ValueError("covariance is not symmetric")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "side", PerturbationSide.parse(self.side))

    @classmethod
    def zeros(cls, side):
        return cls(np.zeros((9, 9)), side)


@dataclass(frozen=True, eq=False)
class CovarianceStep:
    """Per-step ingredients for :func:`batch_covariance`.

    ``G`` is the effective noise input: the plain 9x6 noise Jacobian for the
    right side, or ``Ad(T_next) G`` for the left side.
    """

    A: np.ndarray
    G: np.ndarray
    Q: np.ndarray


def symmetrize_psd(S, tol=1e-12):
    """Symmetrize and clip tiny negative eigenvalues.

    Eigenvalues above ``-tol * max(1, lambda_max)`` are clipped to zero;
    anything more negative raises :class:`NonPSDError`.
    """
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    floor = -tol * max(1.0, float(np.max(np.abs(w))))
    if w[0] < floor:
        raise NonPSDError(f"matrix has eigenvalue {w[0]!r} below {floor!r}")
    if w[0] < 0.0:
        S = (V * np.clip(w, 0.0, None)) @ V.T
        S = 0.5 * (S + S.T)
    return S


# ---------------------------------------------------------------------------
# State propagation
# ---------------------------------------------------------------------------


def context_for(state, params=WGS84):
    return kinematic_context(state.variant, state.pose, state.geodetic, params)


def _check_interval(a, b):
    if abs(a - b) > 1e-9:
        raise ValueError(f"global and local increments cover different intervals ({a} vs {b})")


def _advance_geodetic(geo, v_i, v_j, dt, params):
    # Heun step on the latitude/longitude/height rates.
    rate_i = llh_rates(geo, v_i, params)
    pred = GeodeticPosition(*(np.array([geo.lat, geo.lon, geo.h]) + dt * rate_i))
    rate_j = llh_rates(pred, v_j, params)
    return GeodeticPosition(*(np.array([geo.lat, geo.lon, geo.h]) + 0.5 * dt * (rate_i + rate_j)))


def propagate_state(T_i, Gamma, Upsilon, params=WGS84):
    """Propagate a state over one interval (or a preintegrated window).

    For the untransformed variants the velocity is switched to the auxiliary
    velocity with the interval-start earth rate ``Gamma.omega_ie``, propagated,
    and switched back at the end position with the earth rate carried into the
    end frame, ``Gamma.gC @ Gamma.omega_ie`` (the shifted global increment of
    :func:`gamma_prime`). In ECEF axes the two earth rates coincide.
    """
    if Gamma.variant is not T_i.variant:
        raise ValueError(f"state is {T_i.variant.value} but increment is {Gamma.variant.value}")
    _check_interval(Gamma.dt, Upsilon.dt)
    dt = Gamma.dt
    C_i, v_i, r_i = T_i.pose.C, T_i.pose.v, T_i.pose.r
    if not T_i.variant.is_transformed:
        v_i = to_transformed_velocity(v_i, r_i, Gamma.omega_ie)
    gC, D = Gamma.gC, Gamma.gC_delta
    C_j = gC @ C_i @ Upsilon.dC
    # r_j = gC (C_i dr + r_i + dt v_i) + gr, accumulated as r_i + (small terms)
    r_j = r_i + (D @ r_i + gC @ (C_i @ Upsilon.dr + dt * v_i) + Gamma.gr)
    gv = Gamma.gv
    if not T_i.variant.is_transformed:
        gv = gamma_prime(T_i.variant, Gamma, r_j).gv
    v_j = v_i + (D @ v_i + gC @ (C_i @ Upsilon.dv) + gv)
    geo = T_i.geodetic
    if geo is not None:
        vg_i, vg_j = T_i.pose.v, v_j
        if T_i.variant.is_transformed:
            vg_i = from_transformed_velocity(vg_i, r_i, earth_rate_n(geo, params))
            vg_j = from_transformed_velocity(vg_j, r_j, gC @ Gamma.omega_ie)
        geo = _advance_geodetic(geo, vg_i, vg_j, dt, params)
    return NavState(ExtendedPose(C_j, v_j, r_j), T_i.variant, T_i.epoch + dt, T_i.bias, geo)


def extract_local_increment(T_i, T_j, Gamma, scheme=SchemeKind.ZERO_ORDER_HOLD):
    """Local increment implied by two states and the global increment between them."""
    if not (T_i.variant is T_j.variant is Gamma.variant):
        raise ValueError("states and global increment must share a frame variant")
    dt = Gamma.dt
    C_i, v_i, r_i = T_i.pose.C, T_i.pose.v, T_i.pose.r
    v_j, r_j = T_j.pose.v, T_j.pose.r
    if not T_i.variant.is_transformed:
        v_i = to_transformed_velocity(v_i, r_i, Gamma.omega_ie)
        v_j = to_transformed_velocity(v_j, r_j, Gamma.gC @ Gamma.omega_ie)
    Dt = Gamma.gC_delta.T
    Cit = C_i.T
    dC = Cit @ Gamma.gC.T @ T_j.pose.C
    # gC^T x - y == (x - y) + (gC - I)^T x, with the large parts cancelling first
    dv = Cit @ ((v_j - v_i) - Gamma.gv + Dt @ (v_j - Gamma.gv))
    dr = Cit @ ((r_j - r_i) - Gamma.gr + Dt @ (r_j - Gamma.gr) - dt * v_i)
    return LocalIncrement(dC, dv, dr, dt, scheme)


def mechanize(state, samples, scheme, params=WGS84, keep_history=False):
    """Per-sample fold: evaluate the context, step Gamma and Upsilon, propagate.

    Returns the final state, or the list of all states when ``keep_history``.
    """
    scheme = SchemeKind.parse(scheme)
    history = [state] if keep_history else None
    for s in samples:
        Gamma = global_step(context_for(state, params), s.dt)
        Upsilon = local_step(scheme, s, state.bias)
        state = propagate_state(state, Gamma, Upsilon, params)
        if keep_history:
            history.append(state)
    return history if keep_history else state


# ---------------------------------------------------------------------------
# Covariance propagation
# ---------------------------------------------------------------------------


def noise_jacobian_G(sample, bias=None, dt=None):
    """9x6 map from ``[eta_gyro; eta_accel]`` to the one-step increment error.

    Uses the bias-corrected rates ``w = w_hat - b_g``, ``f = f_hat - b_a`` and
    ``Gamma_m = Gamma_m(w dt)``, ``Gamma_m^- = Gamma_m(-w dt)``::

        [[-G0^T G1 dt,                    0              ],
         [ G0^T G1 (f x) G2^- dt^2,      -G0^T G1 dt     ],
         [ G0^T G2 (f x) G3^- dt^3,      -G0^T G2 dt^2   ]]

    The gyro blocks of the velocity/position rows rest on a first-order
    splitting of ``Gamma_m(a + b)`` and carry a relative error of order
    ``|w| dt`` against exact differentiation.
    """
    w, f = sample.corrected_rates(bias)
    dt = sample.dt if dt is None else float(dt)
    phi = w * dt
    G0t = gamma(0, phi).T
    G1 = gamma(1, phi)
    G2 = gamma(2, phi)
    F = skew(f)
    G0tG1 = G0t @ G1
    G0tG2 = G0t @ G2
    out = np.zeros((9, 6))
    out[0:3, 0:3] = -G0tG1 * dt
    out[3:6, 0:3] = G0tG1 @ F @ gamma(2, -phi) * dt * dt
    out[3:6, 3:6] = -G0tG1 * dt
    out[6:9, 0:3] = G0tG2 @ F @ gamma(3, -phi) * dt**3
    out[6:9, 3:6] = -G0tG2 * dt * dt
    return out


def transition_A(side, increment):
    """One-step 9x9 error transition.

    RightLocal needs the step's local increment: ``A = Ad(Upsilon^-1) F(dt)``.
    LeftCommonFrame needs the step's global increment: ``A = Ad(Gamma) F(dt)``;
    it involves no accelerometer quantity at all.
    """
    side = PerturbationSide.parse(side)
    F = automorphism_matrix(increment.dt)
    if side is PerturbationSide.RIGHT_LOCAL:
        if not isinstance(increment, LocalIncrement):
            raise TypeError("RightLocal transition needs a LocalIncrement")
        return adjoint_inverse(increment.as_pose()) @ F
    if not isinstance(increment, GlobalIncrement):
        raise TypeError("LeftCommonFrame transition needs a GlobalIncrement")
    return adjoint(increment.as_pose()) @ F


def left_noise_input(T_next, G):
    """``Ad(T_next) G``: the noise map of the left-perturbation recursion."""
    pose = T_next.pose if isinstance(T_next, NavState) else T_next
    return adjoint(pose) @ G


def _check_psd(Q):
    Q = np.asarray(Q, dtype=float)
    if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(Q)))):
        raise NonPSDError("noise covariance is not symmetric")
    w = np.linalg.eigvalsh(Q)
    if w[0] < -1e-12 * max(1.0, float(np.max(np.abs(w)))):
        raise NonPSDError("noise covariance is not positive semi-definite")
    return Q


def propagate_cov(side, Sigma, A, G, Q, T_next=None):
    """``Sigma' = A Sigma A^T + N Q N^T`` with ``N = G`` (right) or ``Ad(T_next) G`` (left)."""
    side = PerturbationSide.parse(side)
    if Sigma.side is not side:
        raise ValueError(f"covariance is tagged {Sigma.side.value}, propagation requested {side.value}")
    Q = _check_psd(Q)
    N = np.asarray(G, dtype=float)
    if side is PerturbationSide.LEFT_COMMON_FRAME:
        if T_next is None:
            raise ValueError("left propagation needs the propagated state for the adjoint wrapping")
        N = left_noise_input(T_next, N)
    S = A @ Sigma.matrix @ A.T + N @ Q @ N.T
    return Covariance9(symmetrize_psd(S), side)


def transition_product(As, i, j):
    """``A_i^j = A_j ... A_i`` (identity when ``j < i``)."""
    P = np.eye(9)
    for k in range(i, j + 1):
        P = As[k] @ P
    return P


def batch_covariance(Sigma_i, steps):
    """Closed sum over a window of steps.

    ``Sigma_j = A_0^{n-1} Sigma_i (.)^T + sum_k A_{k+1}^{n-1} G_k Q_k G_k^T (.)^T``
    evaluated with suffix products of the transitions.
    """
    steps = list(steps)
    if not steps:
        return Sigma_i
    S = np.zeros((9, 9))
    suffix = np.eye(9)  # A_{k+1}^{n-1}
    for step in reversed(steps):
        M = suffix @ step.G
        S += M @ _check_psd(step.Q) @ M.T
        suffix = suffix @ step.A
    S += suffix @ Sigma_i.matrix @ suffix.T
    return Covariance9(symmetrize_psd(S), Sigma_i.side)


def right_to_left(Sigma, pose):
    """Re-express a right-perturbation covariance as a left one: ``Ad_T Sigma Ad_T^T``."""
    if Sigma.side is not PerturbationSide.RIGHT_LOCAL:
        raise ValueError("expected a RightLocal covariance")
    Ad = adjoint(pose)
    return Covariance9(symmetrize_psd(Ad @ Sigma.matrix @ Ad.T), PerturbationSide.LEFT_COMMON_FRAME)


def left_to_right(Sigma, pose):
    if Sigma.side is not PerturbationSide.LEFT_COMMON_FRAME:
        raise ValueError("expected a LeftCommonFrame covariance")
    Ad = adjoint_inverse(pose)
    return Covariance9(symmetrize_psd(Ad @ Sigma.matrix @ Ad.T), PerturbationSide.RIGHT_LOCAL)
