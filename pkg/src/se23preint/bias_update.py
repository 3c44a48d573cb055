"""
First-order bias update of a preintegrated local increment.

With the biases held constant over the window, a bias change ``db`` acts
on the increment like the measurement noise does, so

    Upsilon(b_bar + db) ~= Upsilon(b_bar) Exp(J db)

where the 9x6 Jacobian ``J`` (rows attitude/velocity/position, columns gyro
bias/accel bias) obeys ``J <- A J + G`` step by step. The closed form below
evaluates the same quantity as explicit window sums built from the rotation
prefix products ``P_k = dC_0 ... dC_{k-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .increments import ImuBias, LocalIncrement, SchemeKind, compose_local, local_step
from .propagation import PerturbationSide, noise_jacobian_G, transition_A
from .se23_core import exp_se23, gamma, skew

__all__ = [
    "ImuBias",
    "BiasJacobian",
    "bias_jacobian_recursive",
    "bias_jacobian_closed_form",
    "apply_bias_correction",
    "preintegrate_with_jacobian",
]


@dataclass(frozen=True, eq=False)
class BiasJacobian:
    """9x6 matrix ``dUpsilon/db`` together with its linearization bias."""

    matrix: np.ndarray
    b_bar: ImuBias = field(default_factory=ImuBias)

    def __post_init__(self):
        J = np.array(self.matrix, dtype=float)
        if J.shape != (9, 6):
            raise ValueError("bias Jacobian must be 9x6")
        if np.any(J[0:3, 3:6] != 0.0):
            raise ValueError("attitude rows must not depend on the accelerometer bias")
        J.setflags(write=False)
        object.__setattr__(self, "matrix", J)

    @classmethod
    def zeros(cls, b_bar=None):
        return cls(np.zeros((9, 6)), b_bar if b_bar is not None else ImuBias())


def bias_jacobian_recursive(prev, A_step, G_step):
    """One step of ``J <- A J + G`` (right-perturbation transition and noise map)."""
    J = A_step @ prev.matrix + G_step
    J[0:3, 3:6] = 0.0
    return BiasJacobian(J, prev.b_bar)


def bias_jacobian_closed_form(samples, b_bar=None):
    """Bias Jacobian of a whole window from explicit sums.

    With ``F(k, n) = dC_k ... dC_{n-1} = P_k^T P_n`` and the bias-corrected
    rates ``w_k``, ``f_k``::

        dA/dbg = -sum_k F(k+1,n)^T Gamma_1(-w_k dt) dt
        dB/dba = -sum_k F(k,n)^T Gamma_1 dt
        dB/dbg =  sum_k F(k,n)^T [-(Gamma_1 f_k dt) x dA_k + Gamma_1 (f_k x) Gamma_2^- dt^2]
        dC/dba =  sum_k F(k,n)^T [-Gamma_2 dt^2 + dB_k/dba dt]
        dC/dbg =  sum_k F(k,n)^T [-(Gamma_2 f_k dt^2) x dA_k + Gamma_2 (f_k x) Gamma_3^- dt^3 + dB_k/dbg dt]

    where ``dA_k``, ``dB_k`` are the same quantities over the partial window
    ending at sample ``k`` (themselves evaluated as ``P_k^T`` times a running
    sum), ``Gamma_m = Gamma_m(w_k dt)`` and ``Gamma_m^- = Gamma_m(-w_k dt)``.
    """
    samples = list(samples)
    b_bar = b_bar if b_bar is not None else ImuBias()
    if not samples:
        return BiasJacobian.zeros(b_bar)
    P = np.eye(3)
    # running sums of P_m X_m; the partial-window Jacobian is P_k^T times the sum
    S_ag = np.zeros((3, 3))
    S_vg = np.zeros((3, 3))
    S_va = np.zeros((3, 3))
    S_rg = np.zeros((3, 3))
    S_ra = np.zeros((3, 3))
    for s in samples:
        w, f = s.corrected_rates(b_bar)
        dt = s.dt
        phi = w * dt
        G0 = gamma(0, phi)
        G1 = gamma(1, phi)
        G2 = gamma(2, phi)
        Pt = P.T
        dA_g = Pt @ S_ag
        dB_g = Pt @ S_vg
        dB_a = Pt @ S_va
        F = skew(f)
        dv = G1 @ f * dt
        dr = G2 @ f * dt * dt
        S_rg = S_rg + P @ (-skew(dr) @ dA_g + G2 @ F @ gamma(3, -phi) * dt**3 + dB_g * dt)
        S_ra = S_ra + P @ (-G2 * dt * dt + dB_a * dt)
        S_vg = S_vg + P @ (-skew(dv) @ dA_g + G1 @ F @ gamma(2, -phi) * dt * dt)
        S_va = S_va - P @ G1 * dt
        P_next = P @ G0
        S_ag = S_ag - P_next @ gamma(1, -phi) * dt
        P = P_next
    Pt = P.T
    J = np.zeros((9, 6))
    J[0:3, 0:3] = Pt @ S_ag
    J[3:6, 0:3] = Pt @ S_vg
    J[3:6, 3:6] = Pt @ S_va
    J[6:9, 0:3] = Pt @ S_rg
    J[6:9, 3:6] = Pt @ S_ra
    return BiasJacobian(J, b_bar)


def apply_bias_correction(Upsilon_bar, J, delta_b):
    """``Upsilon_bar * Exp(J db)``; accurate while ``db`` stays in the first-order regime."""
    delta_b = np.asarray(delta_b, dtype=float)
    if delta_b.shape != (6,):
        raise ValueError("bias increment must be a 6-vector (gyro, accel)")
    matrix = J.matrix if isinstance(J, BiasJacobian) else np.asarray(J, float)
    T = Upsilon_bar.as_pose() @ exp_se23(matrix @ delta_b)
    return LocalIncrement(T.C, T.v, T.r, Upsilon_bar.dt, Upsilon_bar.scheme)


def preintegrate_with_jacobian(samples, scheme, b_bar=None):
    """Fold a window into ``(Upsilon, BiasJacobian)`` with the recursive Jacobian.

    The per-step Jacobian ingredients always come from the zero-order-hold
    closed forms; for the other schemes this is an approximation.
    """
    scheme = SchemeKind.parse(scheme)
    b_bar = b_bar if b_bar is not None else ImuBias()
    U = LocalIncrement.identity(scheme)
    J = BiasJacobian.zeros(b_bar)
    for s in samples:
        step = local_step(scheme, s, b_bar)
        zoh = step if scheme is SchemeKind.ZERO_ORDER_HOLD else local_step(SchemeKind.ZERO_ORDER_HOLD, s, b_bar)
        J = bias_jacobian_recursive(J, transition_A(PerturbationSide.RIGHT_LOCAL, zoh), noise_jacobian_G(s, b_bar))
        U = compose_local(U, step)
    return U, J
