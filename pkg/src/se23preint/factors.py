"""
Preintegration factor: residual on SE_2(3), Jacobians with respect to both
endpoint states and the bias increment, and JSON (de)serialization.

The residual is ``r = Log(Upsilon_hat(b)^-1 Upsilon_ij)`` where ``Upsilon_ij``
is the local increment implied by the two states and the global increment,
and ``Upsilon_hat(b)`` is the bias-corrected preintegrated measurement.
States are perturbed on the right, ``T <- T Exp(xi)``.

Jacobians come in two flavors selected by ``exact``:

* ``exact=False`` (default): the small-residual forms
  ``-Ad(Upsilon_ij^-1) F``, ``I`` and ``-J_bias``;
* ``exact=True``: the same with the inverse SE_2(3) Jacobians of the
  residual retained, which makes them first-order exact at any residual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bias_update import BiasJacobian, apply_bias_correction, preintegrate_with_jacobian
from .earth_models import WGS84, FrameVariant
from .increments import (
    GlobalIncrement,
    ImuBias,
    LocalIncrement,
    SchemeKind,
    compose_global,
    global_step,
    local_step,
)
from .propagation import (
    Covariance9,
    NoiseParams,
    PerturbationSide,
    context_for,
    extract_local_increment,
    noise_jacobian_G,
    propagate_cov,
    propagate_state,
    transition_A,
)
from .se23_core import (
    adjoint_inverse,
    automorphism_matrix,
    left_jacobian_inv_se23,
    left_jacobian_se23,
    log_se23,
    right_jacobian_inv_se23,
    skew,
)

__all__ = [
    "SCHEMA_VERSION",
    "PreintegrationFactor",
    "build_factor",
    "residual",
    "jacobian_wrt_Ti",
    "jacobian_wrt_Tj",
    "jacobian_wrt_bias",
    "factor_to_dict",
    "factor_from_dict",
    "factor_to_json",
    "factor_from_json",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class PreintegrationFactor:
    """Everything a smoother needs to evaluate one preintegrated IMU constraint."""

    Upsilon_hat: LocalIncrement
    Sigma: Covariance9
    J_bias: BiasJacobian
    b_bar: ImuBias
    Gamma_ij: GlobalIncrement
    interval: tuple

    def __post_init__(self):
        t_i, t_j = (float(t) for t in self.interval)
        object.__setattr__(self, "interval", (t_i, t_j))
        span = t_j - t_i
        if abs(self.Upsilon_hat.dt - span) > 1e-9 or abs(self.Gamma_ij.dt - span) > 1e-9:
            raise ValueError("factor members cover inconsistent durations")
        if self.Sigma.side is not PerturbationSide.RIGHT_LOCAL:
            raise ValueError("the residual covariance is a right (local) perturbation")

    @property
    def variant(self):
        return self.Gamma_ij.variant

    @property
    def dt(self):
        return self.Gamma_ij.dt


def build_factor(state_i, samples, scheme, noise=None, params=WGS84, Sigma0=None):
    """Preintegrate a window of samples starting at ``state_i``.

    The global increment is composed from per-sample contexts evaluated along
    the mechanized trajectory; ``Upsilon_hat``, its right covariance and the
    bias Jacobian use the state's bias as linearization point.
    """
    samples = list(samples)
    scheme = SchemeKind.parse(scheme)
    noise = noise if noise is not None else NoiseParams()
    b_bar = state_i.bias
    Gamma = GlobalIncrement.identity(state_i.variant, context_for(state_i, params).omega_ie)
    Sigma = Sigma0 if Sigma0 is not None else Covariance9.zeros(PerturbationSide.RIGHT_LOCAL)
    state = state_i
    for s in samples:
        g = global_step(context_for(state, params), s.dt)
        u = local_step(scheme, s, b_bar)
        zoh = u if scheme is SchemeKind.ZERO_ORDER_HOLD else local_step(SchemeKind.ZERO_ORDER_HOLD, s, b_bar)
        Sigma = propagate_cov(
            PerturbationSide.RIGHT_LOCAL,
            Sigma,
            transition_A(PerturbationSide.RIGHT_LOCAL, zoh),
            noise_jacobian_G(s, b_bar),
            noise.Q(s.dt),
        )
        Gamma = g if Gamma.dt == 0.0 else compose_global(g, Gamma)
        state = propagate_state(state, g, u, params)
    U, J = preintegrate_with_jacobian(samples, scheme, b_bar)
    return PreintegrationFactor(U, Sigma, J, b_bar, Gamma, (state_i.epoch, state_i.epoch + U.dt))


# ---------------------------------------------------------------------------
# Residual and Jacobians
# ---------------------------------------------------------------------------


def _check_states(factor, T_i, T_j):
    if not (T_i.variant is T_j.variant is factor.variant):
        raise ValueError("states and factor must share a frame variant")


def _corrected(factor, delta_b):
    delta_b = np.zeros(6) if delta_b is None else np.asarray(delta_b, dtype=float)
    return apply_bias_correction(factor.Upsilon_hat, factor.J_bias, delta_b), delta_b


def residual(factor, T_i, T_j, delta_b=None):
    """9-vector ``Log(Upsilon_hat(b_bar + db)^-1 Upsilon_ij)``."""
    _check_states(factor, T_i, T_j)
    U_hat, _ = _corrected(factor, delta_b)
    U_ij = extract_local_increment(T_i, T_j, factor.Gamma_ij)
    return log_se23(U_hat.as_pose().inverse() @ U_ij.as_pose())


def _velocity_chart(pose, omega):
    # d(auxiliary-state right coordinates) / d(ground-state right coordinates)
    M = np.eye(9)
    M[3:6, 6:9] = skew(pose.C.T @ omega)
    return M


def jacobian_wrt_Ti(factor, T_i, T_j, delta_b=None, exact=False):
    """``dr / dxi_i`` for ``T_i <- T_i Exp(xi_i)``.

    Simplified form ``-Ad(Upsilon_ij^-1) F(dt)``::

        [[-dC^T,          0,         0    ],
         [ dC^T (dv x),  -dC^T,      0    ],
         [ dC^T (dr x),  -dt dC^T,  -dC^T ]]

    ``exact=True`` premultiplies by the inverse right Jacobian of the residual.
    """
    _check_states(factor, T_i, T_j)
    U_ij = extract_local_increment(T_i, T_j, factor.Gamma_ij)
    J = -adjoint_inverse(U_ij.as_pose()) @ automorphism_matrix(factor.dt)
    if exact:
        J = right_jacobian_inv_se23(residual(factor, T_i, T_j, delta_b)) @ J
    if not factor.variant.is_transformed:
        J = J @ _velocity_chart(T_i.pose, factor.Gamma_ij.omega_ie)
    return J


def jacobian_wrt_Tj(factor, T_i, T_j, delta_b=None, exact=False):
    """``dr / dxi_j`` for ``T_j <- T_j Exp(xi_j)``: identity, or ``J_r(r)^-1`` when exact."""
    _check_states(factor, T_i, T_j)
    J = np.eye(9)
    if exact:
        J = right_jacobian_inv_se23(residual(factor, T_i, T_j, delta_b))
    if not factor.variant.is_transformed:
        J = J @ _velocity_chart(T_j.pose, factor.Gamma_ij.gC @ factor.Gamma_ij.omega_ie)
    return J


def jacobian_wrt_bias(factor, T_i, T_j, delta_b=None, exact=False):
    """``dr / d(db)``: ``-J_bias``, or ``-J_l(r)^-1 J_r(J_bias db) J_bias`` when exact."""
    _check_states(factor, T_i, T_j)
    Jb = factor.J_bias.matrix
    if not exact:
        return -Jb
    _, db = _corrected(factor, delta_b)
    r = residual(factor, T_i, T_j, db)
    a = Jb @ db
    return -left_jacobian_inv_se23(r) @ left_jacobian_se23(-a) @ Jb


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _mat(a):
    return [[float(x) for x in row] for row in np.asarray(a)]


def _vec(a):
    return [float(x) for x in np.asarray(a)]


def factor_to_dict(factor):
    U, G = factor.Upsilon_hat, factor.Gamma_ij
    return {
        "schema_version": SCHEMA_VERSION,
        "interval": list(factor.interval),
        "variant": factor.variant.value,
        "upsilon": {"dC": _mat(U.dC), "dv": _vec(U.dv), "dr": _vec(U.dr), "dt": U.dt, "scheme": U.scheme.value},
        "sigma": {"side": factor.Sigma.side.value, "matrix": _mat(factor.Sigma.matrix)},
        "J_bias": _mat(factor.J_bias.matrix),
        "b_bar": {"b_g": _vec(factor.b_bar.b_g), "b_a": _vec(factor.b_bar.b_a)},
        "gamma": {"gC": _mat(G.gC), "gv": _vec(G.gv), "gr": _vec(G.gr), "dt": G.dt, "omega_ie": _vec(G.omega_ie), "gC_delta": _mat(G.gC_delta)},
    }


def factor_from_dict(d):
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported factor schema version {d.get('schema_version')!r}")
    u, g = d["upsilon"], d["gamma"]
    b_bar = ImuBias(d["b_bar"]["b_g"], d["b_bar"]["b_a"])
    variant = FrameVariant.parse(d["variant"])
    return PreintegrationFactor(
        LocalIncrement(u["dC"], u["dv"], u["dr"], u["dt"], SchemeKind.parse(u["scheme"])),
        Covariance9(d["sigma"]["matrix"], d["sigma"]["side"]),
        BiasJacobian(d["J_bias"], b_bar),
        b_bar,
        GlobalIncrement(g["gC"], g["gv"], g["gr"], g["dt"], variant, g["omega_ie"], g.get("gC_delta")),
        tuple(d["interval"]),
    )


def factor_to_json(factor, **kwargs):
    """JSON text; floats are written as their shortest round-trip decimal."""
    return json.dumps(factor_to_dict(factor), **kwargs)


def factor_from_json(text):
    return factor_from_dict(json.loads(text))
