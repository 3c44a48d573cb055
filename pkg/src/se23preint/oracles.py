"""
Brute-force reference integrators used by the verification suite.

Everything here integrates the continuous-time kinematics with a plain
fixed-step classical Runge-Kutta scheme and shares no code with the closed
forms it is meant to check (apart from the ellipsoid/gravity helpers, which
define the problem rather than its solution).
"""

from __future__ import annotations

import numpy as np

from .earth_models import (
    WGS84,
    GeodeticPosition,
    earth_rate_e,
    earth_rate_n,
    gravity_e,
    gravity_n,
    llh_rates,
    transport_rate_n,
)
from .se23_core import ExtendedPose

__all__ = ["rk4", "rk4_global_increment", "rk4_local_increment", "integrate_kinematics"]


def _cross_mat(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def rk4(rhs, y0, t0, t1, n):
    """Integrate ``y' = rhs(t, y)`` with ``n`` classical RK4 steps."""
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / n
    t = t0
    for _ in range(n):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return y


def _unpack(y):
    return y[:9].reshape(3, 3), y[9:12], y[12:15]


def _pack(C, v, r, extra=()):
    return np.concatenate([C.ravel(), v, r, np.asarray(extra, float)])


def rk4_global_increment(omega, G, duration, n):
    """Solve ``C' = -w x C``, ``v' = -w x v + G``, ``r' = -w x r + v`` from identity."""
    W = _cross_mat(np.asarray(omega, float))
    G = np.asarray(G, float)

    def rhs(t, y):
        C, v, r = _unpack(y)
        return _pack(-W @ C, -W @ v + G, -W @ r + v)

    C, v, r = _unpack(rk4(rhs, _pack(np.eye(3), np.zeros(3), np.zeros(3)), 0.0, duration, n))
    return C, v.copy(), r.copy()


def rk4_local_increment(omega_b, f_b, duration, n):
    """Solve ``C' = C (w x)``, ``v' = C f``, ``r' = v`` from identity, inputs as callables or constants."""
    w_fun = omega_b if callable(omega_b) else (lambda t, w=np.asarray(omega_b, float): w)
    f_fun = f_b if callable(f_b) else (lambda t, f=np.asarray(f_b, float): f)

    def rhs(t, y):
        C, v, r = _unpack(y)
        return _pack(C @ _cross_mat(w_fun(t)), C @ f_fun(t), v)

    C, v, r = _unpack(rk4(rhs, _pack(np.eye(3), np.zeros(3), np.zeros(3)), 0.0, duration, n))
    return C, v.copy(), r.copy()


def _kinematics_rhs(variant, omega_b, f_b, params):
    ned = variant.is_ned
    transformed = variant.is_transformed
    Wb = _cross_mat(omega_b)

    def rhs(t, y):
        C, v, r = _unpack(y)
        if ned:
            geo = GeodeticPosition(y[15], y[16], y[17])
            w_ie = earth_rate_n(geo, params)
            v_ground = v - np.cross(w_ie, r) if transformed else v
            w_en = transport_rate_n(geo, v_ground, params)
            w_in = w_ie + w_en
            g = gravity_n(geo, params)
            dC = C @ Wb - _cross_mat(w_in) @ C
            if transformed:
                G = g + np.cross(w_ie, np.cross(w_ie, r))
                dv = C @ f_b - np.cross(w_in, v) + G
                dr = -np.cross(w_in, r) + v
            else:
                dv = C @ f_b - np.cross(2.0 * w_ie + w_en, v) + g
                dr = -np.cross(w_en, r) + v
            return _pack(dC, dv, dr, llh_rates(geo, v_ground, params))
        w_ie = earth_rate_e(params)
        g = gravity_e(r, params)
        dC = C @ Wb - _cross_mat(w_ie) @ C
        if transformed:
            G = g + np.cross(w_ie, np.cross(w_ie, r))
            dv = C @ f_b - np.cross(w_ie, v) + G
            dr = -np.cross(w_ie, r) + v
        else:
            dv = C @ f_b - 2.0 * np.cross(w_ie, v) + g
            dr = v
        return _pack(dC, dv, dr)

    return rhs


def integrate_kinematics(state, samples, substeps=4, params=WGS84):
    """Direct integration of the full, state-dependent navigation equations.

    Each IMU sample's mean rates are held constant over its interval (zero-order
    hold) and the interval is covered by ``substeps`` RK4 steps. Rates,
    gravity and (for NED variants) the geodetic position are re-evaluated at
    every stage.

    Returns
    -------
    pose : ExtendedPose
        Final pose (not re-orthonormalized).
    geodetic : GeodeticPosition or None
    """
    variant = state.variant
    pose = state.pose
    extra = ()
    if variant.is_ned:
        g0 = state.geodetic
        extra = (g0.lat, g0.lon, g0.h)
    y = _pack(pose.C, pose.v, pose.r, extra)
    t = state.epoch
    for s in samples:
        w, f = s.corrected_rates(state.bias)
        y = rk4(_kinematics_rhs(variant, w, f, params), y, t, t + s.dt, substeps)
        t += s.dt
    C, v, r = _unpack(y)
    geo = GeodeticPosition(y[15], y[16], y[17]) if variant.is_ned else None
    return ExtendedPose(C, v.copy(), r.copy()), geo
