"""
Analytic ground-truth motions.

Every trajectory exposes the earth-relative kinematics in ECEF axes at any
time ``t`` in closed form: body attitude ``C_eb``, body rate relative to the
earth ``omega_eb^b``, position, velocity and acceleration. The ideal IMU
outputs follow from these by adding earth rate, Coriolis and gravity, so the
truth never passes through a numerical integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from ..earth_models import (
    WGS84,
    FrameVariant,
    GeodeticPosition,
    dcm_ecef_to_ned,
    earth_rate_e,
    earth_rate_n,
    ecef_to_geodetic,
    geodetic_to_ecef,
    gravity_e,
    to_transformed_velocity,
)
from ..increments import ImuBias
from ..propagation import NavState
from ..se23_core import ExtendedPose, exp_so3, gamma

__all__ = [
    "TruthPoint",
    "Trajectory",
    "Static",
    "ConstantTwist",
    "Coning",
    "GreatCircle",
    "attitude_from_euler",
    "truth_state",
    "ideal_imu",
    "start_geodetic",
]


def attitude_from_euler(roll, pitch, yaw):
    """Body-to-NED rotation ``C_nb`` from aerospace Z-Y-X Euler angles (rad)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    Rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    Ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return Rz @ Ry @ Rx


@dataclass(frozen=True, eq=False)
class TruthPoint:
    """Earth-relative kinematics at one instant, ECEF axes."""

    t: float
    C_eb: np.ndarray
    omega_eb_b: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Base class: start point, initial attitude, duration and IMU rate.

    ``start`` is the geodetic start point and ``rpy`` the initial roll, pitch
    and yaw of the body with respect to the local NED frame (rad).
    """

    duration: float
    rate_hz: float
    start: GeodeticPosition = field(default_factory=lambda: GeodeticPosition(0.0, 0.0, 0.0))
    rpy: tuple = (0.0, 0.0, 0.0)
    params: object = WGS84

    kind = "Trajectory"

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError("trajectory duration must be positive")
        if not self.rate_hz > 0.0:
            raise ValueError("IMU rate must be positive")
        top = self.max_frequency()
        if self.rate_hz < 2.0 * top:
            raise ValueError(
                f"IMU rate {self.rate_hz} Hz is below twice the highest motion frequency ({top:.6g} Hz)"
            )

    # -- to be provided by subclasses -------------------------------------
    def max_frequency(self):
        return 0.0

    def _tangent_motion(self, t):
        """``(C_tb, omega_b, p_t, v_t, a_t)`` in the earth-fixed start NED frame."""
        raise NotImplementedError

    def describe(self):
        return {
            "kind": self.kind,
            "duration": float(self.duration),
            "rate_hz": float(self.rate_hz),
            "start": {"lat": self.start.lat, "lon": self.start.lon, "h": self.start.h},
            "rpy": [float(x) for x in self.rpy],
        }

    # -- shared --------------------------------------------------------------
    @property
    def dt(self):
        return 1.0 / self.rate_hz

    @property
    def n_samples(self):
        return int(round(self.duration * self.rate_hz))

    @cached_property
    def C_et(self):
        return dcm_ecef_to_ned(self.start.lat, self.start.lon).T

    @cached_property
    def C_tb0(self):
        return attitude_from_euler(*self.rpy)

    @cached_property
    def p0(self):
        return geodetic_to_ecef(self.start, self.params)

    def at(self, t):
        C_tb, w_b, p_t, v_t, a_t = self._tangent_motion(float(t))
        C_et = self.C_et
        return TruthPoint(float(t), C_et @ C_tb, w_b, self.p0 + C_et @ p_t, C_et @ v_t, C_et @ a_t)


@dataclass(frozen=True, eq=False)
class Static(Trajectory):
    kind = "Static"

    def _tangent_motion(self, t):
        z = np.zeros(3)
        return self.C_tb0, z, z, z, z


@dataclass(frozen=True, eq=False)
class ConstantTwist(Trajectory):
    """Constant body angular rate ``omega_b`` (rad/s) and body velocity ``v_b`` (m/s).

    The motion is expressed in the earth-fixed NED frame of the start point, so
    ``C_tb(t) = C_tb0 Exp(omega_b t)`` and ``p_t(t) = C_tb0 Gamma_1(omega_b t) v_b t``.
    """

    omega_b: tuple = (0.0, 0.0, 0.0)
    v_b: tuple = (0.0, 0.0, 0.0)

    kind = "ConstantTwist"

    def max_frequency(self):
        return float(np.linalg.norm(self.omega_b)) / (2.0 * math.pi)

    def _tangent_motion(self, t):
        w = np.asarray(self.omega_b, float)
        vb = np.asarray(self.v_b, float)
        C0 = self.C_tb0
        C = C0 @ exp_so3(w * t)
        return C, w, C0 @ gamma(1, w * t) @ vb * t, C @ vb, C @ np.cross(w, vb)

    def describe(self):
        return {**super().describe(), "omega_b": list(map(float, self.omega_b)), "v_b": list(map(float, self.v_b))}


@dataclass(frozen=True, eq=False)
class Coning(Trajectory):
    """Classical coning: rotation vector ``beta [0, cos(W t + p), sin(W t + p)]``.

    The attitude is ``C_tb0 Exp(psi(t))`` at a fixed location, with body rate
    ``J_r(psi) dpsi/dt``.
    """

    amplitude: float = 0.0
    frequency: float = 1.0
    phase: float = 0.0

    kind = "Coning"

    def max_frequency(self):
        return abs(float(self.frequency))

    def psi(self, t):
        a = 2.0 * math.pi * self.frequency * t + self.phase
        return self.amplitude * np.array([0.0, math.cos(a), math.sin(a)])

    def _tangent_motion(self, t):
        W = 2.0 * math.pi * self.frequency
        a = W * t + self.phase
        psi = self.psi(t)
        dpsi = self.amplitude * W * np.array([0.0, -math.sin(a), math.cos(a)])
        w = gamma(1, -psi) @ dpsi
        z = np.zeros(3)
        return self.C_tb0 @ exp_so3(psi), w, z, z, z

    def describe(self):
        return {**super().describe(), "amplitude": float(self.amplitude), "frequency": float(self.frequency), "phase": float(self.phase)}


@dataclass(frozen=True, eq=False)
class GreatCircle(Trajectory):
    """Constant-speed travel on a geocentric great circle of the given radius.

    The circle lies in the plane of the start point's geocentric direction and
    the initial heading (the yaw of ``rpy``). The body x axis points along the
    velocity and the z axis toward the earth's center; ``radius=None`` uses the
    start point's geocentric distance. Roll and pitch in ``rpy`` are ignored.
    """

    speed: float = 0.0
    radius: float | None = None

    kind = "GreatCircle"

    def _radius(self):
        return float(np.linalg.norm(self.p0)) if self.radius is None else float(self.radius)

    def max_frequency(self):
        return abs(self.speed) / self._radius() / (2.0 * math.pi)

    def _basis(self):
        p0 = self.p0
        u = p0 / np.linalg.norm(p0)
        yaw = self.rpy[2]
        d = self.C_et @ np.array([math.cos(yaw), math.sin(yaw), 0.0])
        w = d - (d @ u) * u
        return u, w / np.linalg.norm(w)

    def at(self, t):
        t = float(t)
        u, w = self._basis()
        R = self._radius()
        rate = self.speed / R
        th = rate * t
        c, s = math.cos(th), math.sin(th)
        radial = c * u + s * w
        along = -s * u + c * w
        x = along if self.speed >= 0 else -along
        z = -radial
        y = np.cross(z, x)
        C_eb = np.column_stack([x, y, z])
        omega_eb_b = C_eb.T @ (rate * np.cross(u, w))
        return TruthPoint(t, C_eb, omega_eb_b, R * radial, self.speed * along, -self.speed * rate * radial)

    def describe(self):
        return {**super().describe(), "speed": float(self.speed), "radius": None if self.radius is None else float(self.radius)}


@lru_cache(maxsize=4096)
def _gravity_at(p, params):
    g = gravity_e(np.array(p), params)
    g.setflags(write=False)
    return g


def ideal_imu(traj, t):
    """Error-free angular rate and specific force (body axes) at time ``t``."""
    pt = traj.at(t)
    w = earth_rate_e(traj.params)
    C_be = pt.C_eb.T
    omega = pt.omega_eb_b + C_be @ w
    v = pt.v
    coriolis = 2.0 * np.array([w[1] * v[2] - w[2] * v[1], w[2] * v[0] - w[0] * v[2], w[0] * v[1] - w[1] * v[0]])
    f = C_be @ (pt.a + coriolis - _gravity_at(tuple(pt.p), traj.params))
    return omega, f


def truth_state(point, variant, params=WGS84, epoch=None, bias=None):
    """The navigation state of ``point`` expressed in one frame variant."""
    variant = FrameVariant.parse(variant)
    epoch = point.t if epoch is None else epoch
    bias = bias if bias is not None else ImuBias()
    if variant.is_ned:
        geo = ecef_to_geodetic(point.p, params)
        C_ne = dcm_ecef_to_ned(geo.lat, geo.lon)
        C = C_ne @ point.C_eb
        v = C_ne @ point.v
        r = C_ne @ point.p
        if variant.is_transformed:
            v = to_transformed_velocity(v, r, earth_rate_n(geo, params))
        return NavState(ExtendedPose(C, v, r), variant, epoch, bias, geo)
    v = point.v
    if variant.is_transformed:
        v = to_transformed_velocity(v, point.p, earth_rate_e(params))
    return NavState(ExtendedPose(point.C_eb, v, point.p), variant, epoch, bias)


def start_geodetic(lat_deg, lon_deg, h):
    return GeodeticPosition(math.radians(lat_deg), math.radians(lon_deg), float(h))
