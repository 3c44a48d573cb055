"""
Earth-frame kinematics: rotation and transport rates, curvature radii, normal
gravity, gravity/gravitation conversion and the per-variant kinematic context.

Conventions
-----------
* NED variants carry the position slot as the geocentric vector expressed in
  the local north-east-down axes, ``r_eb^n = C_e^n r_eb^e``; a geodetic anchor
  (latitude, longitude, height) travels alongside it for evaluating rates and
  gravity.
* ECEF variants carry ``r_eb^e`` directly.
* Transformed variants replace the ground velocity ``v`` by the auxiliary
  velocity ``v + omega_ie x r``.
* Gravity ``g`` and gravitation ``G`` are linked by ``g = G - (omega_ie x)^2 r``.

The ellipsoid radii and the Somigliana normal-gravity formula are the WGS-84
reference expressions; all constants are overridable through
:class:`EarthParams`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .se23_core import skew

__all__ = [
    "PolarSingularityError",
    "EarthParams",
    "WGS84",
    "GeodeticPosition",
    "FrameVariant",
    "KinematicContext",
    "radii_of_curvature",
    "geodetic_to_ecef",
    "ecef_to_geodetic",
    "dcm_ecef_to_ned",
    "ned_position_vector",
    "earth_rate_e",
    "earth_rate_n",
    "transport_rate_n",
    "llh_rates",
    "normal_gravity",
    "gravity_n",
    "gravity_e",
    "gravitation_from_gravity",
    "gravity_from_gravitation",
    "earth_rate_for",
    "to_transformed_velocity",
    "from_transformed_velocity",
    "kinematic_context",
    "group_affine_defect",
]

_POLAR_BAND = 1e-6


class PolarSingularityError(ValueError):
    """Raised when the transport rate is requested too close to a pole."""


@dataclass(frozen=True)
class EarthParams:
    """Ellipsoid, rotation and normal-gravity constants (WGS-84 defaults)."""

    omega_ie: float = 7.2921151467e-5
    a: float = 6378137.0
    f: float = 1.0 / 298.257223563
    gm: float = 3.986004418e14
    gamma_e: float = 9.7803253359
    k_somigliana: float = 0.00193185265241

    def __post_init__(self):
        if self.omega_ie < 0 or self.a <= 0 or not (0 <= self.f < 1) or self.gamma_e <= 0:
            raise ValueError("invalid earth parameters")

    @property
    def e2(self):
        return self.f * (2.0 - self.f)

    @property
    def b(self):
        return self.a * (1.0 - self.f)

    @classmethod
    def from_mapping(cls, mapping):
        known = {k: float(v) for k, v in dict(mapping).items() if k in cls.__dataclass_fields__}
        unknown = set(dict(mapping)) - set(known)
        if unknown:
            raise ValueError(f"unknown earth parameters: {sorted(unknown)}")
        return cls(**known)


WGS84 = EarthParams()


@dataclass(frozen=True)
class GeodeticPosition:
    """Geodetic latitude/longitude (rad) and ellipsoidal height (m)."""

    lat: float
    lon: float
    h: float

    def __post_init__(self):
        for name in ("lat", "lon", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (abs(self.lat) <= math.pi / 2 and self.h > -1e4 and math.isfinite(self.lon)):
            raise ValueError(f"invalid geodetic position {self!r}")


class FrameVariant(enum.Enum):
    NED = "NED"
    TRANSFORMED_NED = "TransformedNED"
    ECEF = "ECEF"
    TRANSFORMED_ECEF = "TransformedECEF"

    @property
    def is_ned(self):
        return self in (FrameVariant.NED, FrameVariant.TRANSFORMED_NED)

    @property
    def is_transformed(self):
        return self in (FrameVariant.TRANSFORMED_NED, FrameVariant.TRANSFORMED_ECEF)

    @property
    def transformed(self):
        """The transformed counterpart of this variant."""
        return FrameVariant.TRANSFORMED_NED if self.is_ned else FrameVariant.TRANSFORMED_ECEF

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        for member in cls:
            if text in (member.value, member.name) or str(text).lower() == member.value.lower():
                return member
        raise ValueError(f"unknown frame variant {text!r}")


# ---------------------------------------------------------------------------
# Ellipsoid geometry
# ---------------------------------------------------------------------------


def radii_of_curvature(lat, params=WGS84):
    """Meridian radius R_M and prime-vertical radius R_N at a latitude."""
    s2 = math.sin(lat) ** 2
    w = 1.0 - params.e2 * s2
    R_N = params.a / math.sqrt(w)
    R_M = params.a * (1.0 - params.e2) / (w * math.sqrt(w))
    return R_M, R_N


def geodetic_to_ecef(pos, params=WGS84):
    _, R_N = radii_of_curvature(pos.lat, params)
    cl, sl = math.cos(pos.lat), math.sin(pos.lat)
    return np.array(
        [
            (R_N + pos.h) * cl * math.cos(pos.lon),
            (R_N + pos.h) * cl * math.sin(pos.lon),
            (R_N * (1.0 - params.e2) + pos.h) * sl,
        ]
    )


def ecef_to_geodetic(r, params=WGS84, iterations=8):
    """Inverse of :func:`geodetic_to_ecef` by fixed-point iteration on latitude."""
    x, y, z = (float(c) for c in r)
    p = math.hypot(x, y)
    lon = math.atan2(y, x)
    lat = math.atan2(z, p * (1.0 - params.e2))
    for _ in range(iterations):
        sl = math.sin(lat)
        _, R_N = radii_of_curvature(lat, params)
        h = p * math.cos(lat) + z * sl - params.a * math.sqrt(1.0 - params.e2 * sl * sl)
        lat = math.atan2(z, p * (1.0 - params.e2 * R_N / (R_N + h)))
    sl = math.sin(lat)
    h = p * math.cos(lat) + z * sl - params.a * math.sqrt(1.0 - params.e2 * sl * sl)
    return GeodeticPosition(lat, lon, h)


def dcm_ecef_to_ned(lat, lon):
    """Rotation C_e^n taking ECEF components to NED components."""
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array(
        [
            [-sl * co, -sl * so, cl],
            [-so, co, 0.0],
            [-cl * co, -cl * so, -sl],
        ]
    )


def ned_position_vector(pos, params=WGS84):
    """Geocentric position resolved in the local NED axes, ``C_e^n r_eb^e``."""
    _, R_N = radii_of_curvature(pos.lat, params)
    sl, cl = math.sin(pos.lat), math.cos(pos.lat)
    return np.array([-R_N * params.e2 * sl * cl, 0.0, -(R_N + pos.h) + R_N * params.e2 * sl * sl])


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def earth_rate_e(params=WGS84):
    return np.array([0.0, 0.0, params.omega_ie])


def earth_rate_n(pos, params=WGS84):
    """Earth rotation rate in NED axes, ``[w cos(lat), 0, -w sin(lat)]``."""
    w = params.omega_ie
    return np.array([w * math.cos(pos.lat), 0.0, -w * math.sin(pos.lat)])


def transport_rate_n(pos, v_ned, params=WGS84):
    """Rotation rate of the NED frame relative to the earth.

    Raises
    ------
    PolarSingularityError
        If the latitude is within 1e-6 rad of a pole.
    """
    if math.pi / 2 - abs(pos.lat) < _POLAR_BAND:
        raise PolarSingularityError("transport rate is singular at the poles")
    R_M, R_N = radii_of_curvature(pos.lat, params)
    vn, ve, _ = (float(c) for c in v_ned)
    return np.array(
        [ve / (R_N + pos.h), -vn / (R_M + pos.h), -ve * math.tan(pos.lat) / (R_N + pos.h)]
    )


def llh_rates(pos, v_ned, params=WGS84):
    """Time derivatives (lat, lon, h) for a ground velocity in NED axes."""
    if math.pi / 2 - abs(pos.lat) < _POLAR_BAND:
        raise PolarSingularityError("longitude rate is singular at the poles")
    R_M, R_N = radii_of_curvature(pos.lat, params)
    vn, ve, vd = (float(c) for c in v_ned)
    return np.array([vn / (R_M + pos.h), ve / ((R_N + pos.h) * math.cos(pos.lat)), -vd])


# ---------------------------------------------------------------------------
# Gravity
# ---------------------------------------------------------------------------


def normal_gravity(pos, params=WGS84):
    """Somigliana normal gravity magnitude with the second-order height correction."""
    s2 = math.sin(pos.lat) ** 2
    g0 = params.gamma_e * (1.0 + params.k_somigliana * s2) / math.sqrt(1.0 - params.e2 * s2)
    m = params.omega_ie**2 * params.a**2 * params.b / params.gm
    h = pos.h
    return g0 * (1.0 - 2.0 / params.a * (1.0 + params.f + m - 2.0 * params.f * s2) * h + 3.0 * h * h / params.a**2)


def gravity_n(pos, params=WGS84):
    """Gravity vector in NED axes (points down)."""
    return np.array([0.0, 0.0, normal_gravity(pos, params)])


def gravity_e(r_e, params=WGS84):
    """Gravity vector in ECEF axes at an ECEF position."""
    pos = ecef_to_geodetic(r_e, params)
    return dcm_ecef_to_ned(pos.lat, pos.lon).T @ gravity_n(pos, params)


def gravitation_from_gravity(g, omega_ie, r):
    """``G = g + (omega x)^2 r`` (adds back the centripetal term)."""
    W = skew(omega_ie)
    return np.asarray(g, float) + W @ (W @ np.asarray(r, float))


def gravity_from_gravitation(G, omega_ie, r):
    """``g = G - (omega x)^2 r``."""
    W = skew(omega_ie)
    return np.asarray(G, float) - W @ (W @ np.asarray(r, float))


# ---------------------------------------------------------------------------
# Variant plumbing
# ---------------------------------------------------------------------------


def earth_rate_for(variant, geodetic=None, params=WGS84):
    """Earth rate resolved in the axes used by ``variant``."""
    if variant.is_ned:
        if geodetic is None:
            raise ValueError("NED variants need a geodetic anchor")
        return earth_rate_n(geodetic, params)
    return earth_rate_e(params)


def to_transformed_velocity(v, r, omega_ie):
    """Ground velocity to auxiliary velocity, ``v + omega x r``."""
    return np.asarray(v, float) + np.cross(omega_ie, r)


def from_transformed_velocity(v_aux, r, omega_ie):
    """Auxiliary velocity back to ground velocity, ``v_aux - omega x r``."""
    return np.asarray(v_aux, float) - np.cross(omega_ie, r)


@dataclass(frozen=True, eq=False)
class KinematicContext:
    """Frame rates and gravity frozen over one propagation step.

    Attributes
    ----------
    variant : FrameVariant
    omega_frame : ndarray (3,)
        Rotation rate of the navigation frame: ``omega_in^n`` for NED variants,
        ``omega_ie^e`` for ECEF variants.
    gravitation_G, gravity_g : ndarray (3,)
        Gravitation and gravity at the evaluation position.
    omega_ie : ndarray (3,)
        Earth rate resolved in the navigation axes.
    position : ndarray (3,)
        Position slot at which the context was evaluated.
    ground_velocity : ndarray (3,)
        Ground velocity ``v_eb`` in navigation axes.
    velocity_coupling, position_coupling : ndarray (3,) or None
        ``g - omega_ie x v`` and ``omega_ie x r``; set only for the
        untransformed variants.
    geodetic : GeodeticPosition
    """

    variant: FrameVariant
    omega_frame: np.ndarray
    gravitation_G: np.ndarray
    gravity_g: np.ndarray
    omega_ie: np.ndarray
    position: np.ndarray
    ground_velocity: np.ndarray
    geodetic: GeodeticPosition
    velocity_coupling: np.ndarray | None = None
    position_coupling: np.ndarray | None = None

    def w2(self, v=None, r=None):
        """3x5 top block of the state-side input matrix ``W_2``.

        ``v`` and ``r`` default to the values the context was frozen at.
        """
        v = self.ground_velocity if v is None else np.asarray(v, float)
        r = self.position if r is None else np.asarray(r, float)
        W = np.zeros((3, 5))
        W[:, :3] = -skew(self.omega_frame)
        if self.variant.is_transformed:
            W[:, 3] = self.gravitation_G
        else:
            W[:, 3] = self.gravity_g - np.cross(self.omega_ie, v)
            W[:, 4] = np.cross(self.omega_ie, r)
        return W


def kinematic_context(variant, pose, geodetic=None, params=WGS84):
    """Evaluate rates and gravity for a pose expressed in ``variant``.

    Parameters
    ----------
    variant : FrameVariant
    pose : ExtendedPose
        State in the variant's parameterization (auxiliary velocity for the
        transformed variants).
    geodetic : GeodeticPosition, optional
        Required for NED variants; ignored (recomputed from ``pose.r``) for
        ECEF variants.
    params : EarthParams
    """
    variant = FrameVariant.parse(variant)
    r = np.array(pose.r, dtype=float)
    if variant.is_ned:
        if geodetic is None:
            raise ValueError("NED variants need a geodetic anchor")
        w_ie = earth_rate_n(geodetic, params)
        v = np.array(pose.v, float)
        if variant.is_transformed:
            v = from_transformed_velocity(v, r, w_ie)
        omega = w_ie + transport_rate_n(geodetic, v, params)
        g = gravity_n(geodetic, params)
    else:
        geodetic = ecef_to_geodetic(r, params)
        w_ie = earth_rate_e(params)
        v = np.array(pose.v, float)
        if variant.is_transformed:
            v = from_transformed_velocity(v, r, w_ie)
        omega = w_ie
        g = dcm_ecef_to_ned(geodetic.lat, geodetic.lon).T @ gravity_n(geodetic, params)
    G = gravitation_from_gravity(g, w_ie, r)
    coupling_v = coupling_r = None
    if not variant.is_transformed:
        coupling_v = g - np.cross(w_ie, v)
        coupling_r = np.cross(w_ie, r)
    return KinematicContext(
        variant=variant,
        omega_frame=omega,
        gravitation_G=G,
        gravity_g=g,
        omega_ie=w_ie,
        position=r,
        ground_velocity=v,
        geodetic=geodetic,
        velocity_coupling=coupling_v,
        position_coupling=coupling_r,
    )


def _embed(top):
    M = np.zeros((5, 5))
    M[:3, :] = top
    return M


def group_affine_defect(variant, X_A, X_B, imu, ctx, state_dependent=False):
    """Frobenius norm of ``f(A)B + A f(B) - A f(I) B - f(AB)``.

    The vector field is ``f(X) = X W_1 + W_2 X`` with ``W_1`` built from the
    IMU sample and ``W_2`` from the kinematic context. By default ``W_2`` is
    frozen at the context's state, which is how the step-wise propagation
    treats it. With ``state_dependent=True`` the velocity/position couplings of
    ``W_2`` are re-evaluated at each argument; the untransformed variants then
    show a nonzero defect (of order ``omega_ie |v|``) while the transformed
    variants stay at roundoff.
    """
    variant = FrameVariant.parse(variant)
    if ctx.variant is not variant:
        raise ValueError("context and poses are in different frame variants")
    omega_b, f_b = imu.rates()
    W1 = np.zeros((5, 5))
    W1[:3, :3] = skew(omega_b)
    W1[:3, 3] = f_b
    W1[3, 4] = 1.0

    def field(X):
        M = X.as_matrix()
        if state_dependent:
            W2 = _embed(ctx.w2(M[:3, 3], M[:3, 4]))
        else:
            W2 = _embed(ctx.w2())
        return M @ W1 + W2 @ M

    A = X_A.as_matrix()
    B = X_B.as_matrix()
    fI = field(type(X_A).identity())
    fAB = field(X_A @ X_B)
    D = field(X_A) @ B + A @ field(X_B) - A @ fI @ B - fAB
    return float(np.linalg.norm(D))
