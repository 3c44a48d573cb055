"""
Global and local increments of the discrete navigation flow.

Over one interval the state evolves as ``T_j = Gamma * Phi_dt(T_i) * Upsilon``:

* the global increment ``Gamma`` depends only on the frame rotation rate and
  gravitation (held constant over the step);
* the local increment ``Upsilon`` depends only on the IMU samples and is what
  gets preintegrated.

Three local-increment schemes are available:

``CONSTANT_GLOBAL_ACCEL``
    ``(Exp(w dt), f dt, f dt^2 / 2)``.
``ZERO_ORDER_HOLD``
    body-frame rates held constant; the exact ``(Gamma_0, Gamma_1 f dt, Gamma_2 f dt^2)``.
``TWO_SAMPLE``
    half-interval increments with coning and sculling compensation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .earth_models import FrameVariant, KinematicContext
from .se23_core import ExtendedPose, gamma, skew

__all__ = [
    "ImuBias",
    "ImuSample",
    "SchemeKind",
    "LocalIncrement",
    "GlobalIncrement",
    "global_step",
    "global_step_ecef",
    "global_step_ned",
    "compose_global",
    "gamma_prime",
    "local_step",
    "compose_local",
    "preintegrate",
    "clock_matrix",
    "from_clock_matrix",
]


def _vec3(x, name):
    a = np.array(x, dtype=float)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be a finite 3-vector")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ImuBias:
    """Gyro (rad/s) and accelerometer (m/s^2) biases."""

    b_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "b_g", _vec3(self.b_g, "b_g"))
        object.__setattr__(self, "b_a", _vec3(self.b_a, "b_a"))

    def as_vector(self):
        return np.concatenate([self.b_g, self.b_a])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[:3], x[3:6])

    def __add__(self, delta):
        return ImuBias.from_vector(self.as_vector() + np.asarray(delta, float))


@dataclass(frozen=True, eq=False)
class ImuSample:
    """One IMU sampling interval.

    Parameters
    ----------
    dt : float
        Interval length (s), strictly positive.
    gyro, accel : array_like (3,)
        Angular rate / specific force when ``is_increment`` is False, or the
        integrated angle / velocity increments over the interval when True.
    is_increment : bool
    sub_increments : tuple of four 3-vectors, optional
        ``(dtheta_1, dtheta_2, dv_1, dv_2)`` over the two half intervals. When
        present they must sum to the full-interval increments within 1e-12.
    """

    dt: float
    gyro: np.ndarray
    accel: np.ndarray
    is_increment: bool = False
    sub_increments: tuple | None = None

    def __post_init__(self):
        dt = float(self.dt)
        if not dt > 0.0:
            raise ValueError(f"IMU sample interval must be positive, got {self.dt!r}")
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "gyro", _vec3(self.gyro, "gyro"))
        object.__setattr__(self, "accel", _vec3(self.accel, "accel"))
        if self.sub_increments is not None:
            subs = tuple(_vec3(s, "sub-increment") for s in self.sub_increments)
            if len(subs) != 4:
                raise ValueError("sub_increments must be (dtheta_1, dtheta_2, dv_1, dv_2)")
            object.__setattr__(self, "sub_increments", subs)
            dtheta, dv = self.increments()
            for total, a, b in ((dtheta, subs[0], subs[1]), (dv, subs[2], subs[3])):
                if np.max(np.abs(a + b - total)) > 1e-12 * max(1.0, float(np.max(np.abs(total)))):
                    raise ValueError("sub-increments do not sum to the full-interval increment")

    @classmethod
    def from_sub_increments(cls, dt, dtheta_1, dtheta_2, dv_1, dv_2):
        dtheta_1, dtheta_2, dv_1, dv_2 = (np.asarray(x, float) for x in (dtheta_1, dtheta_2, dv_1, dv_2))
        return cls(dt, dtheta_1 + dtheta_2, dv_1 + dv_2, True, (dtheta_1, dtheta_2, dv_1, dv_2))

    def rates(self):
        """Mean angular rate and specific force over the interval."""
        if self.is_increment:
            return self.gyro / self.dt, self.accel / self.dt
        return self.gyro, self.accel

    def increments(self):
        """Angle and velocity increments over the interval."""
        if self.is_increment:
            return self.gyro, self.accel
        return self.gyro * self.dt, self.accel * self.dt

    def corrected_rates(self, bias=None):
        w, f = self.rates()
        if bias is None:
            return w, f
        return w - bias.b_g, f - bias.b_a


class SchemeKind(enum.Enum):
    CONSTANT_GLOBAL_ACCEL = "ConstantGlobalAccel"
    ZERO_ORDER_HOLD = "ZeroOrderHoldBody"
    TWO_SAMPLE = "TwoSampleCompensated"

    @property
    def rank(self):
        return {"ConstantGlobalAccel": 0, "ZeroOrderHoldBody": 1, "TwoSampleCompensated": 2}[self.value]

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        aliases = {"1": "ConstantGlobalAccel", "2": "ZeroOrderHoldBody", "3": "TwoSampleCompensated"}
        text = aliases.get(str(text), text)
        for member in cls:
            if text in (member.value, member.name) or str(text).lower() == member.value.lower():
                return member
        raise ValueError(f"unknown scheme {text!r}")


def _frozen_rot(C):
    C = np.array(C, dtype=float)
    if C.shape != (3, 3):
        raise ValueError("rotation block must be 3x3")
    if np.linalg.norm(C.T @ C - np.eye(3)) > 1e-9:
        raise ValueError("rotation block is not orthonormal to within 1e-9")
    C.setflags(write=False)
    return C


@dataclass(frozen=True, eq=False)
class LocalIncrement:
    """IMU-only increment ``(dC, dv, dr)`` over ``dt`` seconds."""

    dC: np.ndarray
    dv: np.ndarray
    dr: np.ndarray
    dt: float
    scheme: SchemeKind = SchemeKind.ZERO_ORDER_HOLD

    def __post_init__(self):
        object.__setattr__(self, "dC", _frozen_rot(self.dC))
        object.__setattr__(self, "dv", _vec3(self.dv, "dv"))
        object.__setattr__(self, "dr", _vec3(self.dr, "dr"))
        if not float(self.dt) >= 0.0:
            raise ValueError("increment duration must be non-negative")
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def identity(cls, scheme=SchemeKind.TWO_SAMPLE):
        return cls(np.eye(3), np.zeros(3), np.zeros(3), 0.0, scheme)

    def as_pose(self):
        return ExtendedPose(self.dC, self.dv, self.dr)

    @classmethod
    def from_pose(cls, T, dt, scheme=SchemeKind.ZERO_ORDER_HOLD):
        return cls(T.C, T.v, T.r, dt, scheme)


@dataclass(frozen=True, eq=False)
class GlobalIncrement:
    """Earth-rotation/gravitation increment ``(gC, gv, gr)`` over ``dt`` seconds.

    ``omega_ie`` is the earth rate (navigation axes) used to convert between
    ground and auxiliary velocity for the untransformed variants.

    ``gC_delta`` holds ``gC - I`` evaluated without cancellation. The rotation
    is within a few microradians of identity while the position it acts on is
    an earth radius long, so forming ``gC - I`` from the rounded ``gC`` would
    cost about a micrometer per thousand steps. It defaults to ``gC - I``.
    """

    gC: np.ndarray
    gv: np.ndarray
    gr: np.ndarray
    dt: float
    variant: FrameVariant
    omega_ie: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gC_delta: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "gC", _frozen_rot(self.gC))
        D = self.gC - np.eye(3) if self.gC_delta is None else np.array(self.gC_delta, dtype=float)
        if D.shape != (3, 3) or np.max(np.abs(D - (self.gC - np.eye(3)))) > 1e-12:
            raise ValueError("gC_delta must equal gC - I")
        D.setflags(write=False)
        object.__setattr__(self, "gC_delta", D)
        object.__setattr__(self, "gv", _vec3(self.gv, "gv"))
        object.__setattr__(self, "gr", _vec3(self.gr, "gr"))
        object.__setattr__(self, "omega_ie", _vec3(self.omega_ie, "omega_ie"))
        object.__setattr__(self, "variant", FrameVariant.parse(self.variant))
        if not float(self.dt) >= 0.0:
            raise ValueError("increment duration must be non-negative")
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def identity(cls, variant, omega_ie=(0.0, 0.0, 0.0)):
        return cls(np.eye(3), np.zeros(3), np.zeros(3), 0.0, variant, omega_ie)

    def as_pose(self):
        return ExtendedPose(self.gC, self.gv, self.gr)


# ---------------------------------------------------------------------------
# Global increment
# ---------------------------------------------------------------------------


def global_step(ctx: KinematicContext, dt):
    """Closed-form global increment for a frame rate and gravitation held constant.

    ``gC = Exp(-w dt)``, ``gv = Gamma_1(-w dt) G dt`` and
    ``gr = (Gamma_1(-w dt) - Gamma_2(-w dt)) G dt^2``. The position weight is
    ``int_0^1 u Exp(-w dt u) du``, which equals ``Exp(-w dt) Gamma_2(w dt)``;
    ``Gamma_2(-w dt)`` alone would weight by ``1 - u`` instead.
    """
    dt = float(dt)
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    phi = -np.asarray(ctx.omega_frame, float) * dt
    G = np.asarray(ctx.gravitation_G, float)
    G1 = gamma(1, phi)
    return GlobalIncrement(
        gamma(0, phi),
        G1 @ G * dt,
        (G1 - gamma(2, phi)) @ G * dt * dt,
        dt,
        ctx.variant,
        ctx.omega_ie,
        skew(phi) @ G1,
    )


def global_step_ecef(ctx, dt):
    """Global increment for the ECEF variants (earth rate is the frame rate)."""
    if ctx.variant.is_ned:
        raise ValueError("global_step_ecef needs an ECEF-family context")
    return global_step(ctx, dt)


def global_step_ned(ctx, dt):
    """Global increment for the NED variants (rates frozen at interval start)."""
    if not ctx.variant.is_ned:
        raise ValueError("global_step_ned needs an NED-family context")
    return global_step(ctx, dt)


def compose_global(later, earlier):
    """``Gamma_ij = Gamma_later * Phi_{dt_later}(Gamma_earlier)``.

    The result keeps the earlier increment's earth rate: velocity conversions
    for the untransformed variants happen at the start of the combined
    interval, and ``gC @ omega_ie`` carries that rate to its end.
    """
    if later.variant is not earlier.variant:
        raise ValueError(f"cannot compose {later.variant.value} with {earlier.variant.value}")
    C = later.gC
    Da, Db = later.gC_delta, earlier.gC_delta
    return GlobalIncrement(
        C @ earlier.gC,
        C @ earlier.gv + later.gv,
        C @ (earlier.gr + later.dt * earlier.gv) + later.gr,
        earlier.dt + later.dt,
        later.variant,
        earlier.omega_ie,
        Da @ Db + Da + Db,
    )


def gamma_prime(variant, Gamma, r_end):
    """Global increment with the velocity slot shifted by ``-omega_end x r_end``.

    Used by the untransformed variants: with the auxiliary initial velocity
    ``v_0 + omega_0 x r_0``, ``v_t = gv' + gC (C_0 dv + v_0 + omega_0 x r_0)``.
    ``omega_end = gC omega_0`` is the (inertially fixed) earth rate resolved in
    the end-of-interval axes; for ECEF it equals ``omega_0``.
    """
    variant = FrameVariant.parse(variant)
    if variant.is_transformed or Gamma.variant is not variant:
        raise ValueError("gamma_prime applies to an untransformed variant matching the increment")
    gv = Gamma.gv - np.cross(Gamma.gC @ Gamma.omega_ie, r_end)
    return GlobalIncrement(Gamma.gC, gv, Gamma.gr, Gamma.dt, Gamma.variant, Gamma.omega_ie, Gamma.gC_delta)


# ---------------------------------------------------------------------------
# Local increment
# ---------------------------------------------------------------------------


def local_step(scheme, sample, bias=None):
    """Local increment of one IMU sample under the given scheme.

    The bias, when given, is subtracted from rates (or ``bias * dt`` from
    increments, split evenly across the half-interval sub-increments).
    """
    scheme = SchemeKind.parse(scheme)
    dt = sample.dt
    if scheme is SchemeKind.TWO_SAMPLE:
        if sample.sub_increments is None:
            raise ValueError("the two-sample scheme needs half-interval sub-increments")
        a1, a2, u1, u2 = sample.sub_increments
        if bias is not None:
            half = 0.5 * dt
            a1, a2 = a1 - bias.b_g * half, a2 - bias.b_g * half
            u1, u2 = u1 - bias.b_a * half, u2 - bias.b_a * half
        dtheta = a1 + a2
        dvel = u1 + u2
        phi = dtheta + (2.0 / 3.0) * np.cross(a1, a2)
        dv = dvel + 0.5 * np.cross(dtheta, dvel) + (2.0 / 3.0) * (np.cross(a1, u2) + np.cross(u1, a2))
        return LocalIncrement(gamma(0, phi), dv, 0.5 * dv * dt, dt, scheme)
    w, f = sample.corrected_rates(bias)
    if scheme is SchemeKind.CONSTANT_GLOBAL_ACCEL:
        return LocalIncrement(gamma(0, w * dt), f * dt, 0.5 * f * dt * dt, dt, scheme)
    phi = w * dt
    return LocalIncrement(gamma(0, phi), gamma(1, phi) @ f * dt, gamma(2, phi) @ f * dt * dt, dt, scheme)


def compose_local(earlier, later):
    """``Upsilon_ij = Phi_{dt_later}(Upsilon_earlier) * Upsilon_later``.

    The result carries the coarser of the two scheme tags.
    """
    C = earlier.dC
    scheme = earlier.scheme if earlier.scheme.rank <= later.scheme.rank else later.scheme
    return LocalIncrement(
        C @ later.dC,
        C @ later.dv + earlier.dv,
        C @ later.dr + earlier.dr + later.dt * earlier.dv,
        earlier.dt + later.dt,
        scheme,
    )


def preintegrate(samples, scheme, bias=None):
    """Fold a sequence of samples into one local increment."""
    scheme = SchemeKind.parse(scheme)
    acc = LocalIncrement.identity(scheme)
    for s in samples:
        acc = compose_local(acc, local_step(scheme, s, bias))
    return acc


def clock_matrix(U):
    """5x5 embedding with the duration in the clock column.

    Compositions then become plain matrix products:
    ``clock_matrix(compose_local(a, b)) == clock_matrix(a) @ clock_matrix(b)``.
    """
    M = np.eye(5)
    M[:3, :3] = U.dC
    M[:3, 3] = U.dv
    M[:3, 4] = U.dr
    M[3, 4] = U.dt
    return M


def from_clock_matrix(M, scheme=SchemeKind.ZERO_ORDER_HOLD):
    M = np.asarray(M, dtype=float)
    return LocalIncrement(M[:3, :3], M[:3, 3], M[:3, 4], M[3, 4], scheme)
