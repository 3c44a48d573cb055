"""
IMU measurement synthesis.

Ideal angle and velocity increments are Gauss-Legendre quadratures of the
analytic rates over each half sampling interval. Errors are added on top:
white noise with the configured densities and a bias that is held constant
within a sample and evolves between samples as a first-order Gauss-Markov
process, a random walk, or not at all.

Randomness comes from numpy's counter-based Philox bit generator keyed by
``SeedSequence(seed, spawn_key=(run_index,))``; normal deviates use numpy's
``standard_normal`` (ziggurat) transform. The draw order per sample is fixed:
gyro half 1, gyro half 2, accel half 1, accel half 2, gyro bias, accel bias.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ..increments import ImuBias, ImuSample
from .trajectories import ideal_imu

__all__ = ["BiasModel", "SensorErrorSpec", "ImuStream", "make_rng", "synthesize_imu"]


class BiasModel(enum.Enum):
    NONE = "None"
    GAUSS_MARKOV = "GaussMarkov"
    RANDOM_WALK = "RandomWalk"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        if text is None:
            return cls.NONE
        for member in cls:
            if str(text).lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown bias model {text!r}")


@dataclass(frozen=True)
class SensorErrorSpec:
    """Sensor error description.

    ``gyro_psd`` (rad^2/s) and ``accel_psd`` (m^2/s^3) are white-noise
    densities. For ``GaussMarkov`` the bias sigmas are steady-state standard
    deviations and ``tau`` the correlation time (s); for ``RandomWalk`` they are
    driving densities in units per sqrt(s).
    """

    gyro_psd: float = 0.0
    accel_psd: float = 0.0
    bias_model: BiasModel = BiasModel.NONE
    gyro_bias_sigma: float = 0.0
    accel_bias_sigma: float = 0.0
    tau: float = math.inf
    initial_bias: ImuBias = field(default_factory=ImuBias)

    def __post_init__(self):
        object.__setattr__(self, "bias_model", BiasModel.parse(self.bias_model))
        for name in ("gyro_psd", "accel_psd", "gyro_bias_sigma", "accel_bias_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.bias_model is BiasModel.GAUSS_MARKOV and not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError("Gauss-Markov bias needs a finite positive correlation time")

    @property
    def noise_free(self):
        return self.gyro_psd == 0 and self.accel_psd == 0 and self.bias_model is BiasModel.NONE


@dataclass(frozen=True, eq=False)
class ImuStream:
    """Synthesized samples with the analytic truth at every sample boundary."""

    trajectory: object
    samples: list
    truth: list
    biases: np.ndarray

    @property
    def times(self):
        return [p.t for p in self.truth]


def make_rng(seed, run_index=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(run_index),))))


def _half_increments(traj, t0, dt, nodes, weights):
    """Exact-to-quadrature ``(dtheta_1, dtheta_2, dv_1, dv_2)`` over ``[t0, t0 + dt]``."""
    h = 0.5 * dt
    out = []
    for start in (t0, t0 + h):
        w_sum = np.zeros(3)
        f_sum = np.zeros(3)
        for x, wt in zip(nodes, weights):
            w, f = ideal_imu(traj, start + 0.5 * h * (x + 1.0))
            w_sum += wt * w
            f_sum += wt * f
        out.append((0.5 * h * w_sum, 0.5 * h * f_sum))
    (a1, u1), (a2, u2) = out
    return a1, a2, u1, u2


def synthesize_imu(traj, err=None, seed=0, run_index=0, quadrature_nodes=4):
    """Sample ``traj`` at its IMU rate and corrupt the result per ``err``.

    Returns an :class:`ImuStream` whose samples are increments with half-interval
    sub-increments attached, so every scheme can consume them.
    """
    err = err if err is not None else SensorErrorSpec()
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_nodes)
    rng = make_rng(seed, run_index)
    dt = traj.dt
    n = traj.n_samples
    bias = err.initial_bias.as_vector().copy()
    sig_bias = np.array([err.gyro_bias_sigma] * 3 + [err.accel_bias_sigma] * 3)
    if err.bias_model is BiasModel.GAUSS_MARKOV:
        phi = math.exp(-dt / err.tau)
        drive = sig_bias * math.sqrt(1.0 - phi * phi)
    elif err.bias_model is BiasModel.RANDOM_WALK:
        phi = 1.0
        drive = sig_bias * math.sqrt(dt)
    else:
        phi, drive = 1.0, np.zeros(6)
    half_g = math.sqrt(err.gyro_psd * 0.5 * dt)
    half_a = math.sqrt(err.accel_psd * 0.5 * dt)
    samples, truth, biases = [], [traj.at(0.0)], []
    for k in range(n):
        t0 = k * dt
        a1, a2, u1, u2 = _half_increments(traj, t0, dt, nodes, weights)
        noise = rng.standard_normal(12)
        bg, ba = bias[:3] * (0.5 * dt), bias[3:] * (0.5 * dt)
        a1 = a1 + bg + half_g * noise[0:3]
        a2 = a2 + bg + half_g * noise[3:6]
        u1 = u1 + ba + half_a * noise[6:9]
        u2 = u2 + ba + half_a * noise[9:12]
        samples.append(ImuSample.from_sub_increments(dt, a1, a2, u1, u2))
        biases.append(bias.copy())
        truth.append(traj.at((k + 1) * dt))
        if err.bias_model is not BiasModel.NONE:
            bias = phi * bias + drive * rng.standard_normal(6)
    return ImuStream(traj, samples, truth, np.array(biases).reshape(-1, 6))
