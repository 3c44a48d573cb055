"""
Scheme comparison runs against analytic truth.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..earth_models import WGS84, FrameVariant, earth_rate_e, earth_rate_n, from_transformed_velocity
from ..increments import ImuBias, SchemeKind, local_step
from ..propagation import (
    Covariance9,
    NoiseParams,
    PerturbationSide,
    mechanize,
    noise_jacobian_G,
    propagate_cov,
    transition_A,
)
from ..se23_core import log_so3
from ..uncertainty_metrics import verify_monotonicity
from .trajectories import truth_state

__all__ = ["REPORT_SCHEMA_VERSION", "SchemeResult", "RunReport", "ground_velocity", "state_errors", "covariance_chain", "run_compare"]

REPORT_SCHEMA_VERSION = 1
log = logging.getLogger(__name__)


def ground_velocity(state, params=WGS84):
    """Earth-relative velocity of a state, whatever its variant."""
    if not state.variant.is_transformed:
        return np.asarray(state.pose.v)
    w = earth_rate_n(state.geodetic, params) if state.variant.is_ned else earth_rate_e(params)
    return from_transformed_velocity(state.pose.v, state.pose.r, w)


def state_errors(estimate, truth, params=WGS84):
    """``(attitude deg, velocity m/s, position m)`` error norms in the variant's own axes."""
    att = math.degrees(float(np.linalg.norm(log_so3(truth.pose.C.T @ estimate.pose.C))))
    vel = float(np.linalg.norm(ground_velocity(estimate, params) - ground_velocity(truth, params)))
    pos = float(np.linalg.norm(np.asarray(estimate.pose.r) - np.asarray(truth.pose.r)))
    return att, vel, pos


def covariance_chain(samples, scheme, noise, Sigma0, bias=None):
    """Right (local) covariance after every sample, starting from ``Sigma0``."""
    scheme = SchemeKind.parse(scheme)
    S = Sigma0 if isinstance(Sigma0, Covariance9) else Covariance9(Sigma0, PerturbationSide.RIGHT_LOCAL)
    chain = [S]
    for s in samples:
        A = transition_A(PerturbationSide.RIGHT_LOCAL, local_step(scheme, s, bias))
        S = propagate_cov(PerturbationSide.RIGHT_LOCAL, S, A, noise_jacobian_G(s, bias), noise.Q(s.dt))
        chain.append(S)
    return chain


@dataclass
class SchemeResult:
    scheme: SchemeKind
    attitude_deg: float
    velocity_mps: float
    position_m: float
    cov_trace: dict
    monotonicity: dict

    def to_dict(self):
        return {
            "scheme": self.scheme.value,
            "attitude_deg": self.attitude_deg,
            "velocity_mps": self.velocity_mps,
            "position_m": self.position_m,
            "cov_trace": self.cov_trace,
            "monotonicity": self.monotonicity,
        }


@dataclass
class RunReport:
    """Per-scheme terminal errors and covariance metrics of one run.

    ``timing`` (wall-clock seconds per scheme) is kept on the object and
    logged, but only serialized on request so that reports stay
    byte-reproducible.
    """

    variant: FrameVariant
    trajectory: dict
    duration: float
    n_samples: int
    results: list
    seed: int | None = None
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing=False):
        d = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "variant": self.variant.value,
            "trajectory": self.trajectory,
            "duration": self.duration,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "schemes": [r.to_dict() for r in self.results],
        }
        if include_timing:
            d["timing"] = self.timing
        return d

    def result(self, scheme):
        scheme = SchemeKind.parse(scheme)
        return next(r for r in self.results if r.scheme is scheme)


def run_compare(stream, schemes, variant, noise=None, initial_sigma=(0.0, 0.0, 0.0), bias=None, params=WGS84, seed=None):
    """Mechanize ``stream`` with every scheme and score the end state against truth.

    The covariance metrics come from the right (local) propagation chain of
    each scheme from ``diag(initial_sigma)^2``.
    """
    variant = FrameVariant.parse(variant)
    noise = noise if noise is not None else NoiseParams()
    bias = bias if bias is not None else ImuBias()
    s0 = truth_state(stream.truth[0], variant, params, bias=bias)
    s_end = truth_state(stream.truth[-1], variant, params, bias=bias)
    sig = np.repeat(np.asarray(initial_sigma, float) ** 2, 3)
    results, timing = [], {}
    for scheme in schemes:
        scheme = SchemeKind.parse(scheme)
        t_start = time.perf_counter()
        est = mechanize(s0, stream.samples, scheme, params)
        att, vel, pos = state_errors(est, s_end, params)
        chain = covariance_chain(stream.samples, scheme, noise, np.diag(sig), bias)
        S = chain[-1].matrix
        mono = verify_monotonicity(chain)
        results.append(
            SchemeResult(
                scheme,
                att,
                vel,
                pos,
                {
                    "total": float(np.trace(S)),
                    "attitude": float(np.trace(S[0:3, 0:3])),
                    "velocity": float(np.trace(S[3:6, 3:6])),
                    "position": float(np.trace(S[6:9, 6:9])),
                },
                {"ok": mono.ok, "violations": len(mono.violations), "first_violation": mono.first_violation},
            )
        )
        timing[scheme.value] = time.perf_counter() - t_start
        log.info("scheme %s: %.3f s", scheme.value, timing[scheme.value])
    traj = stream.trajectory
    return RunReport(variant, traj.describe(), traj.duration, len(stream.samples), results, seed, timing)
