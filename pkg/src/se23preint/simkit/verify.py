"""
Self-verification suites behind ``simkit verify``.

Each suite returns a list of named checks ``(value, tolerance, passed)``.
Failures are reported, never raised. ``inject_fault="sign-flip"`` negates
one block of an analytic quantity before comparison so the failure path of
each suite can be exercised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..bias_update import apply_bias_correction, bias_jacobian_closed_form, preintegrate_with_jacobian
from ..earth_models import (
    WGS84,
    FrameVariant,
    GeodeticPosition,
    dcm_ecef_to_ned,
    earth_rate_e,
    earth_rate_n,
    geodetic_to_ecef,
    kinematic_context,
    ned_position_vector,
)
from ..factors import build_factor, jacobian_wrt_bias, jacobian_wrt_Ti, jacobian_wrt_Tj, residual
from ..increments import ImuBias, ImuSample, SchemeKind, global_step, local_step, preintegrate
from ..oracles import rk4_global_increment, rk4_local_increment
from ..propagation import (
    Covariance9,
    NavState,
    NoiseParams,
    PerturbationSide,
    mechanize,
    noise_jacobian_G,
    propagate_cov,
    propagate_state,
    transition_A,
)
from ..se23_core import (
    ExtendedPose,
    adjoint,
    exp_se23,
    exp_so3,
    gamma,
    hat,
    log_se23,
    skew,
)
from ..uncertainty_metrics import verify_monotonicity

__all__ = ["SUITES", "FAULTS", "Check", "VerifyReport", "run_suite", "run_verify"]

VERIFY_SCHEMA_VERSION = 1
SUITES = ("group-axioms", "jacobians", "oracles", "bias", "monotonicity")
FAULTS = ("sign-flip",)

_BLOCKS = ("att", "vel", "pos")
_BIAS_BLOCKS = ("gyro", "accel")


@dataclass
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def to_dict(self):
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class VerifyReport:
    suite: str
    checks: list = field(default_factory=list)
    fault: str | None = None

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    @property
    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self):
        return {
            "schema_version": VERIFY_SCHEMA_VERSION,
            "suite": self.suite,
            "fault": self.fault,
            "ok": self.ok,
            "failed": self.failed,
            "checks": [c.to_dict() for c in self.checks],
        }


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed))


def _random_pose(rng, scale=1.0):
    return ExtendedPose(exp_so3(rng.normal(size=3)), rng.normal(size=3) * scale, rng.normal(size=3) * scale)


def _max_err(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# ---------------------------------------------------------------------------
# group-axioms
# ---------------------------------------------------------------------------


def _suite_group_axioms(fault, seed, n=200):
    rng = _rng(seed)
    I5 = np.eye(5)
    worst = dict.fromkeys(("associativity", "identity", "inverse", "exp-log-roundtrip", "adjoint-conjugation", "gamma-identities"), 0.0)
    for _ in range(n):
        A, B, C = (_random_pose(rng) for _ in range(3))
        worst["associativity"] = max(worst["associativity"], _max_err(((A @ B) @ C).as_matrix(), (A @ (B @ C)).as_matrix()))
        worst["identity"] = max(worst["identity"], _max_err((A @ ExtendedPose.identity()).as_matrix(), A.as_matrix()))
        worst["inverse"] = max(worst["inverse"], _max_err((A @ A.inverse()).as_matrix(), I5))
        xi = rng.normal(size=9)
        xi[:3] *= min(1.0, (math.pi - 0.05) / max(np.linalg.norm(xi[:3]), 1e-300))
        worst["exp-log-roundtrip"] = max(worst["exp-log-roundtrip"], _max_err(log_se23(exp_se23(xi)), xi))
        Ad = adjoint(A)
        if fault == "sign-flip":
            Ad = Ad.copy()
            Ad[3:6, 0:3] *= -1.0
        lhs = hat(Ad @ xi)
        M = A.as_matrix()
        worst["adjoint-conjugation"] = max(worst["adjoint-conjugation"], _max_err(lhs, M @ hat(xi) @ np.linalg.inv(M)))
        phi = rng.normal(size=3)
        P = skew(phi)
        g = [gamma(m, phi) for m in range(4)]
        e = max(
            _max_err(g[0], np.eye(3) + P @ g[1]),
            _max_err(g[1], np.eye(3) + P @ g[2]),
            _max_err(g[2], 0.5 * np.eye(3) + P @ g[3]),
        )
        worst["gamma-identities"] = max(worst["gamma-identities"], e)
    tol = {"associativity": 1e-12, "identity": 0.0, "inverse": 1e-12, "exp-log-roundtrip": 1e-10, "adjoint-conjugation": 1e-10, "gamma-identities": 1e-12}
    return [Check(k, v, tol[k]) for k, v in worst.items()]


# ---------------------------------------------------------------------------
# jacobians
# ---------------------------------------------------------------------------


def _perturb(state, xi):
    return NavState(state.pose @ exp_se23(xi), state.variant, state.epoch, state.bias, state.geodetic)


def _central_diff(fun, n, h):
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        cols.append((fun(e) - fun(-e)) / (2.0 * h))
    return np.column_stack(cols)


def _block_checks(prefix, J, J_fd, col_names, tol):
    scale = max(float(np.linalg.norm(J_fd)), 1e-300)
    out = []
    ncol = J.shape[1] // 3
    for i, rn in enumerate(_BLOCKS):
        for j in range(ncol):
            blk = (slice(3 * i, 3 * i + 3), slice(3 * j, 3 * j + 3))
            err = float(np.linalg.norm(J[blk] - J_fd[blk])) / scale
            out.append(Check(f"{prefix}[{rn},{col_names[j]}]", err, tol))
    return out


def _factor_case(variant, seed):
    rng = _rng(seed)
    geo = GeodeticPosition(0.7, 0.3, 120.0)
    C_nb = exp_so3([0.1, -0.2, 0.4])
    v_n = np.array([4.0, -2.0, 0.3])
    if variant.is_ned:
        r = ned_position_vector(geo)
        v = v_n + (np.cross(earth_rate_n(geo), r) if variant.is_transformed else 0.0)
        state = NavState(ExtendedPose(C_nb, v, r), variant, 0.0, ImuBias([1e-4, 0, -2e-4], [0.01, -0.02, 0.0]), geo)
    else:
        C_en = dcm_ecef_to_ned(geo.lat, geo.lon).T
        r = geodetic_to_ecef(geo)
        v = C_en @ v_n + (np.cross(earth_rate_e(), r) if variant.is_transformed else 0.0)
        state = NavState(ExtendedPose(C_en @ C_nb, v, r), variant, 0.0, ImuBias([1e-4, 0, -2e-4], [0.01, -0.02, 0.0]))
    samples = [ImuSample(0.01, rng.normal(size=3) * 0.3, rng.normal(size=3) + [0.0, 0.0, -9.8]) for _ in range(50)]
    return state, samples, rng


def _suite_jacobians(fault, seed, h=1e-4, tol=1e-3):
    checks = []
    for vi, variant in enumerate(FrameVariant):
        state_i, samples, rng = _factor_case(variant, seed + vi)
        factor = build_factor(state_i, samples, SchemeKind.ZERO_ORDER_HOLD, NoiseParams(1e-6, 1e-4))
        state_j = mechanize(state_i, samples, SchemeKind.ZERO_ORDER_HOLD)
        xi = rng.normal(size=9)
        state_j = _perturb(state_j, xi * (5e-3 / np.linalg.norm(xi)))
        db = rng.normal(size=6) * 1e-4
        tag = variant.value
        J_i = jacobian_wrt_Ti(factor, state_i, state_j, db, exact=True)
        J_j = jacobian_wrt_Tj(factor, state_i, state_j, db, exact=True)
        J_b = jacobian_wrt_bias(factor, state_i, state_j, db, exact=True)
        if fault == "sign-flip" and vi == 0:
            J_i = J_i.copy()
            J_i[3:6, 0:3] *= -1.0
        fd_i = _central_diff(lambda e: residual(factor, _perturb(state_i, e), state_j, db), 9, h)
        fd_j = _central_diff(lambda e: residual(factor, state_i, _perturb(state_j, e), db), 9, h)
        fd_b = _central_diff(lambda e: residual(factor, state_i, state_j, db + e), 6, h)
        checks += _block_checks(f"{tag}:dr/dTi", J_i, fd_i, _BLOCKS, tol)
        checks += _block_checks(f"{tag}:dr/dTj", J_j, fd_j, _BLOCKS, tol)
        checks += _block_checks(f"{tag}:dr/db", J_b, fd_b, _BIAS_BLOCKS, tol)
    # residual of the propagated triple
    state_i, samples, _ = _factor_case(FrameVariant.TRANSFORMED_ECEF, seed)
    factor = build_factor(state_i, samples, SchemeKind.ZERO_ORDER_HOLD)
    state_j = propagate_state(state_i, factor.Gamma_ij, factor.Upsilon_hat)
    checks.append(Check("consistent-triple-residual", float(np.max(np.abs(residual(factor, state_i, state_j)))), 1e-9))
    return checks


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def _suite_oracles(fault, seed):
    checks = []
    params = WGS84
    geo = GeodeticPosition(0.8, -0.4, 300.0)
    r = geodetic_to_ecef(geo, params)
    pose = ExtendedPose(np.eye(3), np.cross([0.0, 0.0, params.omega_ie], r), r)
    ctx = kinematic_context(FrameVariant.TRANSFORMED_ECEF, pose, None, params)
    T = 1.0
    g = global_step(ctx, T)
    gr = np.array(g.gr)
    if fault == "sign-flip":
        gr = -gr
    C, v, rr = rk4_global_increment(ctx.omega_frame, ctx.gravitation_G, T, 10000)
    checks.append(Check("ecef-global-increment:att", _max_err(g.gC, C), 1e-11))
    checks.append(Check("ecef-global-increment:vel", _max_err(g.gv, v), 1e-9))
    checks.append(Check("ecef-global-increment:pos", _max_err(gr, rr), 1e-9))
    rng = _rng(seed)
    w = rng.normal(size=3) * 0.5
    f = rng.normal(size=3) * 3.0
    u = local_step(SchemeKind.ZERO_ORDER_HOLD, ImuSample(T, w, f))
    C, v, rr = rk4_local_increment(w, f, T, 10000)
    checks.append(Check("zoh-local-increment:att", _max_err(u.dC, C), 1e-11))
    checks.append(Check("zoh-local-increment:vel", _max_err(u.dv, v), 1e-11))
    checks.append(Check("zoh-local-increment:pos", _max_err(u.dr, rr), 1e-11))
    ctx_n = kinematic_context(FrameVariant.TRANSFORMED_NED, ExtendedPose(np.eye(3), np.zeros(3), np.zeros(3)), geo, params)
    gn = global_step(ctx_n, 0.01)
    C, v, rr = rk4_global_increment(ctx_n.omega_frame, ctx_n.gravitation_G, 0.01, 100)
    checks.append(Check("ned-global-increment", max(_max_err(gn.gC, C), _max_err(gn.gv, v), _max_err(gn.gr, rr)), 1e-10))
    return checks


# ---------------------------------------------------------------------------
# bias
# ---------------------------------------------------------------------------


def _suite_bias(fault, seed, n=1000):
    rng = _rng(seed)
    samples = [ImuSample(0.005, rng.normal(size=3) * 0.5, rng.normal(size=3) * 2.0 + [0.0, 0.0, -9.8]) for _ in range(n)]
    b_bar = ImuBias(rng.normal(size=3) * 1e-3, rng.normal(size=3) * 1e-2)
    U, J_rec = preintegrate_with_jacobian(samples, SchemeKind.ZERO_ORDER_HOLD, b_bar)
    J_cf = bias_jacobian_closed_form(samples, b_bar).matrix.copy()
    if fault == "sign-flip":
        J_cf[6:9, 0:3] *= -1.0
    scale = max(1.0, float(np.max(np.abs(J_rec.matrix))))
    checks = [Check("recursive-vs-closed-form", _max_err(J_rec.matrix, J_cf) / scale, 1e-10)]
    direction = rng.normal(size=6)
    direction /= np.linalg.norm(direction)
    errs = []
    for eps in (1e-2, 5e-3):
        db = direction * eps
        exact = preintegrate(samples, SchemeKind.ZERO_ORDER_HOLD, b_bar + db)
        approx = apply_bias_correction(U, J_rec, db)
        errs.append(float(np.linalg.norm(log_se23(approx.as_pose().inverse() @ exact.as_pose()))))
    checks.append(Check("richardson-ratio-deviation", abs(errs[0] / errs[1] - 4.0), 0.3))
    return checks


# ---------------------------------------------------------------------------
# monotonicity
# ---------------------------------------------------------------------------


def _suite_monotonicity(fault, seed, n=1000):
    rng = _rng(seed)
    noise = NoiseParams(1e-6, 1e-4)
    S = Covariance9(np.diag([1e-6] * 3 + [1e-4] * 3 + [1e-2] * 3), PerturbationSide.RIGHT_LOCAL)
    chain = [S]
    worst_det = 0.0
    for k in range(n):
        s = ImuSample(0.01, rng.normal(size=3) * 0.3, rng.normal(size=3) + [0.0, 0.0, -9.8])
        A = transition_A(PerturbationSide.RIGHT_LOCAL, local_step(SchemeKind.ZERO_ORDER_HOLD, s))
        worst_det = max(worst_det, abs(np.linalg.det(A) - 1.0))
        S = propagate_cov(PerturbationSide.RIGHT_LOCAL, S, A, noise_jacobian_G(s), noise.Q(s.dt))
        if fault == "sign-flip" and k == n // 2:
            S = Covariance9(0.5 * S.matrix, S.side)
        chain.append(S)
    report = verify_monotonicity(chain)
    return [
        Check("det-A-equals-one", worst_det, 1e-10),
        Check("log-det-violations", float(len(report.violations)), 0.0),
    ]


_RUNNERS = {
    "group-axioms": _suite_group_axioms,
    "jacobians": _suite_jacobians,
    "oracles": _suite_oracles,
    "bias": _suite_bias,
    "monotonicity": _suite_monotonicity,
}


def run_suite(what, inject_fault=None, seed=0):
    if what not in _RUNNERS:
        raise ValueError(f"unknown suite {what!r}; choose from {', '.join(SUITES)}")
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}")
    report = VerifyReport(what, fault=inject_fault)
    try:
        report.checks = _RUNNERS[what](inject_fault, seed)
    except Exception as exc:  # reported, not thrown
        report.checks = [Check(f"exception:{type(exc).__name__}: {exc}", math.inf, 0.0)]
    return report


def run_verify(what, inject_fault=None, seed=0):
    """Run one suite, or all of them for ``what == "all"``; returns the reports."""
    names = SUITES if what == "all" else (what,)
    return [run_suite(name, inject_fault, seed) for name in names]
