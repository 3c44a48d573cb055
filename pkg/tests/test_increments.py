import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from se23preint.earth_models import FrameVariant, GeodeticPosition, kinematic_context
from se23preint.increments import (
    GlobalIncrement,
    ImuBias,
    ImuSample,
    LocalIncrement,
    SchemeKind,
    clock_matrix,
    compose_global,
    compose_local,
    from_clock_matrix,
    gamma_prime,
    global_step,
    global_step_ecef,
    global_step_ned,
    local_step,
    preintegrate,
)
from se23preint.oracles import rk4_global_increment, rk4_local_increment
from se23preint.se23_core import ExtendedPose, exp_so3, gamma, skew

ZOH = SchemeKind.ZERO_ORDER_HOLD
CGA = SchemeKind.CONSTANT_GLOBAL_ACCEL
TWO = SchemeKind.TWO_SAMPLE

vec3 = arrays(np.float64, 3, elements=st.floats(-2.0, 2.0))


def max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def clock_shift(dt):
    E = np.eye(5)
    E[3, 4] = dt
    return E


def dense_phi(dt, M):
    """The time automorphism as a 5x5 conjugation, written independently of ``phi_auto``."""
    return np.linalg.inv(clock_shift(dt)) @ M @ clock_shift(dt)


def split_sample(dt, w, f):
    """Sample of constant rates carried as two equal half-interval increments."""
    w, f = np.asarray(w, float), np.asarray(f, float)
    return ImuSample.from_sub_increments(dt, w * dt / 2, w * dt / 2, f * dt / 2, f * dt / 2)


# ---------------------------------------------------------------------------
# samples and biases
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("dt", [0.0, -0.01, float("nan")])
def test_sample_rejects_non_positive_interval(dt):
    with pytest.raises(ValueError):
        ImuSample(dt, [0, 0, 0], [0, 0, 0])


def test_sample_rejects_non_finite_rates():
    with pytest.raises(ValueError):
        ImuSample(0.01, [0, float("inf"), 0], [0, 0, 0])


def test_sub_increments_must_sum_to_total():
    with pytest.raises(ValueError, match="sum"):
        ImuSample(0.01, [1e-3, 0, 0], [0, 0, 0.1], True, ([5e-4, 0, 0], [4e-4, 0, 0], [0, 0, 0.05], [0, 0, 0.05]))


def test_rates_and_increments_views_agree():
    s = ImuSample(0.02, [0.1, 0.2, 0.3], [1.0, 2.0, 3.0])
    inc = ImuSample(0.02, *s.increments(), True)
    for a, b in zip(s.rates(), inc.rates()):
        assert max_abs(a, b) < 1e-15


def test_bias_addition_and_vector_roundtrip():
    b = ImuBias([1, 2, 3], [4, 5, 6]) + np.array([0.5, 0, 0, 0, 0, -1])
    assert np.array_equal(b.as_vector(), [1.5, 2, 3, 4, 5, 5])
    assert np.array_equal(ImuBias.from_vector(b.as_vector()).b_a, b.b_a)


def test_scheme_parse_aliases():
    assert SchemeKind.parse("1") is CGA
    assert SchemeKind.parse(2) is ZOH
    assert SchemeKind.parse("twosamplecompensated") is TWO
    assert SchemeKind.parse("ZERO_ORDER_HOLD") is ZOH
    with pytest.raises(ValueError):
        SchemeKind.parse("4")


# ---------------------------------------------------------------------------
# local step
# ---------------------------------------------------------------------------


def test_zero_rate_step_is_constant_acceleration():
    f = np.array([0.3, -9.7, 1.2])
    dt = 0.01
    for scheme in SchemeKind:
        s = split_sample(dt, [0, 0, 0], f)
        U = local_step(scheme, s)
        assert max_abs(U.dC, np.eye(3)) == 0.0
        assert max_abs(U.dv, f * dt) < 1e-16
        assert max_abs(U.dr, 0.5 * f * dt * dt) < 1e-18


def test_zero_order_hold_matches_runge_kutta():
    w, f = np.array([0.8, -0.5, 1.1]), np.array([2.0, -1.0, 9.0])
    dt = 0.05
    U = local_step(ZOH, ImuSample(dt, w, f))
    C, v, r = rk4_local_increment(w, f, dt, 2000)
    assert max_abs(U.dC, C) < 1e-13
    assert max_abs(U.dv, v) < 1e-13
    assert max_abs(U.dr, r) < 1e-13


def test_constant_global_accel_ignores_rotation_in_velocity():
    w, f = np.array([0.8, -0.5, 1.1]), np.array([2.0, -1.0, 9.0])
    U = local_step(CGA, ImuSample(0.05, w, f))
    assert max_abs(U.dv, f * 0.05) == 0.0
    assert max_abs(U.dC, exp_so3(w * 0.05)) < 1e-15


def test_two_sample_constant_rates_agree_with_zero_order_hold_to_third_order():
    w, f = np.array([0.8, -0.5, 1.1]), np.array([2.0, -1.0, 9.0])
    errs = []
    for dt in (0.02, 0.01):
        a = local_step(TWO, split_sample(dt, w, f))
        b = local_step(ZOH, ImuSample(dt, w, f))
        assert max_abs(a.dC, b.dC) < 1e-15
        errs.append(max_abs(a.dv, b.dv))
    # velocity mismatch is third order in dt
    assert 6.0 < errs[0] / errs[1] < 10.0


def test_two_sample_needs_sub_increments():
    with pytest.raises(ValueError, match="sub-increments"):
        local_step(TWO, ImuSample(0.01, [0, 0, 0], [0, 0, 1]))


def test_two_sample_position_is_half_velocity_times_dt():
    s = ImuSample.from_sub_increments(0.01, [1e-3, 2e-4, 0], [9e-4, 3e-4, 1e-4], [0.02, 0, -0.098], [0.021, 0.001, -0.098])
    U = local_step(TWO, s)
    assert max_abs(U.dr, 0.5 * U.dv * 0.01) == 0.0


def test_bias_is_subtracted_from_rates():
    w, f = np.array([0.3, 0.1, -0.2]), np.array([0.5, 0.2, -9.8])
    b = ImuBias([0.01, -0.02, 0.03], [0.1, 0.2, -0.3])
    for scheme in (CGA, ZOH):
        with_bias = local_step(scheme, ImuSample(0.01, w, f), b)
        reference = local_step(scheme, ImuSample(0.01, w - b.b_g, f - b.b_a))
        assert max_abs(with_bias.as_pose().as_matrix(), reference.as_pose().as_matrix()) < 1e-15
    with_bias = local_step(TWO, split_sample(0.01, w, f), b)
    reference = local_step(TWO, split_sample(0.01, w - b.b_g, f - b.b_a))
    assert max_abs(with_bias.as_pose().as_matrix(), reference.as_pose().as_matrix()) < 1e-15


# ---------------------------------------------------------------------------
# local composition
# ---------------------------------------------------------------------------


def random_local(rng, scheme=ZOH):
    dt = float(rng.uniform(0.001, 0.1))
    return local_step(scheme, ImuSample(dt, rng.normal(size=3), rng.normal(size=3) * 5))


def test_identity_is_neutral(rng):
    U = random_local(rng)
    for V in (compose_local(LocalIncrement.identity(ZOH), U), compose_local(U, LocalIncrement.identity(ZOH))):
        assert max_abs(clock_matrix(V), clock_matrix(U)) < 1e-15


@given(st.integers(0, 2**32 - 1))
def test_composition_is_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_local(rng) for _ in range(3))
    left = compose_local(compose_local(a, b), c)
    right = compose_local(a, compose_local(b, c))
    assert max_abs(clock_matrix(left), clock_matrix(right)) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_clock_matrix_is_a_homomorphism(seed):
    rng = np.random.default_rng(seed)
    a, b = random_local(rng), random_local(rng)
    assert max_abs(clock_matrix(compose_local(a, b)), clock_matrix(a) @ clock_matrix(b)) < 1e-13
    # and the same product through the time automorphism on the 5x5 poses
    dense = dense_phi(b.dt, a.as_pose().as_matrix()) @ b.as_pose().as_matrix()
    assert max_abs(compose_local(a, b).as_pose().as_matrix(), dense) < 1e-13


def test_clock_matrix_roundtrip(rng):
    U = random_local(rng)
    V = from_clock_matrix(clock_matrix(U))
    assert max_abs(clock_matrix(U), clock_matrix(V)) == 0.0


def test_composition_keeps_the_coarser_scheme(rng):
    a, b, c = random_local(rng, CGA), random_local(rng, ZOH), LocalIncrement.identity(TWO)
    assert compose_local(a, b).scheme is CGA
    assert compose_local(b, a).scheme is CGA
    assert compose_local(c, b).scheme is ZOH
    assert compose_local(c, c).scheme is TWO


def test_preintegrate_folds_step_by_step(rng):
    samples = [ImuSample(0.01, rng.normal(size=3), rng.normal(size=3)) for _ in range(20)]
    U = preintegrate(samples, "2")
    M = np.eye(5)
    for s in samples:
        M = M @ clock_matrix(local_step(ZOH, s))
    assert max_abs(clock_matrix(U), M) < 1e-13
    assert U.dt == pytest.approx(0.2, abs=1e-15)


def test_preintegrate_matches_direct_sums(rng):
    """Velocity and position of a folded window equal the summed per-sample contributions."""
    samples = [ImuSample(0.01, rng.normal(size=3), rng.normal(size=3) * 3) for _ in range(50)]
    U = preintegrate(samples, ZOH)
    P, mu, zeta = np.eye(3), np.zeros(3), np.zeros(3)
    for s in samples:
        phi = s.gyro * s.dt
        zeta = zeta + mu * s.dt + P @ gamma(2, phi) @ s.accel * s.dt**2
        mu = mu + P @ gamma(1, phi) @ s.accel * s.dt
        P = P @ exp_so3(phi)
    assert max_abs(U.dC, P) < 1e-12
    assert max_abs(U.dv, mu) < 1e-12
    assert max_abs(U.dr, zeta) < 1e-12


def test_preintegrate_zero_order_hold_constant_rates_over_window():
    w, f = np.array([0.2, -0.1, 0.4]), np.array([1.0, 0.5, -9.8])
    U = preintegrate([ImuSample(0.01, w, f)] * 100, ZOH)
    C, v, r = rk4_local_increment(w, f, 1.0, 4000)
    assert max_abs(U.dC, C) < 1e-12
    assert max_abs(U.dv, v) < 1e-12
    assert max_abs(U.dr, r) < 1e-12


def test_local_increment_rejects_non_rotation():
    with pytest.raises(ValueError):
        LocalIncrement(np.eye(3) * 1.01, np.zeros(3), np.zeros(3), 0.1)


# ---------------------------------------------------------------------------
# global increment
# ---------------------------------------------------------------------------


@pytest.fixture
def ecef_ctx(make_state):
    s = make_state(FrameVariant.TRANSFORMED_ECEF)
    return kinematic_context(s.variant, s.pose)


@pytest.fixture
def ned_ctx(make_state):
    s = make_state(FrameVariant.TRANSFORMED_NED)
    return kinematic_context(s.variant, s.pose, s.geodetic)


def test_zero_duration_global_step_is_identity(ecef_ctx):
    g = global_step(ecef_ctx, 0.0)
    assert max_abs(g.as_pose().as_matrix(), np.eye(5)) == 0.0


def test_negative_duration_rejected(ecef_ctx):
    with pytest.raises(ValueError):
        global_step(ecef_ctx, -1.0)


def test_global_step_matches_runge_kutta(ned_ctx):
    dt = 5.0
    g = global_step(ned_ctx, dt)
    C, v, r = rk4_global_increment(ned_ctx.omega_frame, ned_ctx.gravitation_G, dt, 5000)
    assert max_abs(g.gC, C) < 1e-14
    assert max_abs(g.gv, v) < 1e-12
    assert max_abs(g.gr, r) < 1e-11


@given(vec3, vec3, st.floats(1e-3, 1.0))
def test_global_step_closed_form_against_runge_kutta(omega, G, dt):
    from types import SimpleNamespace

    ctx = SimpleNamespace(omega_frame=omega, gravitation_G=G, variant=FrameVariant.TRANSFORMED_ECEF, omega_ie=np.zeros(3))
    g = global_step(ctx, dt)
    C, v, r = rk4_global_increment(omega, G, dt, 1000)
    assert max_abs(g.gC, C) < 1e-10
    assert max_abs(g.gv, v) < 1e-10
    assert max_abs(g.gr, r) < 1e-10


def test_global_delta_is_accurate_for_tiny_rotations(ecef_ctx):
    g = global_step(ecef_ctx, 0.01)
    phi = -ecef_ctx.omega_frame * 0.01
    # exponential series minus its leading identity, summed directly
    P = skew(phi)
    series, term = np.zeros((3, 3)), np.eye(3)
    for k in range(1, 8):
        term = term @ P / k
        series = series + term
    assert np.max(np.abs(g.gC_delta - series)) <= 1e-15 * np.max(np.abs(series))


def test_n_equal_steps_compose_to_one_step(ecef_ctx):
    one = global_step(ecef_ctx, 1.0)
    acc = GlobalIncrement.identity(ecef_ctx.variant, ecef_ctx.omega_ie)
    for _ in range(100):
        acc = compose_global(global_step(ecef_ctx, 0.01), acc)
    assert acc.dt == pytest.approx(1.0, abs=1e-12)
    assert max_abs(acc.gC, one.gC) < 1e-14
    assert max_abs(acc.gC_delta, one.gC_delta) < 1e-16
    assert max_abs(acc.gv, one.gv) < 1e-12
    assert max_abs(acc.gr, one.gr) < 1e-10


def test_two_ned_half_steps_equal_one_step(ned_ctx):
    two = compose_global(global_step_ned(ned_ctx, 0.005), global_step_ned(ned_ctx, 0.005))
    one = global_step_ned(ned_ctx, 0.01)
    assert max_abs(two.as_pose().as_matrix(), one.as_pose().as_matrix()) < 1e-15


def test_compose_global_matches_dense_product(rng):
    def random_global(dt):
        ctx_omega = rng.normal(size=3) * 1e-3
        G = rng.normal(size=3) * 10
        from types import SimpleNamespace

        ctx = SimpleNamespace(omega_frame=ctx_omega, gravitation_G=G, variant=FrameVariant.ECEF, omega_ie=ctx_omega)
        return global_step(ctx, dt)

    a, b = random_global(0.3), random_global(0.7)
    dense = b.as_pose().as_matrix() @ dense_phi(b.dt, a.as_pose().as_matrix())
    assert max_abs(compose_global(b, a).as_pose().as_matrix(), dense) < 1e-13
    assert np.array_equal(compose_global(b, a).omega_ie, a.omega_ie)


def test_compose_global_rejects_mixed_variants(ecef_ctx, ned_ctx):
    with pytest.raises(ValueError):
        compose_global(global_step(ecef_ctx, 0.01), global_step(ned_ctx, 0.01))


def test_variant_specific_steps_check_family(ecef_ctx, ned_ctx):
    with pytest.raises(ValueError):
        global_step_ecef(ned_ctx, 0.01)
    with pytest.raises(ValueError):
        global_step_ned(ecef_ctx, 0.01)


def test_gamma_delta_must_be_consistent():
    with pytest.raises(ValueError, match="gC_delta"):
        GlobalIncrement(np.eye(3), np.zeros(3), np.zeros(3), 0.1, FrameVariant.ECEF, gC_delta=np.full((3, 3), 1e-6))


def test_gamma_prime_shifts_velocity_by_end_earth_rate(make_state):
    s = make_state(FrameVariant.ECEF)
    g = global_step(kinematic_context(s.variant, s.pose), 0.01)
    r_end = np.array([1.0, 2.0, 3.0]) * 1e6
    shifted = gamma_prime(FrameVariant.ECEF, g, r_end)
    assert max_abs(shifted.gv, g.gv - np.cross(g.gC @ g.omega_ie, r_end)) == 0.0
    assert max_abs(shifted.gr, g.gr) == 0.0


def test_gamma_prime_without_earth_rate_is_unchanged():
    g = GlobalIncrement(exp_so3([0, 0, 1e-4]), [0.0, 0.0, 0.098], [0.0, 0.0, 4.9e-4], 0.01, FrameVariant.NED)
    shifted = gamma_prime(FrameVariant.NED, g, [6.4e6, 0.0, 0.0])
    assert max_abs(shifted.gv, g.gv) == 0.0


def test_gamma_prime_rejects_transformed_variant(ecef_ctx):
    with pytest.raises(ValueError):
        gamma_prime(FrameVariant.TRANSFORMED_ECEF, global_step(ecef_ctx, 0.01), np.zeros(3))


def test_global_zero_rate_is_free_fall():
    from types import SimpleNamespace

    G = np.array([0.0, 0.0, 9.8])
    ctx = SimpleNamespace(omega_frame=np.zeros(3), gravitation_G=G, variant=FrameVariant.NED, omega_ie=np.zeros(3))
    g = global_step(ctx, 2.0)
    assert max_abs(g.gC, np.eye(3)) == 0.0
    assert max_abs(g.gv, G * 2.0) < 1e-15
    assert max_abs(g.gr, 0.5 * G * 4.0) < 1e-14


def test_global_increment_pose_view():
    g = GlobalIncrement.identity(FrameVariant.TRANSFORMED_NED)
    assert isinstance(g.as_pose(), ExtendedPose)
    assert g.variant is FrameVariant.TRANSFORMED_NED
    assert GeodeticPosition(0.1, 0.2, 0.0).lat == 0.1
