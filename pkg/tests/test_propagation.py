import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from se23preint.earth_models import (
    FrameVariant,
    earth_rate_e,
    earth_rate_n,
    from_transformed_velocity,
    gravity_n,
)
from se23preint.increments import (
    GlobalIncrement,
    ImuSample,
    LocalIncrement,
    SchemeKind,
    global_step,
    local_step,
)
from se23preint.oracles import integrate_kinematics
from se23preint.propagation import (
    Covariance9,
    CovarianceStep,
    NavState,
    NoiseParams,
    NonPSDError,
    PerturbationSide,
    batch_covariance,
    context_for,
    extract_local_increment,
    left_noise_input,
    left_to_right,
    mechanize,
    noise_jacobian_G,
    propagate_cov,
    propagate_state,
    right_to_left,
    symmetrize_psd,
    transition_A,
    transition_product,
)
from se23preint.se23_core import ExtendedPose, adjoint, exp_se23, log_se23

RIGHT = PerturbationSide.RIGHT_LOCAL
LEFT = PerturbationSide.LEFT_COMMON_FRAME
ZOH = SchemeKind.ZERO_ORDER_HOLD
VARIANTS = list(FrameVariant)


def max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def random_samples(rng, n, dt=0.01):
    out = []
    for _ in range(n):
        f = np.array([0.0, 0.0, -9.8]) + rng.normal(size=3)
        out.append(ImuSample(dt, rng.normal(size=3) * 0.1, f))
    return out


def random_spd(rng, n=9, scale=1.0):
    A = rng.normal(size=(n, n))
    return scale * (A @ A.T + n * np.eye(n))


def step_parts(state, sample):
    G = global_step(context_for(state), sample.dt)
    return G, local_step(ZOH, sample)


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


def test_ned_state_needs_geodetic_anchor():
    with pytest.raises(ValueError, match="geodetic"):
        NavState(ExtendedPose.identity(), FrameVariant.NED)


def test_covariance_must_be_symmetric_9x9():
    with pytest.raises(ValueError):
        Covariance9(np.eye(6), RIGHT)
    M = np.eye(9)
    M[0, 1] = 1e-3
    with pytest.raises(ValueError, match="symmetric"):
        Covariance9(M, RIGHT)


def test_side_parse():
    assert PerturbationSide.parse("right") is RIGHT
    assert PerturbationSide.parse("LeftCommonFrame") is LEFT
    with pytest.raises(ValueError):
        PerturbationSide.parse("middle")


def test_noise_params_discretization():
    Q = NoiseParams(1e-6, 1e-4).Q(0.01)
    assert np.allclose(np.diag(Q), [1e-4] * 3 + [1e-2] * 3, rtol=1e-15, atol=0.0)
    with pytest.raises(ValueError):
        NoiseParams(-1.0)
    with pytest.raises(ValueError):
        NoiseParams(bias_tau=0.0)


# ---------------------------------------------------------------------------
# state propagation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("variant", VARIANTS, ids=lambda v: v.value)
def test_identity_increments_leave_state_unchanged(variant, make_state):
    s = make_state(variant)
    omega = context_for(s).omega_ie
    t = propagate_state(s, GlobalIncrement.identity(variant, omega), LocalIncrement.identity(ZOH))
    assert max_abs(t.pose.C, s.pose.C) == 0.0
    assert max_abs(t.pose.v, s.pose.v) < 1e-9
    assert max_abs(t.pose.r, s.pose.r) == 0.0
    assert t.epoch == s.epoch


@pytest.mark.parametrize("variant", [FrameVariant.TRANSFORMED_ECEF, FrameVariant.TRANSFORMED_NED], ids=lambda v: v.value)
def test_transformed_propagation_is_a_dense_group_product(variant, make_state, rng):
    s = make_state(variant)
    for sample in random_samples(rng, 5):
        G, U = step_parts(s, sample)
        t = propagate_state(s, G, U)
        E = np.eye(5)
        E[3, 4] = sample.dt
        dense = G.as_pose().as_matrix() @ np.linalg.inv(E) @ s.pose.as_matrix() @ E @ U.as_pose().as_matrix()
        assert max_abs(t.pose.C, dense[:3, :3]) < 1e-15
        assert max_abs(t.pose.v, dense[:3, 3]) < 1e-8
        assert max_abs(t.pose.r, dense[:3, 4]) < 1e-8
        s = t


@pytest.mark.parametrize("variant", VARIANTS, ids=lambda v: v.value)
def test_extract_inverts_propagate(variant, make_state, rng):
    s = make_state(variant)
    for sample in random_samples(rng, 10):
        G, U = step_parts(s, sample)
        t = propagate_state(s, G, U)
        back = extract_local_increment(s, t, G)
        assert max_abs(back.dC, U.dC) < 1e-15
        assert max_abs(back.dv, U.dv) < 1e-13
        # the endpoint positions are an earth radius long; their ulp is about 1e-9
        assert max_abs(back.dr, U.dr) < 2e-9
        s = t


def test_propagation_checks_variant_and_interval(make_state):
    s = make_state(FrameVariant.ECEF)
    other = make_state(FrameVariant.TRANSFORMED_ECEF)
    G = global_step(context_for(other), 0.01)
    U = local_step(ZOH, ImuSample(0.01, [0, 0, 0], [0, 0, 0]))
    with pytest.raises(ValueError):
        propagate_state(s, G, U)
    G = global_step(context_for(s), 0.02)
    with pytest.raises(ValueError, match="interval"):
        propagate_state(s, G, U)
    with pytest.raises(ValueError):
        extract_local_increment(s, other, G)


@pytest.mark.parametrize("family", ["ECEF", "NED"])
def test_transformed_and_untransformed_agree(family, make_state, rng):
    samples = random_samples(rng, 100)
    plain = FrameVariant.parse(family)
    a = mechanize(make_state(plain), samples, ZOH)
    b = mechanize(make_state(plain.transformed), samples, ZOH)
    w = earth_rate_e() if family == "ECEF" else earth_rate_n(b.geodetic)
    assert max_abs(a.pose.C, b.pose.C) < 1e-13
    # ECEF steps are exact in both forms; NED freezes rates per step, differently in each form
    tol_v, tol_r = (1e-9, 1e-9) if family == "ECEF" else (1e-6, 1e-8)
    assert max_abs(a.pose.v, from_transformed_velocity(b.pose.v, b.pose.r, w)) < tol_v
    assert max_abs(a.pose.r, b.pose.r) < tol_r


@pytest.mark.parametrize("variant", VARIANTS, ids=lambda v: v.value)
def test_mechanization_tracks_direct_integration(variant, make_state, rng):
    if variant.is_ned:
        # level body, constant velocity: the transport rate then barely changes
        # over a step, which is what the frozen per-step rate assumes
        s = make_state(variant, C_nb=np.eye(3), v_n=(3.0, 1.0, 0.0))
        f = -gravity_n(s.geodetic) + np.array([0.0, 0.0, -0.3])
        samples = [ImuSample(0.01, earth_rate_n(s.geodetic), f)] * 100
    else:
        samples = random_samples(rng, 100)
        s = make_state(variant)
    est = mechanize(s, samples, ZOH)
    pose, geo = integrate_kinematics(s, samples, substeps=4)
    assert max_abs(est.pose.C, pose.C) < 1e-8
    assert max_abs(est.pose.v, pose.v) < 1e-6
    assert max_abs(est.pose.r, pose.r) < 1e-6
    if variant.is_ned:
        assert abs(est.geodetic.h - geo.h) < 1e-6


def test_static_ned_state_stays_put(make_state):
    s = make_state(FrameVariant.NED, v_n=(0.0, 0.0, 0.0), C_nb=np.eye(3))
    w_b = earth_rate_n(s.geodetic)
    f_b = -gravity_n(s.geodetic)
    samples = [ImuSample(0.01, w_b, f_b)] * 100
    est = mechanize(s, samples, ZOH)
    assert max_abs(est.pose.v, np.zeros(3)) < 1e-9
    assert abs(est.geodetic.h - s.geodetic.h) < 1e-8


def test_mechanize_history(make_state, rng):
    samples = random_samples(rng, 7)
    hist = mechanize(make_state(FrameVariant.TRANSFORMED_ECEF), samples, "2", keep_history=True)
    assert len(hist) == 8
    assert hist[-1].epoch == pytest.approx(0.07, abs=1e-15)


# ---------------------------------------------------------------------------
# noise Jacobian and transitions
# ---------------------------------------------------------------------------


def test_noise_jacobian_zero_rate_blocks():
    dt = 0.01
    f = np.array([1.0, 2.0, -9.0])
    G = noise_jacobian_G(ImuSample(dt, [0, 0, 0], f))
    I = np.eye(3)
    assert max_abs(G[0:3, 0:3], -I * dt) == 0.0
    assert max_abs(G[0:3, 3:6], 0 * I) == 0.0
    assert max_abs(G[3:6, 3:6], -I * dt) == 0.0
    assert max_abs(G[6:9, 3:6], -0.5 * I * dt * dt) < 1e-20
    from se23preint.se23_core import skew

    assert max_abs(G[3:6, 0:3], 0.5 * skew(f) * dt * dt) < 1e-18
    assert max_abs(G[6:9, 0:3], skew(f) * dt**3 / 12) < 1e-20


@given(st.integers(0, 2**32 - 1))
def test_noise_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    dt = 0.01
    w, f = rng.normal(size=3), rng.normal(size=3) * 5
    sample = ImuSample(dt, w, f)
    U = local_step(ZOH, sample).as_pose()
    G = noise_jacobian_G(sample)
    h = 1e-6
    fd = np.zeros((9, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        plus = local_step(ZOH, ImuSample(dt, w - e[:3], f - e[3:])).as_pose()
        minus = local_step(ZOH, ImuSample(dt, w + e[:3], f + e[3:])).as_pose()
        fd[:, k] = (log_se23(U.inverse() @ plus) - log_se23(U.inverse() @ minus)) / (2 * h)
    # accelerometer columns are exact; gyro columns carry an O(|w| dt) relative error
    assert max_abs(G[:, 3:], fd[:, 3:]) < 1e-8 * dt
    scale = np.max(np.abs(fd[:, :3]))
    assert max_abs(G[:, :3], fd[:, :3]) < 2.0 * np.linalg.norm(w) * dt * scale + 1e-9


def test_transition_for_zero_duration_identity_is_identity():
    A = transition_A(RIGHT, LocalIncrement.identity(ZOH))
    assert max_abs(A, np.eye(9)) == 0.0
    A = transition_A(LEFT, GlobalIncrement.identity(FrameVariant.ECEF))
    assert max_abs(A, np.eye(9)) == 0.0


def test_transition_needs_matching_increment_type():
    with pytest.raises(TypeError):
        transition_A(RIGHT, GlobalIncrement.identity(FrameVariant.ECEF))
    with pytest.raises(TypeError):
        transition_A(LEFT, LocalIncrement.identity(ZOH))


def test_right_transition_maps_errors_through_one_step(rng):
    # T_next = Phi(T Exp(xi)) U = Phi(T) U Exp(A xi) exactly for the right side
    dt = 0.05
    U = local_step(ZOH, ImuSample(dt, rng.normal(size=3), rng.normal(size=3)))
    T = exp_se23(rng.normal(size=9))
    xi = rng.normal(size=9) * 1e-3
    A = transition_A(RIGHT, U)

    def phi(P):
        return ExtendedPose(P.C, P.v, P.r + dt * P.v)

    nominal = phi(T) @ U.as_pose()
    perturbed = phi(T @ exp_se23(xi)) @ U.as_pose()
    assert max_abs(log_se23(nominal.inverse() @ perturbed), A @ xi) < 1e-13


# ---------------------------------------------------------------------------
# covariance propagation
# ---------------------------------------------------------------------------


def test_zero_noise_zero_covariance_stays_zero(rng):
    U = local_step(ZOH, ImuSample(0.01, rng.normal(size=3), rng.normal(size=3)))
    S = propagate_cov(RIGHT, Covariance9.zeros(RIGHT), transition_A(RIGHT, U), noise_jacobian_G(ImuSample(0.01, [0, 0, 0], [0, 0, 0])), np.zeros((6, 6)))
    assert np.array_equal(S.matrix, np.zeros((9, 9)))


def test_left_propagation_requires_next_state():
    G = GlobalIncrement.identity(FrameVariant.ECEF)
    with pytest.raises(ValueError, match="propagated state"):
        propagate_cov(LEFT, Covariance9.zeros(LEFT), transition_A(LEFT, G), np.zeros((9, 6)), np.eye(6))


def test_side_mismatch_is_rejected():
    with pytest.raises(ValueError, match="tagged"):
        propagate_cov(RIGHT, Covariance9.zeros(LEFT), np.eye(9), np.zeros((9, 6)), np.eye(6))


def test_non_psd_noise_is_rejected():
    Q = np.eye(6)
    Q[2, 2] = -1e-3
    with pytest.raises(NonPSDError):
        propagate_cov(RIGHT, Covariance9.zeros(RIGHT), np.eye(9), np.eye(9, 6), Q)
    Q = np.eye(6)
    Q[0, 1] = 0.5
    with pytest.raises(NonPSDError, match="symmetric"):
        propagate_cov(RIGHT, Covariance9.zeros(RIGHT), np.eye(9), np.eye(9, 6), Q)


def test_symmetrize_clips_roundoff_but_not_real_negatives():
    S = np.diag([1.0, 2.0, -1e-15])
    assert np.min(np.linalg.eigvalsh(symmetrize_psd(S))) >= 0.0
    with pytest.raises(NonPSDError):
        symmetrize_psd(np.diag([1.0, -1e-3]))


def test_left_noise_input_is_adjoint_wrapped(rng):
    T = exp_se23(rng.normal(size=9))
    G = rng.normal(size=(9, 6))
    assert max_abs(left_noise_input(T, G), adjoint(T) @ G) == 0.0


def test_batch_covariance_equals_sequential_fold(rng):
    samples = random_samples(rng, 30)
    noise = NoiseParams(1e-6, 1e-4)
    Sigma0 = Covariance9(random_spd(rng, scale=1e-4), RIGHT)
    S = Sigma0
    steps = []
    for s in samples:
        A = transition_A(RIGHT, local_step(ZOH, s))
        G = noise_jacobian_G(s)
        steps.append(CovarianceStep(A, G, noise.Q(s.dt)))
        S = propagate_cov(RIGHT, S, A, G, noise.Q(s.dt))
    batch = batch_covariance(Sigma0, steps)
    assert max_abs(batch.matrix, S.matrix) < 1e-12 * np.max(np.abs(S.matrix))
    assert batch_covariance(Sigma0, []) is Sigma0


def test_transition_product_order_and_empty_range(rng):
    As = [rng.normal(size=(9, 9)) for _ in range(4)]
    assert max_abs(transition_product(As, 1, 3), As[3] @ As[2] @ As[1]) < 1e-12
    assert max_abs(transition_product(As, 2, 1), np.eye(9)) == 0.0


def test_right_and_left_covariances_convert_both_ways(rng):
    T = exp_se23(rng.normal(size=9))
    S = Covariance9(random_spd(rng), RIGHT)
    L = right_to_left(S, T)
    assert L.side is LEFT
    assert max_abs(left_to_right(L, T).matrix, S.matrix) < 1e-10 * np.max(np.abs(S.matrix))
    with pytest.raises(ValueError):
        right_to_left(L, T)
    with pytest.raises(ValueError):
        left_to_right(S, T)


def test_left_and_right_chains_describe_the_same_uncertainty(make_state, rng):
    # propagate both sides from equivalent initial covariances; their final
    # covariances must be related by the adjoint of the final state
    s = make_state(FrameVariant.TRANSFORMED_ECEF)
    s = NavState(ExtendedPose(s.pose.C, s.pose.v, np.array([120.0, -40.0, 15.0])), s.variant, 0.0, s.bias)
    noise = NoiseParams(1e-6, 1e-4)
    R = Covariance9(random_spd(rng, scale=1e-6), RIGHT)
    L = right_to_left(R, s.pose)
    from types import SimpleNamespace

    ctx = SimpleNamespace(omega_frame=np.array([0.0, 0.0, 1e-3]), gravitation_G=np.array([0.0, 0.0, -9.8]), variant=s.variant, omega_ie=np.zeros(3))
    for sample in random_samples(rng, 20):
        G = global_step(ctx, sample.dt)
        U = local_step(ZOH, sample)
        nxt = propagate_state(s, G, U)
        Gn = noise_jacobian_G(sample)
        R = propagate_cov(RIGHT, R, transition_A(RIGHT, U), Gn, noise.Q(sample.dt))
        L = propagate_cov(LEFT, L, transition_A(LEFT, G), Gn, noise.Q(sample.dt), nxt)
        s = nxt
    converted = right_to_left(R, s.pose).matrix
    assert max_abs(converted, L.matrix) < 1e-9 * np.max(np.abs(L.matrix))
