import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from se23preint.bias_update import (
    BiasJacobian,
    apply_bias_correction,
    bias_jacobian_closed_form,
    bias_jacobian_recursive,
    preintegrate_with_jacobian,
)
from se23preint.increments import ImuBias, ImuSample, SchemeKind, local_step, preintegrate
from se23preint.propagation import PerturbationSide, noise_jacobian_G, transition_A
from se23preint.se23_core import log_se23, skew

ZOH = SchemeKind.ZERO_ORDER_HOLD


def max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def random_window(rng, n, dt=0.01):
    return [ImuSample(dt, rng.normal(size=3) * 0.5, np.array([0.0, 0.0, -9.8]) + rng.normal(size=3)) for _ in range(n)]


def fd_bias_jacobian(samples, b_bar, h=1e-6):
    """Central differences of ``Log(Upsilon(b_bar)^-1 Upsilon(b_bar + db))`` by re-preintegration."""
    base = preintegrate(samples, ZOH, b_bar).as_pose().inverse()
    J = np.zeros((9, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        plus = log_se23(base @ preintegrate(samples, ZOH, b_bar + e).as_pose())
        minus = log_se23(base @ preintegrate(samples, ZOH, b_bar + (-e)).as_pose())
        J[:, k] = (plus - minus) / (2 * h)
    return J


def test_single_step_jacobian_is_the_noise_map(rng):
    s = random_window(rng, 1)[0]
    _, J = preintegrate_with_jacobian([s], ZOH)
    G = noise_jacobian_G(s)
    G[0:3, 3:6] = 0.0
    assert max_abs(J.matrix, G) < 1e-18


def test_single_zero_rate_sample_blocks():
    dt = 0.01
    f = np.array([0.5, -0.2, -9.8])
    J = bias_jacobian_closed_form([ImuSample(dt, [0, 0, 0], f)]).matrix
    I = np.eye(3)
    assert max_abs(J[0:3, 0:3], -I * dt) < 1e-18
    assert max_abs(J[3:6, 3:6], -I * dt) < 1e-18
    assert max_abs(J[6:9, 3:6], -0.5 * I * dt * dt) < 1e-18
    assert max_abs(J[3:6, 0:3], 0.5 * skew(f) * dt * dt) < 1e-18


@pytest.mark.parametrize("n", [1, 2, 50])
def test_closed_form_matches_recursion(n, rng):
    samples = random_window(rng, n)
    b = ImuBias([0.01, -0.02, 0.005], [0.05, 0.0, -0.1])
    _, J = preintegrate_with_jacobian(samples, ZOH, b)
    Jc = bias_jacobian_closed_form(samples, b)
    assert max_abs(J.matrix, Jc.matrix) < 1e-12 * max(1.0, np.max(np.abs(J.matrix)))


@given(st.integers(0, 2**32 - 1))
def test_jacobian_matches_re_preintegration(seed):
    rng = np.random.default_rng(seed)
    samples = random_window(rng, 20)
    b = ImuBias(rng.normal(size=3) * 0.01, rng.normal(size=3) * 0.1)
    _, J = preintegrate_with_jacobian(samples, ZOH, b)
    fd = fd_bias_jacobian(samples, b)
    # accelerometer columns are exact; gyro columns share the noise map's O(|w| dt) splitting error
    assert max_abs(J.matrix[:, 3:], fd[:, 3:]) < 1e-8
    assert max_abs(J.matrix[:, :3], fd[:, :3]) < 0.02 * np.max(np.abs(fd[:, :3]))


def test_zero_bias_change_is_a_no_op(rng):
    samples = random_window(rng, 10)
    U, J = preintegrate_with_jacobian(samples, ZOH)
    V = apply_bias_correction(U, J, np.zeros(6))
    assert max_abs(V.as_pose().as_matrix(), U.as_pose().as_matrix()) == 0.0
    assert V.dt == U.dt and V.scheme is U.scheme


def test_small_bias_change_matches_re_preintegration(rng):
    samples = random_window(rng, 100)
    U, J = preintegrate_with_jacobian(samples, ZOH)
    db = np.array([1e-4, -1e-4, 1e-4, 1e-4, 1e-4, -1e-4])
    corrected = apply_bias_correction(U, J, db)
    exact = preintegrate(samples, ZOH, ImuBias() + db)
    err = log_se23(exact.as_pose().inverse() @ corrected.as_pose())
    assert np.max(np.abs(err)) <= 1e-7


def test_correction_error_is_second_order_in_bias_change(rng):
    samples = random_window(rng, 100)
    U, J = preintegrate_with_jacobian(samples, ZOH)
    direction = rng.normal(size=6)
    errs = []
    for eps in (1e-3, 5e-4):
        db = direction * eps
        exact = preintegrate(samples, ZOH, ImuBias() + db)
        errs.append(np.max(np.abs(log_se23(exact.as_pose().inverse() @ apply_bias_correction(U, J, db).as_pose()))))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_attitude_rows_do_not_see_accelerometer_bias(rng):
    _, J = preintegrate_with_jacobian(random_window(rng, 30), ZOH)
    assert np.all(J.matrix[0:3, 3:6] == 0.0)
    with pytest.raises(ValueError, match="accelerometer"):
        BiasJacobian(np.ones((9, 6)))


def test_recursive_step_from_zero(rng):
    s = random_window(rng, 1)[0]
    A = transition_A(PerturbationSide.RIGHT_LOCAL, local_step(ZOH, s))
    G = noise_jacobian_G(s)
    J = bias_jacobian_recursive(BiasJacobian.zeros(), A, G)
    assert max_abs(J.matrix[:, :3], G[:, :3]) == 0.0


def test_empty_window_gives_zero_jacobian():
    J = bias_jacobian_closed_form([])
    assert np.array_equal(J.matrix, np.zeros((9, 6)))


def test_bias_increment_must_be_six_vector(rng):
    U, J = preintegrate_with_jacobian(random_window(rng, 3), ZOH)
    with pytest.raises(ValueError):
        apply_bias_correction(U, J, np.zeros(3))


def test_other_schemes_reuse_zero_order_hold_jacobian(rng):
    samples = random_window(rng, 10)
    two = [ImuSample.from_sub_increments(s.dt, *(s.gyro * s.dt / 2,) * 2, *(s.accel * s.dt / 2,) * 2) for s in samples]
    U2, J2 = preintegrate_with_jacobian(two, SchemeKind.TWO_SAMPLE)
    _, J = preintegrate_with_jacobian(samples, ZOH)
    assert U2.scheme is SchemeKind.TWO_SAMPLE
    assert max_abs(J2.matrix, J.matrix) < 1e-15
