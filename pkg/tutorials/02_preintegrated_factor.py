"""
From a simulated IMU stream to a preintegrated factor.

The stream comes from an analytic great-circle flight. One second of samples
is folded into a local increment with its covariance and bias Jacobian, and
the factor residual is evaluated at the true end state, at a perturbed end
state and after a small bias change.

Run with ``python3 tutorials/02_preintegrated_factor.py``.
"""

import math

import numpy as np

from se23preint.earth_models import FrameVariant
from se23preint.factors import build_factor, factor_to_json, jacobian_wrt_Tj, residual
from se23preint.increments import SchemeKind
from se23preint.propagation import NavState, NoiseParams
from se23preint.se23_core import exp_se23
from se23preint.simkit.sensors import SensorErrorSpec, synthesize_imu
from se23preint.simkit.trajectories import GreatCircle, start_geodetic, truth_state
from se23preint.uncertainty_metrics import DOpt, criterion_value

np.set_printoptions(precision=4, suppress=False)

traj = GreatCircle(1.0, 100.0, start_geodetic(30.0, -40.0, 0.0), (0.0, 0.0, math.radians(60.0)), speed=200.0)
noise = NoiseParams(1e-9, 1e-5)
stream = synthesize_imu(traj, SensorErrorSpec(noise.gyro_psd, noise.accel_psd), seed=11)
print(f"{len(stream.samples)} samples at {traj.rate_hz:.0f} Hz")

variant = FrameVariant.TRANSFORMED_NED
state_i = truth_state(stream.truth[0], variant)
state_j = truth_state(stream.truth[-1], variant)

factor = build_factor(state_i, stream.samples, SchemeKind.TWO_SAMPLE, noise)
print("preintegrated velocity increment:", factor.Upsilon_hat.dv)
print("residual covariance D-optimality:", criterion_value(DOpt, factor.Sigma))

# At the true endpoints the residual is at the noise level.
r = residual(factor, state_i, state_j)
print("residual at truth:", r)
print("whitened residual norm:", float(np.sqrt(r @ np.linalg.solve(factor.Sigma.matrix, r))))

# Moving the end state shows up one-to-one in the residual.
xi = np.zeros(9)
xi[6] = 0.5  # half a meter along the body x axis
moved = NavState(state_j.pose @ exp_se23(xi), variant, state_j.epoch, state_j.bias, state_j.geodetic)
print("residual change after a 0.5 m shift:", residual(factor, state_i, moved) - r)
print("end-state Jacobian is the identity:", np.allclose(jacobian_wrt_Tj(factor, state_i, state_j), np.eye(9)))

# A bias change is absorbed through the first-order bias Jacobian.
db = np.array([1e-5, 0.0, 0.0, 0.0, 0.0, 1e-3])
print("residual with a bias change:", residual(factor, state_i, state_j, db))

print(f"serialized factor: {len(factor_to_json(factor))} characters of JSON")
