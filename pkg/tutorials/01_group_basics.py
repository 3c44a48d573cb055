"""
Extended poses: building them, composing them and moving between the group
and its tangent space.

Run with ``python3 tutorials/01_group_basics.py``.
"""

import numpy as np

from se23preint.se23_core import (
    ExtendedPose,
    adjoint,
    exp_se23,
    gamma,
    log_se23,
    phi_auto,
    tangent,
)

np.set_printoptions(precision=5, suppress=True)

# A tangent vector stacks rotation, velocity and position parts.
xi = tangent(phi=[0.1, -0.2, 0.3], theta=[1.0, 0.0, 0.5], zeta=[0.0, 2.0, -1.0])
T = exp_se23(xi)
print("exp(xi) as a 5x5 matrix:")
print(T.as_matrix())

# log undoes exp up to rounding.
print("log(exp(xi)) - xi:", log_se23(T) - xi)

# The gamma series: Gamma_0 is the rotation itself, Gamma_1 the left Jacobian
# of SO(3) and Gamma_2 the weight that turns a constant force into a position.
phi = np.array([0.1, -0.2, 0.3])
for m in range(3):
    print(f"Gamma_{m}(phi) =")
    print(gamma(m, phi))

# Composition is the matrix product; the adjoint moves a perturbation from
# the right of a pose to its left.
S = exp_se23(np.arange(9) * 0.05)
eta = np.full(9, 1e-3)
right = T @ exp_se23(eta)
left = exp_se23(adjoint(T) @ eta) @ T
print("right vs. left perturbation mismatch:", np.max(np.abs(right.as_matrix() - left.as_matrix())))

# The time automorphism advances position by velocity times dt. It is a group
# automorphism, so it commutes with the product.
dt = 0.5
a = phi_auto(dt, T @ S).as_matrix()
b = (phi_auto(dt, T) @ phi_auto(dt, S)).as_matrix()
print("Phi(TS) - Phi(T)Phi(S):", np.max(np.abs(a - b)))

print("identity pose:", ExtendedPose.identity().as_matrix().diagonal())
