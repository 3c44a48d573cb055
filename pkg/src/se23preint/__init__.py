"""Unified SE_2(3) IMU preintegration: group machinery, frame kinematics,
global/local increments, covariance propagation, bias Jacobians and factors."""

__version__ = "0.1.0"
