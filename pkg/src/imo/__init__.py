"""Learned-inertial odometry toolkit: error-state EKF with cloned poses,
displacement providers (oracle, thrust model, TCN), a deterministic
quadrotor simulator, and trajectory evaluation."""

__version__ = "0.1.0"
