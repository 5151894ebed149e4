"""Interchangeable sources of displacement measurements for the filter:
ground-truth oracle, closed-form thrust-model integration, and TCN
inference; plus chained-displacement trajectory building for ablations.

Each provider is a callable MeasurementWindow -> DisplacementMeasurement
(or None to skip the update).
"""

import numpy as np

from . import so3, tcn
from .ekf import DisplacementMeasurement
from .sim import GRAVITY, displacement_oracle

MODEL_SUBSTEP = 0.01  # s, zero-order-hold integration step


def build_gt_window(dataset, t_i, t_j):
    """Window inputs over [t_i, t_j) built from ground truth: world-frame
    commanded thrust and bias-free world-frame gyro per 100 Hz sample, plus
    velocity and orientation at t_i."""
    ds = dataset
    mask = (ds.cmd_t >= t_i - 1e-9) & (ds.cmd_t < t_j - 1e-9)
    idx = np.flatnonzero(mask)
    times = ds.cmd_t[idx]
    thrust = np.einsum(
        "nij,nj->ni", ds.gt_R[idx],
        np.column_stack([np.zeros((len(idx), 2)), ds.cmd_c[idx]]))
    gyro_world = np.einsum("nij,nj->ni", ds.gt_R[idx],
                           ds.gyro[idx] - ds.gt_bg[idx])
    k_i = int(np.argmin(np.abs(ds.gt_t - t_i)))
    return times, thrust, gyro_world, ds.gt_v[k_i], ds.gt_R[k_i]


def model_displacement(times, thrust_world, v_i, t_j, gyro_world=None,
                       substeps=4):
    """Displacement from integrating v_dot = T_world + g, starting from
    velocity v_i at times[0]. The commanded thrust is zero-order-held over
    each sample interval; when world-frame gyro samples are given, the
    attitude (and with it the held thrust vector) rotates within the
    interval, integrated by trapezoid sub-steps. No drag or other external
    force enters: this is the commanded-thrust prediction."""
    delta_p = np.zeros(3)
    v = np.asarray(v_i, dtype=float).copy()
    bounds = np.append(times, t_j)
    n = len(times)
    for k in range(n):
        h = bounds[k + 1] - bounds[k]
        if gyro_world is None:
            a = thrust_world[k] + GRAVITY
            delta_p = delta_p + v * h + 0.5 * a * h * h
            v = v + a * h
            continue
        w = gyro_world[k]
        hs = h / substeps
        T1 = thrust_world[k]
        for j in range(substeps):
            T0 = T1
            T1 = so3.exp(w * ((j + 1) * hs)) @ thrust_world[k]
            a = 0.5 * (T0 + T1) + GRAVITY
            delta_p = delta_p + v * hs + 0.5 * a * hs * hs
            v = v + a * hs
    return delta_p


def thrust_from_displacement(delta_p, v, R, delta_t):
    """Exact algebraic inverse of the single-interval displacement
    relation: body-frame thrust that produces delta_p from velocity v and
    attitude R over delta_t under constant thrust."""
    if delta_t <= 0:
        raise ValueError("delta_t must be > 0")
    delta_p = np.asarray(delta_p, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.asarray(R).T @ (2.0 * delta_p / delta_t ** 2
                              - 2.0 * v / delta_t - GRAVITY)


class OracleProvider:
    """Ground-truth displacements with configurable measurement noise."""

    def __init__(self, dataset, sigma_meas=0.01, seed=0):
        self.dataset = dataset
        self.sigma = sigma_meas
        self.rng = np.random.default_rng(
            np.random.SeedSequence(dataset.meta.get("seed", 0)).spawn(5)[4]
            if seed is None else seed)

    def __call__(self, window):
        return displacement_oracle(self.dataset, window.t_i, window.t_j,
                                   self.sigma, self.rng)


class ModelProvider:
    """Thrust-model displacements (the Model-EKF ablation). With
    source='gt', orientation and velocity come from ground truth, mirroring
    an external motion-capture reference; with source='filter' they come
    from the window the filter built."""

    def __init__(self, dataset=None, sigma_meas=0.01, source="gt"):
        if source not in ("gt", "filter"):
            raise ValueError(f"unknown source {source!r}")
        if source == "gt" and dataset is None:
            raise ValueError("source='gt' requires a dataset")
        self.dataset = dataset
        self.sigma = sigma_meas
        self.source = source

    def __call__(self, window):
        if self.source == "filter":
            if window.v_i is None:
                return None
            times, thrust, gyro_w, v_i = (window.times, window.thrust_world,
                                          window.gyro_world, window.v_i)
        else:
            times, thrust, gyro_w, v_i, _ = build_gt_window(
                self.dataset, window.t_i, window.t_j)
        delta_p = model_displacement(times, thrust, v_i, window.t_j,
                                     gyro_world=gyro_w)
        return DisplacementMeasurement(
            delta_p=delta_p, t_i=window.t_i, t_j=window.t_j,
            cov=self.sigma ** 2 * np.eye(3))


class TcnProvider:
    """Displacements predicted by the convolutional network from the
    window of world-frame thrust and bias-corrected gyro samples."""

    def __init__(self, model, sigma_meas=0.01):
        self.model = model
        self.sigma = sigma_meas

    def __call__(self, window):
        x = np.vstack([window.thrust_world.T, window.gyro_world.T])
        if x.shape != (self.model.input_channels, self.model.window):
            raise ValueError(f"window shape {x.shape} does not match model")
        delta_p = tcn.forward(self.model, x)
        return DisplacementMeasurement(
            delta_p=delta_p, t_i=window.t_i, t_j=window.t_j,
            cov=self.sigma ** 2 * np.eye(3))


def concatenate_displacements(t_start, p_start, measurements,
                              out_rate=20.0):
    """Chain displacement measurements over disjoint intervals into a
    3-DoF trajectory, then linearly interpolate to `out_rate`.

    `measurements` are (t_i, t_j, delta_p) with t_j of one interval equal
    to t_i of the next. Returns (times, positions)."""
    chain_t = [t_start]
    chain_p = [np.asarray(p_start, dtype=float)]
    for t_i, t_j, dp in measurements:
        chain_t.append(t_j)
        chain_p.append(chain_p[-1] + np.asarray(dp, dtype=float))
    chain_t = np.array(chain_t)
    chain_p = np.array(chain_p)
    t_out = np.arange(chain_t[0], chain_t[-1] + 1e-9, 1.0 / out_rate)
    p_out = np.stack([np.interp(t_out, chain_t, chain_p[:, k])
                      for k in range(3)], axis=1)
    return t_out, p_out


def concatenation_trajectory(dataset, provider_fn, window=0.5,
                             out_rate=20.0):
    """Open-loop ablation: query `provider_fn(t_i, t_j)` over disjoint
    windows and chain the results from the ground-truth start."""
    t0 = float(dataset.gt_t[0])
    t_end = float(dataset.gt_t[-1])
    meas = []
    t = t0
    while t + window <= t_end + 1e-9:
        meas.append((t, t + window, provider_fn(t, t + window)))
        t += window
    return concatenate_displacements(t0, dataset.gt_p[0], meas, out_rate)
