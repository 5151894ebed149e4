"""Sliding-window training examples built from the simulator dataset
layout (imu.csv, cmd.csv, gt.csv, meta.json).

Inputs per example: 6 x 50 matrix of world-frame commanded thrust and
bias-free world-frame gyro at 100 Hz; target: the ground-truth position
delta over the same 0.5 s. Ground-truth orientations are used to rotate
the inputs; robustness to orientation error is injected later as a
training-time augmentation.
"""

import dataclasses
import json
import os

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation


class IngestError(Exception):
    """Malformed dataset CSV."""


@dataclasses.dataclass
class WindowSet:
    """Stacked examples from one or more flights."""

    inputs: np.ndarray      # (N, 6, window)
    targets: np.ndarray     # (N, 3)
    flight: np.ndarray      # (N,) index of the source flight
    norm_mean: np.ndarray   # (6,)
    norm_std: np.ndarray    # (6,)

    def __len__(self):
        return len(self.inputs)


def _read_csv(path, n_cols):
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except Exception as e:
        raise IngestError(f"{path}: {e}") from e
    if table.shape[1] != n_cols:
        raise IngestError(f"{path}: expected {n_cols} columns, "
                          f"got {table.shape[1]}")
    return table


def load_flight(path):
    """Read one dataset directory into the arrays windowing needs."""
    imu = _read_csv(os.path.join(path, "imu.csv"), 7)
    cmd = _read_csv(os.path.join(path, "cmd.csv"), 2)
    gt = _read_csv(os.path.join(path, "gt.csv"), 17)
    with open(os.path.join(path, "meta.json")) as f:
        meta = json.load(f)
    quat = gt[:, 4:8]  # w-first Hamilton
    R = _ScipyRotation.from_quat(quat[:, [1, 2, 3, 0]]).as_matrix()
    return {
        "t": imu[:, 0], "gyro": imu[:, 1:4],
        "cmd_c": cmd[:, 1],
        "gt_t": gt[:, 0], "gt_p": gt[:, 1:4], "gt_R": R,
        "gt_bg": gt[:, 14:17], "meta": meta,
    }


def flight_windows(flight, window=0.5, stride=0.05):
    """All (input, target) windows of one flight at the given stride."""
    t = flight["t"]
    dt = float(t[1] - t[0])
    w = int(round(window / dt))
    step = int(round(stride / dt))
    # world-frame inputs from ground-truth orientation at the sample time
    R = flight["gt_R"][:len(t)]
    thrust = np.einsum("nij,nj->ni", R, np.column_stack(
        [np.zeros((len(t), 2)), flight["cmd_c"]]))
    gyro_w = np.einsum("nij,nj->ni", R,
                       flight["gyro"] - flight["gt_bg"][:len(t)])
    xs, ys = [], []
    for k0 in range(0, len(t) - w + 1, step):
        x = np.vstack([thrust[k0:k0 + w].T, gyro_w[k0:k0 + w].T])
        y = flight["gt_p"][k0 + w] - flight["gt_p"][k0]
        xs.append(x)
        ys.append(y)
    return np.array(xs), np.array(ys)


def build_dataset(dataset_dirs, window=0.5, stride=0.05):
    """Sliding windows over whole flights plus per-channel normalization
    statistics computed from all examples."""
    xs, ys, idx = [], [], []
    for i, d in enumerate(dataset_dirs):
        x, y = flight_windows(load_flight(d), window, stride)
        xs.append(x)
        ys.append(y)
        idx.append(np.full(len(x), i))
    inputs = np.concatenate(xs)
    targets = np.concatenate(ys)
    mean = inputs.mean(axis=(0, 2))
    std = inputs.std(axis=(0, 2))
    std[std < 1e-8] = 1.0
    return WindowSet(inputs=inputs, targets=targets,
                     flight=np.concatenate(idx),
                     norm_mean=mean, norm_std=std)


def split_by_flight(ws, val_flights):
    """Train/validation split on whole flights; overlapping windows from
    one flight never cross the split."""
    val_mask = np.isin(ws.flight, list(val_flights))
    train = WindowSet(ws.inputs[~val_mask], ws.targets[~val_mask],
                      ws.flight[~val_mask], ws.norm_mean, ws.norm_std)
    val = WindowSet(ws.inputs[val_mask], ws.targets[val_mask],
                    ws.flight[val_mask], ws.norm_mean, ws.norm_std)
    return train, val
