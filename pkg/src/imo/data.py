"""Dataset container and on-disk layout for simulated flights.

Layout of a dataset directory:
    imu.csv   t,gx,gy,gz,ax,ay,az
    cmd.csv   t,c
    gt.csv    t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bax,bay,baz,bgx,bgy,bgz
    meta.json config echo, seed, format_version

Quaternions are Hamilton convention, w-first, unit norm. IMU rows describe
the interval [t_k, t_k + dt]; gt has one extra trailing sample so every IMU
interval is bracketed.
"""

import dataclasses
import json
import os

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

FORMAT_VERSION = 1

_FLOAT_FMT = "%.17g"


class DatasetError(Exception):
    """Malformed or unreadable dataset directory."""


@dataclasses.dataclass
class Dataset:
    """Immutable bundle of one simulated flight."""

    imu_t: np.ndarray      # (N,)
    gyro: np.ndarray       # (N, 3) rad/s, body frame
    accel: np.ndarray      # (N, 3) m/s^2, specific force, body frame
    cmd_t: np.ndarray      # (N,)
    cmd_c: np.ndarray      # (N,) mass-normalized collective thrust
    gt_t: np.ndarray       # (N+1,)
    gt_p: np.ndarray       # (N+1, 3)
    gt_R: np.ndarray       # (N+1, 3, 3)
    gt_v: np.ndarray       # (N+1, 3)
    gt_ba: np.ndarray      # (N+1, 3)
    gt_bg: np.ndarray      # (N+1, 3)
    meta: dict = dataclasses.field(default_factory=dict)

    @property
    def dt(self):
        return float(self.imu_t[1] - self.imu_t[0])

    def gt_interp_p(self, t):
        """Linearly interpolated ground-truth position at time(s) t."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.gt_t[0], self.gt_t[-1]
        if np.any(t < lo - 1e-9) or np.any(t > hi + 1e-9):
            raise ValueError("time outside ground-truth range")
        return np.stack([np.interp(t, self.gt_t, self.gt_p[:, k])
                         for k in range(3)], axis=-1)


def rot_to_quat(R):
    """3x3 rotation matrix (or stack) to w-first Hamilton quaternion."""
    q = _ScipyRotation.from_matrix(R).as_quat()  # x, y, z, w
    q = np.atleast_2d(q)[:, [3, 0, 1, 2]]
    # fix the sign for reproducible files
    flip = q[:, 0] < 0
    q[flip] *= -1.0
    return q if np.asarray(R).ndim == 3 else q[0]


def quat_to_rot(q):
    """w-first Hamilton quaternion (or stack) to rotation matrix."""
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    q2 = np.atleast_2d(q)[:, [1, 2, 3, 0]]
    R = _ScipyRotation.from_quat(q2).as_matrix()
    return R[0] if single else R


def _write_csv(path, header, columns):
    table = np.column_stack(columns)
    np.savetxt(path, table, fmt=_FLOAT_FMT, delimiter=",",
               header=header, comments="")


def _read_csv(path, n_cols):
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except Exception as e:
        raise DatasetError(f"{path}: {e}") from e
    if table.shape[1] != n_cols:
        raise DatasetError(f"{path}: expected {n_cols} columns, "
                           f"got {table.shape[1]}")
    return table


def save_dataset(ds, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "imu.csv"),
               "t,gx,gy,gz,ax,ay,az",
               [ds.imu_t, ds.gyro, ds.accel])
    _write_csv(os.path.join(out_dir, "cmd.csv"), "t,c", [ds.cmd_t, ds.cmd_c])
    quat = rot_to_quat(ds.gt_R)
    _write_csv(os.path.join(out_dir, "gt.csv"),
               "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bax,bay,baz,bgx,bgy,bgz",
               [ds.gt_t, ds.gt_p, quat, ds.gt_v, ds.gt_ba, ds.gt_bg])
    meta = dict(ds.meta)
    meta["format_version"] = FORMAT_VERSION
    with open(os.path.join(out_dir, "meta.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)


def load_dataset(path):
    imu = _read_csv(os.path.join(path, "imu.csv"), 7)
    cmd = _read_csv(os.path.join(path, "cmd.csv"), 2)
    gt = _read_csv(os.path.join(path, "gt.csv"), 17)
    meta_path = os.path.join(path, "meta.json")
    meta = {}
    if os.path.exists(meta_path):
        with open(meta_path) as f:
            meta = json.load(f)
        if meta.get("format_version") != FORMAT_VERSION:
            raise DatasetError(
                f"{meta_path}: unsupported format_version "
                f"{meta.get('format_version')!r}")
    return Dataset(
        imu_t=imu[:, 0], gyro=imu[:, 1:4], accel=imu[:, 4:7],
        cmd_t=cmd[:, 0], cmd_c=cmd[:, 1],
        gt_t=gt[:, 0], gt_p=gt[:, 1:4],
        gt_R=quat_to_rot(gt[:, 4:8]),
        gt_v=gt[:, 8:11], gt_ba=gt[:, 11:14], gt_bg=gt[:, 14:17],
        meta=meta,
    )


def save_trajectory(path, t, p, R, v=None, ba=None, bg=None):
    """Estimated-trajectory CSV with the same conventions as gt.csv."""
    n = len(t)
    v = np.zeros((n, 3)) if v is None else v
    ba = np.zeros((n, 3)) if ba is None else ba
    bg = np.zeros((n, 3)) if bg is None else bg
    _write_csv(path,
               "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bax,bay,baz,bgx,bgy,bgz",
               [np.asarray(t), np.asarray(p), rot_to_quat(np.asarray(R)),
                v, ba, bg])


def load_trajectory(path):
    """Load a trajectory CSV; returns (t, p, R, v, ba, bg)."""
    table = _read_csv(path, 17)
    return (table[:, 0], table[:, 1:4], quat_to_rot(table[:, 4:8]),
            table[:, 8:11], table[:, 11:14], table[:, 14:17])
