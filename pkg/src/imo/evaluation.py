"""Trajectory evaluation: absolute and relative translation/rotation
errors over matched timestamps.

No alignment transform is applied before the absolute metrics: runs are
initialized at the ground-truth start, and aligning would mask drift.
"""

import json
import logging

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation
from scipy.spatial.transform import Slerp

from . import so3

logger = logging.getLogger("imo.evaluation")

DEFAULT_REL_DISTANCES = (10.0, 20.0, 40.0, 60.0)

MAX_INTERP_GAP = 0.1  # s


class EvalError(Exception):
    pass


class AlignedPair:
    """Estimated and ground-truth trajectories resampled onto common
    timestamps (linear interpolation for position, spherical for
    rotation)."""

    def __init__(self, t, p_est, R_est, p_gt, R_gt):
        self.t = t
        self.p_est = p_est
        self.R_est = R_est
        self.p_gt = p_gt
        self.R_gt = R_gt

    def __len__(self):
        return len(self.t)


def _resample(t_src, p_src, R_src, t_out):
    if np.max(np.diff(t_src)) > MAX_INTERP_GAP:
        raise EvalError("source timestamps have gaps larger than "
                        f"{MAX_INTERP_GAP} s")
    p = np.stack([np.interp(t_out, t_src, p_src[:, k]) for k in range(3)],
                 axis=1)
    slerp = Slerp(t_src, _ScipyRotation.from_matrix(R_src))
    R = slerp(t_out).as_matrix()
    return p, R


def align_pair(t_est, p_est, R_est, t_gt, p_gt, R_gt):
    """Resample both trajectories onto their overlapping gt timestamps."""
    lo = max(t_est[0], t_gt[0])
    hi = min(t_est[-1], t_gt[-1])
    mask = (t_gt >= lo - 1e-9) & (t_gt <= hi + 1e-9)
    if mask.sum() < 2:
        raise EvalError("fewer than 2 overlapping timestamps")
    t = t_gt[mask]
    pe, Re = _resample(t_est, p_est, R_est, t)
    pg, Rg = _resample(t_gt, p_gt, R_gt, t)
    return AlignedPair(t, pe, Re, pg, Rg)


def ate_translation(pair):
    """RMSE of position error over matched timestamps, meters."""
    if len(pair) == 0:
        raise EvalError("empty pair")
    err = pair.p_gt - pair.p_est
    return float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))


def ate_rotation(pair):
    """RMSE of the geodesic rotation angle over matched timestamps,
    degrees."""
    if len(pair) == 0:
        raise EvalError("empty pair")
    angles = np.array([np.linalg.norm(so3.log(Rg.T @ Re))
                       for Rg, Re in zip(pair.R_gt, pair.R_est)])
    return float(np.degrees(np.sqrt(np.mean(angles ** 2))))


def relative_errors(pair, distances=DEFAULT_REL_DISTANCES, stride=10):
    """Sub-trajectory errors per travelled distance. For each start index
    (every `stride` samples) and each distance d, the start pose is aligned
    to ground truth and the end-point error is recorded as a translation
    percentage of d and a rotation angle in degrees.

    Returns {distance: {"trans_pct": array, "rot_deg": array}}."""
    seg = np.linalg.norm(np.diff(pair.p_gt, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    out = {}
    for d in distances:
        if d <= 0:
            raise EvalError("distances must be positive")
        trans, rot = [], []
        for i0 in range(0, len(pair), stride):
            target = arc[i0] + d
            i1 = int(np.searchsorted(arc, target))
            if i1 >= len(pair):
                break
            # relative motion expressed in the respective start frames
            dp_gt = pair.R_gt[i0].T @ (pair.p_gt[i1] - pair.p_gt[i0])
            dp_est = pair.R_est[i0].T @ (pair.p_est[i1] - pair.p_est[i0])
            dR_gt = pair.R_gt[i0].T @ pair.R_gt[i1]
            dR_est = pair.R_est[i0].T @ pair.R_est[i1]
            trans.append(np.linalg.norm(dp_est - dp_gt) / d * 100.0)
            rot.append(np.degrees(np.linalg.norm(so3.log(dR_gt.T @ dR_est))))
        if not trans:
            logger.warning("distance %.1f m longer than the trajectory; "
                           "skipped", d)
        out[float(d)] = {"trans_pct": np.array(trans),
                         "rot_deg": np.array(rot)}
    return out


def metrics_report(pair, distances=DEFAULT_REL_DISTANCES):
    """Full metrics dict matching the metrics.json schema."""
    rel = relative_errors(pair, distances)
    return {
        "ate_t_m": ate_translation(pair),
        "ate_r_deg": ate_rotation(pair),
        "rel": {str(d): {"trans_pct": v["trans_pct"].tolist(),
                         "rot_deg": v["rot_deg"].tolist()}
                for d, v in rel.items()},
    }


def save_metrics(report, json_path, rel_csv_path=None):
    with open(json_path, "w") as f:
        json.dump(report, f, indent=2)
    if rel_csv_path is not None:
        with open(rel_csv_path, "w") as f:
            f.write("distance,kind,value\n")
            for d, v in report["rel"].items():
                for kind in ("trans_pct", "rot_deg"):
                    for value in v[kind]:
                        f.write(f"{d},{kind},{value:.17g}\n")
