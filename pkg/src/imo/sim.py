"""Deterministic quadrotor flight simulator.

Generates ground truth, commanded collective thrust, and noisy IMU streams.
Translational dynamics: p_dot = v, v_dot = R (T_b + F_drag) + g with
T_b = [0, 0, c] and body-frame linear drag F_drag = -diag(d) (R^T v).
A geometric tracking controller with flatness feedforward follows the
reference; the true state is integrated with RK4 at an internal substep
rate while commands are held at the IMU rate.

IMU samples are interval measurements: the emitted gyro/accel for row k is
the mean angular rate / specific force over [t_k, t_{k+1}], so discrete
dead reckoning of the noise-free stream reproduces the ground truth up to
trapezoid-level integration error.
"""

import dataclasses

import numpy as np
from scipy.interpolate import CubicSpline

from . import so3
from .data import Dataset

GRAVITY = np.array([0.0, 0.0, -9.81])

# Geometric controller gains; test infrastructure, not tuned finely.
KP_POS = 10.0
KV_VEL = 6.0
KR_ATT = 20.0

# Internal RK4 substeps per IMU/command interval (100 Hz * 4 = 400 Hz).
RK4_SUBSTEPS = 4

# A plausible closed circuit through 7 gates; not any published track.
RACETRACK_WAYPOINTS = np.array([
    [0.0, 0.0, 1.5],
    [9.0, 3.0, 2.5],
    [14.0, 9.0, 1.5],
    [8.0, 14.0, 3.0],
    [-1.0, 12.0, 2.0],
    [-7.0, 7.0, 3.5],
    [-5.0, 1.0, 1.5],
])


class SimulationError(Exception):
    """Controller divergence or invalid simulation setup."""


@dataclasses.dataclass
class NoiseParams:
    sigma_accel: float = 0.01        # m/s^2, white, per sample
    sigma_gyro: float = 0.001        # rad/s, white, per sample
    sigma_accel_bias: float = 0.001  # m/s^2 / sqrt(s), random walk
    sigma_gyro_bias: float = 0.0001  # rad/s / sqrt(s), random walk
    sigma_meas: float = 0.01         # m, displacement measurement

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")


@dataclasses.dataclass
class SimConfig:
    track: str = "lemniscate"
    duration: float = 60.0
    imu_rate: float = 100.0
    seed: int = 0
    drag: tuple = (0.3, 0.3, 0.05)        # 1/s, body-frame linear drag
    thrust_limit: float = 50.0            # m/s^2, mass-normalized
    noise: NoiseParams = dataclasses.field(default_factory=NoiseParams)
    track_params: dict = dataclasses.field(default_factory=dict)
    # Initial-bias draw stds; biases are drawn once per seed.
    init_accel_bias_std: float = 0.02     # m/s^2
    init_gyro_bias_std: float = 0.002     # rad/s

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if self.imu_rate <= 0:
            raise ValueError("imu_rate must be > 0")
        if any(d < 0 for d in self.drag):
            raise ValueError("drag coefficients must be >= 0")


class ReferenceTrajectory:
    """Smooth position/yaw reference with analytic or spline derivatives."""

    def position(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def acceleration(self, t):
        raise NotImplementedError

    def yaw(self, t):
        return 0.0


class HoverReference(ReferenceTrajectory):
    def __init__(self, point=(0.0, 0.0, 1.0)):
        self.point = np.asarray(point, dtype=float)

    def position(self, t):
        return self.point.copy()

    def velocity(self, t):
        return np.zeros(3)

    def acceleration(self, t):
        return np.zeros(3)


class LemniscateReference(ReferenceTrajectory):
    """Gerono lemniscate: x = A sin(w t), y = B sin(w t) cos(w t)."""

    def __init__(self, amp_x=5.0, amp_y=5.0, omega=1.6, z0=1.0):
        self.A = amp_x
        self.B = amp_y
        self.w = omega
        self.z0 = z0

    @property
    def period(self):
        return 2.0 * np.pi / self.w

    def position(self, t):
        s = self.w * t
        return np.array([self.A * np.sin(s),
                         0.5 * self.B * np.sin(2.0 * s),
                         self.z0])

    def velocity(self, t):
        s = self.w * t
        return np.array([self.A * self.w * np.cos(s),
                         self.B * self.w * np.cos(2.0 * s),
                         0.0])

    def acceleration(self, t):
        s = self.w * t
        return np.array([-self.A * self.w ** 2 * np.sin(s),
                         -2.0 * self.B * self.w ** 2 * np.sin(2.0 * s),
                         0.0])


class WaypointReference(ReferenceTrajectory):
    """Periodic cubic spline through a closed list of waypoints."""

    def __init__(self, waypoints, lap_time=12.0):
        wp = np.asarray(waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 3 or len(wp) < 3:
            raise ValueError("waypoints must be an (n>=3, 3) array")
        self.lap_time = float(lap_time)
        knots = np.linspace(0.0, self.lap_time, len(wp) + 1)
        closed = np.vstack([wp, wp[:1]])
        self._spline = CubicSpline(knots, closed, bc_type="periodic", axis=0)
        self._waypoints = wp

    def position(self, t):
        return self._spline(np.mod(t, self.lap_time))

    def velocity(self, t):
        return self._spline(np.mod(t, self.lap_time), 1)

    def acceleration(self, t):
        return self._spline(np.mod(t, self.lap_time), 2)


def generate_track(kind, params=None):
    """Build a reference trajectory. Known kinds: lemniscate, racetrack,
    hover, custom (requires 'waypoints' in params)."""
    params = dict(params or {})
    if kind == "lemniscate":
        return LemniscateReference(**params)
    if kind == "racetrack":
        params.setdefault("waypoints", RACETRACK_WAYPOINTS)
        return WaypointReference(**params)
    if kind == "hover":
        return HoverReference(**params)
    if kind == "custom":
        if "waypoints" not in params:
            raise ValueError("custom track requires 'waypoints'")
        return WaypointReference(**params)
    raise ValueError(f"unknown track kind: {kind!r}")


def _attitude_from_thrust(thrust_vec, yaw):
    """World-from-body attitude whose z axis points along the thrust."""
    zb = thrust_vec / np.linalg.norm(thrust_vec)
    xc = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    yb = np.cross(zb, xc)
    n = np.linalg.norm(yb)
    if n < 1e-6:
        # thrust nearly parallel to the yaw heading; fall back to world y
        yb = np.cross(zb, np.array([0.0, 1.0, 0.0]))
        n = np.linalg.norm(yb)
    yb = yb / n
    xb = np.cross(yb, zb)
    return np.column_stack([xb, yb, zb])


def _controller(p, v, R, ref, t, thrust_limit):
    """Collective thrust and body-rate command tracking the reference."""
    a_des = (ref.acceleration(t)
             + KP_POS * (ref.position(t) - p)
             + KV_VEL * (ref.velocity(t) - v))
    t_vec = a_des - GRAVITY
    c = float(np.clip(np.linalg.norm(t_vec), 1e-3, thrust_limit))
    R_des = _attitude_from_thrust(t_vec, ref.yaw(t))
    omega = KR_ATT * so3.log(R.T @ R_des)
    return c, omega


def _accel_world(v, R, c, drag):
    """True v_dot: thrust plus body-frame linear drag plus gravity."""
    f_body = np.array([0.0, 0.0, c]) - drag * (R.T @ v)
    return R @ f_body + GRAVITY


def _rk4_step(p, v, R, c, omega, drag, h):
    """One RK4 step of (p, v) with the exact attitude flow R Exp(omega s)."""
    R_half = R @ so3.exp(omega * (0.5 * h))
    R_full = R @ so3.exp(omega * h)

    k1v = _accel_world(v, R, c, drag)
    k1p = v
    k2v = _accel_world(v + 0.5 * h * k1v, R_half, c, drag)
    k2p = v + 0.5 * h * k1v
    k3v = _accel_world(v + 0.5 * h * k2v, R_half, c, drag)
    k3p = v + 0.5 * h * k2v
    k4v = _accel_world(v + h * k3v, R_full, c, drag)
    k4p = v + h * k3v

    p_new = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
    v_new = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return p_new, v_new, R_full


def simulate(config):
    """Run one flight; deterministic function of the config."""
    ref = generate_track(config.track, config.track_params)
    dt = 1.0 / config.imu_rate
    n = int(round(config.duration * config.imu_rate))
    drag = np.asarray(config.drag, dtype=float)
    noise = config.noise

    streams = np.random.SeedSequence(config.seed).spawn(5)
    rng_accel = np.random.default_rng(streams[0])
    rng_gyro = np.random.default_rng(streams[1])
    rng_walk = np.random.default_rng(streams[2])
    rng_init = np.random.default_rng(streams[3])
    # streams[4] reserved for measurement-noise consumers

    ba0 = rng_init.normal(0.0, config.init_accel_bias_std, 3)
    bg0 = rng_init.normal(0.0, config.init_gyro_bias_std, 3)

    # start exactly on the reference with the flatness-consistent attitude
    p = ref.position(0.0)
    v = ref.velocity(0.0)
    t_vec0 = ref.acceleration(0.0) - GRAVITY
    R = _attitude_from_thrust(t_vec0, ref.yaw(0.0))

    gt_t = np.zeros(n + 1)
    gt_p = np.zeros((n + 1, 3))
    gt_v = np.zeros((n + 1, 3))
    gt_R = np.zeros((n + 1, 3, 3))
    gt_ba = np.zeros((n + 1, 3))
    gt_bg = np.zeros((n + 1, 3))
    cmd_c = np.zeros(n)
    gyro = np.zeros((n, 3))
    accel = np.zeros((n, 3))

    ba, bg = ba0.copy(), bg0.copy()
    gt_p[0], gt_v[0], gt_R[0] = p, v, R
    gt_ba[0], gt_bg[0] = ba, bg

    h = dt / RK4_SUBSTEPS
    for k in range(n):
        t = k * dt
        if np.linalg.norm(p - ref.position(t)) > 10.0:
            raise SimulationError(f"controller diverged at t={t:.2f} s")
        c, omega = _controller(p, v, R, ref, t, config.thrust_limit)
        cmd_c[k] = c

        p_next, v_next, R_next = p, v, R
        for _ in range(RK4_SUBSTEPS):
            p_next, v_next, R_next = _rk4_step(
                p_next, v_next, R_next, c, omega, drag, h)
        if so3.ortho_error(R_next) > so3.ORTHO_TOL:
            R_next = so3.renormalize(R_next)

        # interval-mean IMU over [t_k, t_{k+1}]
        gyro[k] = so3.log(R.T @ R_next) / dt + bg \
            + noise.sigma_gyro * rng_gyro.standard_normal(3)
        accel[k] = R.T @ ((v_next - v) / dt - GRAVITY) + ba \
            + noise.sigma_accel * rng_accel.standard_normal(3)

        ba = ba + noise.sigma_accel_bias * np.sqrt(dt) \
            * rng_walk.standard_normal(3)
        bg = bg + noise.sigma_gyro_bias * np.sqrt(dt) \
            * rng_walk.standard_normal(3)

        p, v, R = p_next, v_next, R_next
        gt_t[k + 1] = (k + 1) * dt
        gt_p[k + 1], gt_v[k + 1], gt_R[k + 1] = p, v, R
        gt_ba[k + 1], gt_bg[k + 1] = ba, bg

    speeds = np.linalg.norm(gt_v, axis=1)
    seg = np.diff(gt_p, axis=0)
    meta = {
        "config": {
            "track": config.track,
            "duration": config.duration,
            "imu_rate": config.imu_rate,
            "seed": config.seed,
            "drag": list(config.drag),
            "thrust_limit": config.thrust_limit,
            "noise": dataclasses.asdict(noise),
            "track_params": {k: (v.tolist() if isinstance(v, np.ndarray)
                                 else v)
                             for k, v in config.track_params.items()},
            "init_accel_bias_std": config.init_accel_bias_std,
            "init_gyro_bias_std": config.init_gyro_bias_std,
        },
        "seed": config.seed,
        "top_speed": float(speeds.max()),
        "path_length": float(np.linalg.norm(seg, axis=1).sum()),
    }
    return Dataset(imu_t=gt_t[:n].copy(), gyro=gyro, accel=accel,
                   cmd_t=gt_t[:n].copy(), cmd_c=cmd_c,
                   gt_t=gt_t, gt_p=gt_p, gt_R=gt_R, gt_v=gt_v,
                   gt_ba=gt_ba, gt_bg=gt_bg, meta=meta)


def displacement_oracle(dataset, t_i, t_j, sigma_meas, rng=None):
    """Ground-truth position delta over [t_i, t_j] with optional iid
    Gaussian corruption; covariance sigma_meas^2 I."""
    from .ekf import DisplacementMeasurement  # local import avoids a cycle

    if t_i >= t_j:
        raise ValueError("need t_i < t_j")
    p_i = dataset.gt_interp_p(t_i)
    p_j = dataset.gt_interp_p(t_j)
    delta = p_j - p_i
    if sigma_meas > 0:
        if rng is None:
            rng = np.random.default_rng()
        delta = delta + rng.normal(0.0, sigma_meas, 3)
    return DisplacementMeasurement(
        delta_p=delta, t_i=float(t_i), t_j=float(t_j),
        cov=sigma_meas ** 2 * np.eye(3))
