"""Error-state EKF with stochastic cloning of past poses.

State: current navigation state {R, v, p, b_a, b_g} plus up to `max_clones`
cloned past poses {R_j, p_j}. The error state is ordered
[clone_1 (dtheta, dp), ..., clone_m, current (dtheta, dv, dp, db_a, db_g)],
with rotation errors applied on the left: R = Exp(dtheta) R_hat.

Propagation follows the discrete IMU kinematics; the displacement update is
position-only between a cloned pose and the current pose, with Joseph-form
covariance and an optional chi-square innovation gate.
"""

import dataclasses
import logging

import numpy as np
from scipy.stats import chi2

from . import so3
from .sim import GRAVITY, NoiseParams

logger = logging.getLogger("imo.ekf")

NAV_DIM = 15      # current-state error dimension
CLONE_DIM = 6     # per-clone error dimension (dtheta, dp)
NOISE_DIM = 12    # [n_a, n_g, n_ba, n_bg]

# chi-square gate on the 3-DoF innovation, 0.999 quantile
GATE_THRESHOLD = float(chi2.ppf(0.999, 3))

CLONE_MATCH_TOL = 1e-6  # s; discrete clocks make exact equality brittle
MAX_IMU_DT = 0.05       # s; reject pathological gaps


class PropagationError(Exception):
    pass


@dataclasses.dataclass
class ImuSample:
    t: float
    gyro: np.ndarray
    accel: np.ndarray


@dataclasses.dataclass
class DisplacementMeasurement:
    """World-frame 3-DoF position delta over [t_i, t_j] with covariance."""
    delta_p: np.ndarray
    t_i: float
    t_j: float
    cov: np.ndarray


@dataclasses.dataclass
class NavState:
    R: np.ndarray
    v: np.ndarray
    p: np.ndarray
    ba: np.ndarray
    bg: np.ndarray

    def copy(self):
        return NavState(self.R.copy(), self.v.copy(), self.p.copy(),
                        self.ba.copy(), self.bg.copy())


@dataclasses.dataclass
class CloneState:
    R: np.ndarray
    p: np.ndarray
    t: float

    def copy(self):
        return CloneState(self.R.copy(), self.p.copy(), self.t)


@dataclasses.dataclass
class FilterState:
    nav: NavState
    clones: list
    P: np.ndarray
    t: float
    max_clones: int = 10

    @property
    def dim(self):
        return CLONE_DIM * len(self.clones) + NAV_DIM

    def copy(self):
        return FilterState(self.nav.copy(),
                           [c.copy() for c in self.clones],
                           self.P.copy(), self.t, self.max_clones)


@dataclasses.dataclass
class UpdateDiagnostics:
    accepted: bool
    reason: str = ""
    innovation: np.ndarray = None
    mahalanobis: float = np.nan


def initial_covariance(sigma_theta=1e-4, sigma_v=1e-2, sigma_p=1e-4,
                       sigma_ba=2e-2, sigma_bg=2e-3):
    """Diagonal 15x15 initial covariance; per-axis standard deviations."""
    d = np.concatenate([np.full(3, sigma_theta ** 2),
                        np.full(3, sigma_v ** 2),
                        np.full(3, sigma_p ** 2),
                        np.full(3, sigma_ba ** 2),
                        np.full(3, sigma_bg ** 2)])
    return np.diag(d)


def make_initial_state(R, v, p, ba, bg, t=0.0, P0=None, max_clones=10):
    P0 = initial_covariance() if P0 is None else P0
    nav = NavState(np.array(R, dtype=float), np.array(v, dtype=float),
                   np.array(p, dtype=float), np.array(ba, dtype=float),
                   np.array(bg, dtype=float))
    return FilterState(nav, [], P0.copy(), t, max_clones)


def propagate_mean(nav, gyro, accel, dt):
    """Discrete IMU kinematics for the navigation state (biases held)."""
    w = gyro - nav.bg
    a = accel - nav.ba
    Ra = nav.R @ a
    R_new = nav.R @ so3.exp(w * dt)
    if so3.ortho_error(R_new) > so3.ORTHO_TOL:
        R_new = so3.renormalize(R_new)
    v_new = nav.v + GRAVITY * dt + Ra * dt
    p_new = nav.p + nav.v * dt + 0.5 * dt * dt * (GRAVITY + Ra)
    return NavState(R_new, v_new, p_new, nav.ba.copy(), nav.bg.copy())


def propagation_jacobians(nav, gyro, accel, dt):
    """First-order Jacobians (A wrt the 15-dim error, B wrt the 12-dim
    noise vector) of the discrete propagation map."""
    w = gyro - nav.bg
    a = accel - nav.ba
    Ra_hat = so3.hat(nav.R @ a)
    RJl = nav.R @ so3.left_jacobian(w * dt)

    A = np.eye(NAV_DIM)
    A[0:3, 12:15] = -RJl * dt
    A[3:6, 0:3] = -Ra_hat * dt
    A[3:6, 9:12] = -nav.R * dt
    A[6:9, 0:3] = -0.5 * dt * dt * Ra_hat
    A[6:9, 3:6] = np.eye(3) * dt
    A[6:9, 9:12] = -0.5 * dt * dt * nav.R

    B = np.zeros((NAV_DIM, NOISE_DIM))
    B[0:3, 3:6] = -RJl * dt
    B[3:6, 0:3] = -nav.R * dt
    B[6:9, 0:3] = -0.5 * dt * dt * nav.R
    B[9:12, 6:9] = np.eye(3)
    B[12:15, 9:12] = np.eye(3)
    return A, B


def process_noise(noise: NoiseParams, dt):
    """Discrete covariance of [n_a, n_g, n_ba, n_bg]. White IMU noises are
    per-sample; bias random walks scale with dt."""
    return np.diag(np.concatenate([
        np.full(3, noise.sigma_accel ** 2),
        np.full(3, noise.sigma_gyro ** 2),
        np.full(3, noise.sigma_accel_bias ** 2 * dt),
        np.full(3, noise.sigma_gyro_bias ** 2 * dt),
    ]))


def propagate(state, imu, dt, noise):
    """Propagate mean and covariance through one IMU interval."""
    if not (np.all(np.isfinite(imu.gyro)) and np.all(np.isfinite(imu.accel))):
        raise PropagationError("non-finite IMU sample")
    if not 0.0 < dt <= MAX_IMU_DT:
        raise ValueError(f"dt out of range: {dt}")

    A, B = propagation_jacobians(state.nav, imu.gyro, imu.accel, dt)
    W = process_noise(noise, dt)
    nav = propagate_mean(state.nav, imu.gyro, imu.accel, dt)

    nc = CLONE_DIM * len(state.clones)
    P = state.P.copy()
    # clone blocks see the identity; only rows/cols of the current state move
    P[nc:, nc:] = A @ P[nc:, nc:] @ A.T + B @ W @ B.T
    P[:nc, nc:] = P[:nc, nc:] @ A.T
    P[nc:, :nc] = P[:nc, nc:].T
    P = 0.5 * (P + P.T)

    return FilterState(nav, [c.copy() for c in state.clones], P,
                       state.t + dt, state.max_clones)


def augment(state):
    """Clone the current pose; marginalize the oldest clone past capacity."""
    m = len(state.clones)
    nc = CLONE_DIM * m
    dim = state.dim
    J = np.zeros((dim + CLONE_DIM, dim))
    J[:nc, :nc] = np.eye(nc)
    J[nc:nc + 3, nc:nc + 3] = np.eye(3)          # new clone dtheta <- dtheta
    J[nc + 3:nc + 6, nc + 6:nc + 9] = np.eye(3)  # new clone dp     <- dp
    J[nc + CLONE_DIM:, nc:] = np.eye(NAV_DIM)
    P = J @ state.P @ J.T

    clones = [c.copy() for c in state.clones]
    clones.append(CloneState(state.nav.R.copy(), state.nav.p.copy(), state.t))
    if len(clones) > state.max_clones:
        clones.pop(0)
        P = P[CLONE_DIM:, CLONE_DIM:]
    return FilterState(state.nav.copy(), clones, P, state.t,
                       state.max_clones)


def _apply_correction(state, delta):
    """Box-plus the full error correction onto clones and current state."""
    clones = []
    for j, c in enumerate(state.clones):
        d = delta[CLONE_DIM * j:CLONE_DIM * (j + 1)]
        clones.append(CloneState(so3.exp(d[0:3]) @ c.R, c.p + d[3:6], c.t))
    nc = CLONE_DIM * len(state.clones)
    d = delta[nc:]
    nav = NavState(so3.exp(d[0:3]) @ state.nav.R,
                   state.nav.v + d[3:6],
                   state.nav.p + d[6:9],
                   state.nav.ba + d[9:12],
                   state.nav.bg + d[12:15])
    if so3.ortho_error(nav.R) > so3.ORTHO_TOL:
        nav.R = so3.renormalize(nav.R)
    return FilterState(nav, clones, state.P.copy(), state.t,
                       state.max_clones)


def update(state, meas, gate=True):
    """Relative-displacement update between clone at t_i and the current
    pose. Returns (new_state, diagnostics)."""
    idx = None
    for j, c in enumerate(state.clones):
        if abs(c.t - meas.t_i) < CLONE_MATCH_TOL:
            idx = j
            break
    if idx is None:
        return state, UpdateDiagnostics(False, "no-clone")

    dim = state.dim
    nc = CLONE_DIM * len(state.clones)
    H = np.zeros((3, dim))
    H[:, CLONE_DIM * idx + 3:CLONE_DIM * idx + 6] = -np.eye(3)
    H[:, nc + 6:nc + 9] = np.eye(3)

    predicted = state.nav.p - state.clones[idx].p
    innovation = meas.delta_p - predicted
    S = H @ state.P @ H.T + meas.cov
    S_inv = np.linalg.inv(S)
    maha = float(innovation @ S_inv @ innovation)
    if gate and maha > GATE_THRESHOLD:
        return state, UpdateDiagnostics(False, "outlier", innovation, maha)

    K = state.P @ H.T @ S_inv
    new_state = _apply_correction(state, K @ innovation)
    IKH = np.eye(dim) - K @ H
    P = IKH @ state.P @ IKH.T + K @ meas.cov @ K.T
    new_state.P = 0.5 * (P + P.T)
    return new_state, UpdateDiagnostics(True, "", innovation, maha)


@dataclasses.dataclass
class MeasurementWindow:
    """Inputs handed to a displacement provider at an update tick."""
    t_i: float
    t_j: float
    times: np.ndarray        # sample times, 100 Hz over the window
    thrust_world: np.ndarray  # (n, 3) estimated world-frame thrust vectors
    gyro_world: np.ndarray    # (n, 3) bias-corrected world-frame rates
    v_i: np.ndarray           # filter velocity at t_i
    R_i: np.ndarray           # filter orientation at t_i


@dataclasses.dataclass
class FilterConfig:
    noise: NoiseParams = dataclasses.field(default_factory=NoiseParams)
    update_rate: float = 20.0
    window: float = 0.5
    max_clones: int = 10
    gating: bool = True
    P0: np.ndarray = None
    init_bias_mode: str = "truth"   # "truth" | "zero"
    init_bias_offset: tuple = (0.0, 0.0)  # added to (b_a, b_g) on all axes
    health_check: bool = False


@dataclasses.dataclass
class FilterRun:
    t: np.ndarray
    p: np.ndarray
    R: np.ndarray
    v: np.ndarray
    ba: np.ndarray
    bg: np.ndarray
    updates_accepted: int = 0
    updates_rejected: int = 0
    max_asymmetry: float = 0.0
    min_eigenvalue: float = np.inf
    # smallest eigenvalue normalized by max(1, ||P||_inf): the eigensolver's
    # own float64 error grows with the covariance scale, so an absolute
    # PSD bound is unmeasurable once P grows large (pure dead reckoning)
    min_eigenvalue_rel: float = np.inf
    nees_position: np.ndarray = None

    def health(self, state):
        self.max_asymmetry = max(self.max_asymmetry,
                                 float(np.max(np.abs(state.P - state.P.T))))
        lam = float(np.linalg.eigvalsh(state.P)[0])
        self.min_eigenvalue = min(self.min_eigenvalue, lam)
        scale = max(1.0, float(np.max(np.abs(state.P))))
        self.min_eigenvalue_rel = min(self.min_eigenvalue_rel, lam / scale)


def run_filter(dataset, provider, config=None):
    """Propagate the whole dataset, querying `provider` for displacement
    measurements at the update rate. Initializes at the ground-truth start.

    `provider` is a callable window -> DisplacementMeasurement or None; a
    None return (or a gated outlier) skips the update and the filter
    continues as dead reckoning."""
    config = config or FilterConfig()
    if config.init_bias_mode == "truth":
        ba0 = dataset.gt_ba[0] + config.init_bias_offset[0]
        bg0 = dataset.gt_bg[0] + config.init_bias_offset[1]
    else:
        ba0 = np.zeros(3)
        bg0 = np.zeros(3)
    state = make_initial_state(dataset.gt_R[0], dataset.gt_v[0],
                               dataset.gt_p[0], ba0, bg0,
                               t=float(dataset.gt_t[0]), P0=config.P0,
                               max_clones=config.max_clones)

    n = len(dataset.imu_t)
    out = FilterRun(t=np.zeros(n + 1), p=np.zeros((n + 1, 3)),
                    R=np.zeros((n + 1, 3, 3)), v=np.zeros((n + 1, 3)),
                    ba=np.zeros((n + 1, 3)), bg=np.zeros((n + 1, 3)))
    nees = []

    def record(k, s):
        out.t[k] = s.t
        out.p[k], out.R[k], out.v[k] = s.nav.p, s.nav.R, s.nav.v
        out.ba[k], out.bg[k] = s.nav.ba, s.nav.bg

    record(0, state)

    tick_dt = 1.0 / config.update_rate
    next_tick = float(dataset.gt_t[0]) + tick_dt
    # rolling buffer of per-sample window inputs built from the estimate
    buf_t, buf_thrust, buf_gyro = [], [], []
    win_n = int(round(config.window * 100.0))
    # velocity snapshots at clone instants; not part of the error state
    clone_vel = {}

    for k in range(n):
        dt = float((dataset.gt_t[k + 1] - dataset.gt_t[k]))
        imu = ImuSample(float(dataset.imu_t[k]), dataset.gyro[k],
                        dataset.accel[k])
        buf_t.append(imu.t)
        buf_thrust.append(state.nav.R @ np.array([0.0, 0.0,
                                                  dataset.cmd_c[k]]))
        buf_gyro.append(state.nav.R @ (imu.gyro - state.nav.bg))
        if len(buf_t) > win_n:
            buf_t.pop(0), buf_thrust.pop(0), buf_gyro.pop(0)

        state = propagate(state, imu, dt, config.noise)

        if state.t >= next_tick - 1e-9:
            next_tick += tick_dt
            t_i = state.t - config.window
            clone = next((c for c in state.clones
                          if abs(c.t - t_i) < CLONE_MATCH_TOL), None)
            if clone is not None and len(buf_t) == win_n:
                window = MeasurementWindow(
                    t_i=clone.t, t_j=state.t,
                    times=np.array(buf_t),
                    thrust_world=np.array(buf_thrust),
                    gyro_world=np.array(buf_gyro),
                    v_i=clone_vel.get(clone.t), R_i=clone.R.copy())
                try:
                    meas = provider(window) if provider is not None else None
                except Exception:
                    logger.exception("provider failed; skipping update")
                    meas = None
                if meas is not None:
                    state, diag = update(state, meas, gate=config.gating)
                    if diag.accepted:
                        out.updates_accepted += 1
                    else:
                        out.updates_rejected += 1
                else:
                    out.updates_rejected += 1
            state = augment(state)
            clone_vel[state.t] = state.nav.v.copy()
            for key in [t for t in clone_vel
                        if t < state.t - config.window - tick_dt]:
                del clone_vel[key]
            if config.health_check:
                out.health(state)
                nc = CLONE_DIM * len(state.clones)
                Ppp = state.P[nc + 6:nc + 9, nc + 6:nc + 9]
                err = state.nav.p - dataset.gt_interp_p(state.t)
                nees.append(float(err @ np.linalg.solve(Ppp, err)))

        record(k + 1, state)

    if nees:
        out.nees_position = np.array(nees)
    return out
