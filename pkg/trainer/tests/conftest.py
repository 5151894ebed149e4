"""Trainer test fixtures. Flights are generated through the simulator's
command-line interface, so this package touches the primary component
only via its documented file formats."""

import subprocess

import numpy as np
import pytest


def simulate(out_dir, seed, duration=30.0, drag=(0.3, 0.3, 0.05),
             track="lemniscate"):
    cmd = ["imo", "simulate", "--track", track, "--duration", str(duration),
           "--seed", str(seed), "--drag", *[str(d) for d in drag],
           "--out", str(out_dir)]
    subprocess.run(cmd, check=True, capture_output=True)
    return str(out_dir)


def make_flights(tmp_path_factory, tag, drag, n=5, duration=30.0):
    root = tmp_path_factory.mktemp(tag)
    return [simulate(root / f"f{seed}", seed, duration, drag)
            for seed in range(n)]


@pytest.fixture(scope="session")
def flights_drag(tmp_path_factory):
    return make_flights(tmp_path_factory, "drag", (0.3, 0.3, 0.05))


@pytest.fixture(scope="session")
def flights_zero_drag(tmp_path_factory):
    return make_flights(tmp_path_factory, "zerodrag", (0.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def flight_short(tmp_path_factory):
    root = tmp_path_factory.mktemp("short")
    return simulate(root / "f", seed=42, duration=10.0)


def zoh_model_mse(flight_dirs, window=0.5, stride=0.05):
    """Validation-window MSE of the analytic commanded-thrust model:
    per 10 ms sample, hold thrust, chain dp and v sub-steps from the
    ground-truth start velocity."""
    from imo_trainer import data as tdata

    g = np.array([0.0, 0.0, -9.81])
    errs = []
    for d in flight_dirs:
        fl = tdata.load_flight(d)
        t = fl["t"]
        dt = float(t[1] - t[0])
        w = int(round(window / dt))
        step = int(round(stride / dt))
        R = fl["gt_R"][:len(t)]
        thrust = np.einsum("nij,j->ni", R, [0.0, 0.0, 1.0]) \
            * fl["cmd_c"][:, None]
        gt = np.loadtxt(f"{d}/gt.csv", delimiter=",", skiprows=1)
        v_gt = gt[:, 8:11]
        for k0 in range(0, len(t) - w + 1, step):
            dp = np.zeros(3)
            v = v_gt[k0].copy()
            for k in range(k0, k0 + w):
                a = thrust[k] + g
                dp += v * dt + 0.5 * a * dt * dt
                v += a * dt
            errs.append(dp - (fl["gt_p"][k0 + w] - fl["gt_p"][k0]))
    errs = np.array(errs)
    return float(np.mean(np.sum(errs ** 2, axis=1)))
