import pathlib

import numpy as np
import pytest

from imo import ekf, sim, so3

_ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURE_WEIGHTS = str(_ROOT / "fixtures" / "tcn_fixture.json")
FIXTURE_REFS = str(_ROOT / "fixtures" / "tcn_fixture_ref.json")


def nav_boxplus(nav, d):
    return ekf.NavState(so3.exp(d[0:3]) @ nav.R, nav.v + d[3:6],
                        nav.p + d[6:9], nav.ba + d[9:12], nav.bg + d[12:15])


def nav_boxminus(a, b):
    return np.concatenate([so3.log(a.R @ b.R.T), a.v - b.v, a.p - b.p,
                           a.ba - b.ba, a.bg - b.bg])


def random_nav(rng, speed=3.0):
    return ekf.NavState(so3.exp(rng.normal(0, 1, 3)),
                        rng.normal(0, speed, 3),
                        rng.normal(0, 5, 3),
                        rng.normal(0, 0.05, 3),
                        rng.normal(0, 0.005, 3))


@pytest.fixture(scope="session")
def ds_noisefree():
    """10 s lemniscate with drag but no noise and no biases."""
    cfg = sim.SimConfig(track="lemniscate", duration=10.0, seed=3,
                        noise=sim.NoiseParams(0, 0, 0, 0, 0),
                        init_accel_bias_std=0.0, init_gyro_bias_std=0.0)
    return sim.simulate(cfg)


@pytest.fixture(scope="session")
def ds_noisy():
    """8 s lemniscate with default noise and seeded biases."""
    cfg = sim.SimConfig(track="lemniscate", duration=8.0, seed=11)
    return sim.simulate(cfg)


@pytest.fixture(scope="session")
def ds_zero_drag():
    """6 s drag-free flight; commanded thrust is the whole truth."""
    cfg = sim.SimConfig(track="lemniscate", duration=6.0, seed=5,
                        drag=(0.0, 0.0, 0.0),
                        noise=sim.NoiseParams(0, 0, 0, 0, 0),
                        init_accel_bias_std=0.0, init_gyro_bias_std=0.0)
    return sim.simulate(cfg)
