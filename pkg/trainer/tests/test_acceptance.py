"""Acceptance suite for the trainer package. Each test prints a single
[B#] PASS/FAIL line with the measured numbers.

B1  Parity: weights exported by the trainer evaluate identically (to
    1e-5) under the trainer's reference forward pass and the filter
    package's loader, across 100 seeded weight/input pairs.
B2  Learnability: on zero-drag flights the trained network's validation
    MSE is within 2x of the analytic commanded-thrust model; on flights
    with drag it beats that model outright.
B3  End to end: the filter driven by the trained network (through the
    command-line interface only) beats dead reckoning by at least 5x
    ATE on a held-out flight of the training track.
"""

import json
import subprocess
import sys

import numpy as np
import pytest
import torch

from imo_trainer import data as tdata
from imo_trainer import model as tmodel
from imo_trainer.train import TrainConfig, train
from conftest import simulate, zoh_model_mse


@pytest.fixture
def report(request, capsys):
    tag = {"test_b1": "B1", "test_b2": "B2", "test_b3": "B3"}[
        request.node.name.split("[")[0]]

    def _report(ok, detail):
        status = "PASS" if ok else "FAIL"
        with capsys.disabled():
            sys.stdout.write(f"[{tag}] {status}: {detail}\n")
        assert ok, f"[{tag}] {detail}"
    return _report


def _fit(flight_dirs, out_path, seed=0):
    """Train on four flights, validate on the fifth; returns the best
    validation MSE."""
    ws = tdata.build_dataset(flight_dirs)
    train_ws, val_ws = tdata.split_by_flight(ws, val_flights=[4])
    cfg = TrainConfig(epochs=100, lr_decay_every=30)
    _, hist = train(train_ws, val_ws, config=cfg, seed=seed,
                    out_path=out_path)
    return min(h[2] for h in hist)


@pytest.fixture(scope="module")
def trained_drag(flights_drag, tmp_path_factory):
    path = tmp_path_factory.mktemp("wdrag") / "weights.json"
    return str(path), _fit(flights_drag, path)


def test_b1(report, tmp_path):
    import imo.tcn

    archs = [
        tmodel.ArchConfig(),
        tmodel.ArchConfig(window=25, dilations=(2, 4, 8), hidden=8),
        tmodel.ArchConfig(window=10, kernel=2, dilations=(1, 2, 4),
                          hidden=4),
        tmodel.ArchConfig(window=40, dilations=(1, 4, 16), hidden=16),
    ]
    worst = 0.0
    for case in range(100):
        arch = archs[case % len(archs)]
        torch.manual_seed(case)
        net = tmodel.TcnNet(arch)
        rng = np.random.default_rng(case)
        net.set_norm(rng.normal(0, 1, 6), rng.uniform(0.5, 2.0, 6))
        path = tmp_path / f"w{case}.json"
        tmodel.export_weights(net, path)
        x = rng.normal(0, 3, (6, arch.window))
        want = tmodel.reference_forward(path, x)
        got = imo.tcn.forward(imo.tcn.load_weights(path), x)
        worst = max(worst, float(np.max(np.abs(got - want))))
    report(worst < 1e-5,
           f"parity over 100 weight/input pairs, worst |diff| = "
           f"{worst:.3e} (< 1e-5)")


def test_b2(report, flights_zero_drag, flights_drag, trained_drag,
            tmp_path):
    mse_zero = _fit(flights_zero_drag, tmp_path / "wzero.json")
    base_zero = zoh_model_mse(flights_zero_drag[4:])
    _, mse_drag = trained_drag
    base_drag = zoh_model_mse(flights_drag[4:])
    ok_zero = mse_zero < 2.0 * base_zero
    ok_drag = mse_drag < base_drag
    report(ok_zero and ok_drag,
           f"zero-drag val MSE {mse_zero:.3e} vs analytic-model "
           f"{base_zero:.3e} (< 2x); drag val MSE {mse_drag:.3e} vs "
           f"{base_drag:.3e} (trained < model)")


def test_b3(report, trained_drag, tmp_path):
    weights, mse_drag = trained_drag
    held_out = simulate(tmp_path / "holdout", seed=10, duration=30.0)
    sigma = max(0.01, float(np.sqrt(mse_drag / 3.0)))

    def run_and_eval(tag, extra):
        out = tmp_path / tag
        subprocess.run(["imo", "run", "--dataset", held_out,
                        "--out", str(out)] + extra,
                       check=True, capture_output=True)
        met = tmp_path / f"{tag}_metrics"
        subprocess.run(["imo", "eval", "--est", str(out / "est.csv"),
                        "--gt", held_out, "--out", str(met)],
                       check=True, capture_output=True)
        with open(met / "metrics.json") as f:
            return json.load(f)["ate_t_m"]

    ate_dead = run_and_eval("dead", ["--provider", "none"])
    ate_tcn = run_and_eval("tcn", ["--provider", "tcn",
                                   "--weights", weights,
                                   "--sigma-meas", str(sigma)])
    ratio = ate_dead / ate_tcn
    report(ratio >= 5.0,
           f"held-out flight ATE {ate_tcn:.4f} m with trained network vs "
           f"{ate_dead:.3f} m dead reckoning ({ratio:.1f}x, >= 5x)")
