"""End-to-end pipeline: simulate flights, train the displacement
network, and deploy the weights inside the filter.

The trainer lives in its own package (trainer/) and talks to the filter
only through files and the command line: it reads the simulator's CSV
datasets, and its output is the weight interchange JSON that
`imo run --provider tcn` consumes. This demo drives that full loop on a
small budget (~2 min); the acceptance suites use longer flights.

Requires the trainer package:  pip install -e trainer --no-build-isolation
Run:  python3 demos/04_train_and_deploy.py
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np


def sh(*args):
    return subprocess.run([str(a) for a in args], check=True,
                          capture_output=True, text=True).stdout


def main():
    try:
        from imo_trainer import data as tdata
        from imo_trainer.train import TrainConfig, train
    except ImportError:
        sys.exit("trainer package not installed; run "
                 "`pip install -e trainer --no-build-isolation`")

    root = Path(tempfile.mkdtemp(prefix="train_deploy_"))

    print("1. simulating four training flights and one held-out flight")
    flights = []
    for seed in range(4):
        d = root / f"train{seed}"
        sh("imo", "simulate", "--track", "lemniscate", "--duration", 20.0,
           "--seed", seed, "--out", d)
        flights.append(str(d))
    held_out = root / "holdout"
    sh("imo", "simulate", "--track", "lemniscate", "--duration", 20.0,
       "--seed", 99, "--out", held_out)

    print("2. training (validating on the last flight)")
    ws = tdata.build_dataset(flights)
    train_ws, val_ws = tdata.split_by_flight(ws, val_flights=[3])
    weights = root / "weights.json"
    _, hist = train(train_ws, val_ws,
                    config=TrainConfig(epochs=40, lr_decay_every=15),
                    seed=0, out_path=weights)
    best = min(h[2] for h in hist)
    print(f"   best validation MSE {best:.3e} m^2 "
          f"after {len(hist)} epochs")

    print("3. deploying in the filter on the held-out flight")
    sigma = max(0.01, float(np.sqrt(best / 3.0)))
    for tag, extra in [("dead reckoning", ["--provider", "none"]),
                       ("trained net", ["--provider", "tcn", "--weights",
                                        weights, "--sigma-meas", sigma])]:
        out = root / tag.replace(" ", "_")
        sh("imo", "run", "--dataset", held_out, "--out", out, *extra)
        met = Path(f"{out}_metrics")
        sh("imo", "eval", "--est", out / "est.csv", "--gt", held_out,
           "--out", met)
        ate = json.loads((met / "metrics.json").read_text())["ate_t_m"]
        print(f"   {tag:15s} ATE = {ate:7.3f} m")


if __name__ == "__main__":
    main()
