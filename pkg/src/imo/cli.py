"""Command-line entry point: simulate flights, run the filter and its
ablations, evaluate trajectories, inspect network weights.

Exit codes: 0 success, 2 usage/config error, 3 data error. All randomness
flows from explicit --seed flags. Set IMO_LOG to control log verbosity.
"""

import dataclasses
import json
import logging
import os
import sys

import click
import numpy as np

from . import evaluation, providers, tcn
from .data import (DatasetError, load_dataset, load_trajectory,
                   save_dataset, save_trajectory)
from .ekf import FilterConfig, run_filter
from .sim import NoiseParams, SimConfig, SimulationError, simulate

EXIT_DATA_ERROR = 3


def _setup_logging():
    level = os.environ.get("IMO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config_overrides(ctx, param, value):
    """--config file.json provides defaults that explicit flags override."""
    if value is None:
        return None
    try:
        with open(value) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise click.UsageError(f"cannot read config {value}: {e}")
    ctx.default_map = dict(ctx.default_map or {}, **cfg)
    return value


_config_option = click.option(
    "--config", type=click.Path(), callback=_load_config_overrides,
    expose_value=False, is_eager=True,
    help="JSON file with flag defaults; explicit flags win.")


@click.group()
def main():
    """Inertial-model odometry toolkit."""
    _setup_logging()


@main.command()
@_config_option
@click.option("--track", default="lemniscate",
              type=click.Choice(["lemniscate", "racetrack", "hover",
                                 "custom"]))
@click.option("--duration", default=60.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--imu-rate", default=100.0, show_default=True)
@click.option("--drag", nargs=3, type=float, default=(0.3, 0.3, 0.05),
              show_default=True)
@click.option("--sigma-accel", default=0.01, show_default=True)
@click.option("--sigma-gyro", default=0.001, show_default=True)
@click.option("--sigma-accel-bias", default=0.001, show_default=True)
@click.option("--sigma-gyro-bias", default=0.0001, show_default=True)
@click.option("--track-params", default=None,
              help="JSON dict of reference-trajectory parameters.")
@click.option("--out", required=True, type=click.Path())
def simulate_cmd(track, duration, seed, imu_rate, drag, sigma_accel,
                 sigma_gyro, sigma_accel_bias, sigma_gyro_bias,
                 track_params, out):
    """Generate a simulated flight dataset."""
    params = {}
    if track_params:
        try:
            params = json.loads(track_params)
        except json.JSONDecodeError as e:
            raise click.UsageError(f"bad --track-params: {e}")
    noise = NoiseParams(sigma_accel=sigma_accel, sigma_gyro=sigma_gyro,
                        sigma_accel_bias=sigma_accel_bias,
                        sigma_gyro_bias=sigma_gyro_bias)
    config = SimConfig(track=track, duration=duration, imu_rate=imu_rate,
                       seed=seed, drag=tuple(drag), noise=noise,
                       track_params=params)
    try:
        ds = simulate(config)
        save_dataset(ds, out)
    except SimulationError as e:
        click.echo(f"simulation failed: {e}", err=True)
        sys.exit(EXIT_DATA_ERROR)
    except OSError as e:
        click.echo(f"cannot write output: {e}", err=True)
        sys.exit(2)
    click.echo(f"duration    {duration:.1f} s")
    click.echo(f"top speed   {ds.meta['top_speed']:.2f} m/s")
    click.echo(f"path length {ds.meta['path_length']:.1f} m")


main.add_command(simulate_cmd, name="simulate")


def _make_provider(name, dataset, weights, sigma_meas, seed):
    if name == "none":
        return None
    if name == "oracle":
        return providers.OracleProvider(dataset, sigma_meas, seed=seed)
    if name == "model":
        return providers.ModelProvider(dataset, sigma_meas, source="gt")
    if name == "tcn":
        if not weights:
            raise click.UsageError("--provider tcn requires --weights")
        model = tcn.load_weights(weights)
        return providers.TcnProvider(model, sigma_meas)
    raise click.UsageError(f"unknown provider {name!r}")


@main.command("run")
@_config_option
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path())
@click.option("--provider", default="oracle", show_default=True,
              type=click.Choice(["oracle", "model", "tcn", "none"]))
@click.option("--weights", default=None, type=click.Path())
@click.option("--mode", default="filter", show_default=True,
              type=click.Choice(["filter", "concat"]))
@click.option("--update-rate", default=20.0, show_default=True)
@click.option("--window", default=0.5, show_default=True)
@click.option("--clones", default=10, show_default=True)
@click.option("--gating/--no-gating", default=True, show_default=True)
@click.option("--sigma-meas", default=0.01, show_default=True)
@click.option("--seed", default=0, show_default=True,
              help="Seed for measurement noise (oracle provider).")
@click.option("--out", required=True, type=click.Path())
def run_cmd(dataset_path, provider, weights, mode, update_rate, window,
            clones, gating, sigma_meas, seed, out):
    """Run the filter (or the concatenation ablation) on a dataset."""
    import time as _time

    if abs(window * update_rate - clones) > 1e-9:
        raise click.UsageError(
            f"window * update rate ({window * update_rate:.2f}) must equal "
            f"the clone count ({clones})")
    if provider == "tcn" and not weights:
        raise click.UsageError("--provider tcn requires --weights")
    try:
        ds = load_dataset(dataset_path)
    except DatasetError as e:
        click.echo(f"malformed dataset: {e}", err=True)
        sys.exit(EXIT_DATA_ERROR)

    os.makedirs(out, exist_ok=True)
    est_path = os.path.join(out, "est.csv")
    t0 = _time.perf_counter()

    if mode == "concat":
        if provider == "none":
            raise click.UsageError("concat mode needs a real provider")
        fn = _concat_fn(provider, ds, weights, sigma_meas, seed)
        t, p = providers.concatenation_trajectory(ds, fn, window=window,
                                                  out_rate=update_rate)
        R = np.tile(np.eye(3), (len(t), 1, 1))
        save_trajectory(est_path, t, p, R)
        accepted = rejected = 0
    else:
        noise = NoiseParams(**ds.meta.get("config", {}).get(
            "noise", dataclasses.asdict(NoiseParams())))
        cfg = FilterConfig(noise=noise, update_rate=update_rate,
                           window=window, max_clones=clones, gating=gating)
        prov = _make_provider(provider, ds, weights, sigma_meas, seed)
        run = run_filter(ds, prov, cfg)
        save_trajectory(est_path, run.t, run.p, run.R, run.v, run.ba,
                        run.bg)
        accepted, rejected = run.updates_accepted, run.updates_rejected

    # keys mirror the flag parameter names so the file can be replayed
    # verbatim with `run --config run_meta.json`
    meta = {
        "dataset_path": dataset_path, "provider": provider,
        "weights": weights, "mode": mode, "update_rate": update_rate,
        "window": window, "clones": clones, "gating": gating,
        "sigma_meas": sigma_meas, "seed": seed, "out": out,
        "result": {
            "updates_accepted": accepted, "updates_rejected": rejected,
            "wall_time_s": _time.perf_counter() - t0,
        },
    }
    with open(os.path.join(out, "run_meta.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    click.echo(f"wrote {est_path} "
               f"(updates: {accepted} accepted, {rejected} rejected)")


def _concat_fn(provider, ds, weights, sigma_meas, seed):
    if provider == "oracle":
        from .sim import displacement_oracle
        rng = np.random.default_rng(seed)

        def fn(t_i, t_j):
            return displacement_oracle(ds, t_i, t_j, sigma_meas,
                                       rng).delta_p
        return fn
    if provider == "model":
        def fn(t_i, t_j):
            times, thrust, gyro_w, v_i, _ = providers.build_gt_window(
                ds, t_i, t_j)
            return providers.model_displacement(times, thrust, v_i, t_j,
                                                gyro_world=gyro_w)
        return fn
    # tcn
    model = tcn.load_weights(weights)

    def fn(t_i, t_j):
        times, thrust, gyro_w, _, _ = providers.build_gt_window(ds, t_i,
                                                                t_j)
        return tcn.forward(model, np.vstack([thrust.T, gyro_w.T]))
    return fn


@main.command("eval")
@_config_option
@click.option("--est", "est_path", required=True, type=click.Path())
@click.option("--gt", "gt_path", required=True, type=click.Path(),
              help="Dataset directory or gt-format trajectory CSV.")
@click.option("--distances", default="10,20,40,60", show_default=True)
@click.option("--out", required=True, type=click.Path())
def eval_cmd(est_path, gt_path, distances, out):
    """Evaluate an estimated trajectory against ground truth."""
    try:
        t_e, p_e, R_e, *_ = load_trajectory(est_path)
        if os.path.isdir(gt_path):
            ds = load_dataset(gt_path)
            t_g, p_g, R_g = ds.gt_t, ds.gt_p, ds.gt_R
        else:
            t_g, p_g, R_g, *_ = load_trajectory(gt_path)
        dists = [float(d) for d in distances.split(",") if d]
        pair = evaluation.align_pair(t_e, p_e, R_e, t_g, p_g, R_g)
        report = evaluation.metrics_report(pair, dists)
    except (DatasetError, evaluation.EvalError, OSError, ValueError) as e:
        click.echo(f"evaluation failed: {e}", err=True)
        sys.exit(EXIT_DATA_ERROR)
    os.makedirs(out, exist_ok=True)
    evaluation.save_metrics(report, os.path.join(out, "metrics.json"),
                            os.path.join(out, "plot_rel.csv"))
    click.echo(f"{'ATE_T [m]':>12} {'ATE_R [deg]':>12}")
    click.echo(f"{report['ate_t_m']:>12.4f} {report['ate_r_deg']:>12.3f}")


@main.command("inspect-weights")
@click.argument("path", type=click.Path())
def inspect_weights_cmd(path):
    """Print TCN model metadata from a weight file."""
    try:
        model = tcn.load_weights(path)
    except tcn.WeightLoadError as e:
        click.echo(f"cannot load weights: {e}", err=True)
        sys.exit(EXIT_DATA_ERROR)
    for key, value in tcn.describe(model).items():
        click.echo(f"{key}: {value}")


if __name__ == "__main__":
    main()
