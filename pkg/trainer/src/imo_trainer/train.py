"""Training loop: MSE on displacement targets with orientation/bias
augmentations, deterministic seeding, early stopping on validation loss,
and atomic export to the weight interchange JSON."""

import dataclasses

import numpy as np
import torch
from scipy.spatial.transform import Rotation as _ScipyRotation

from .model import ArchConfig, TcnNet, export_weights


class TrainingDivergence(Exception):
    """Loss became non-finite; carries the epoch for diagnostics."""


@dataclasses.dataclass
class AugmentationConfig:
    sigma_rot: float = 0.01    # rad, per-window orientation perturbation
    sigma_bias: float = 0.001  # rad/s, per-window gyro-bias perturbation

    def __post_init__(self):
        if self.sigma_rot < 0 or self.sigma_bias < 0:
            raise ValueError("augmentation sigmas must be >= 0")


@dataclasses.dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 256
    lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 15
    patience: int = 10
    augment: AugmentationConfig = dataclasses.field(
        default_factory=AugmentationConfig)


def _augment(inputs, rng, aug):
    """Rotate each window's thrust and gyro 3-vectors by a random small
    rotation and offset the gyro channels by a random constant bias:
    the filter's orientation and bias estimates are imperfect at
    inference, so the net must tolerate both."""
    if aug.sigma_rot <= 0 and aug.sigma_bias <= 0:
        return inputs
    n = len(inputs)
    out = inputs
    if aug.sigma_rot > 0:
        rotvec = rng.normal(0.0, aug.sigma_rot, (n, 3))
        R = _ScipyRotation.from_rotvec(rotvec).as_matrix()
        out = np.empty_like(inputs)
        out[:, 0:3] = np.einsum("nij,njt->nit", R, inputs[:, 0:3])
        out[:, 3:6] = np.einsum("nij,njt->nit", R, inputs[:, 3:6])
    if aug.sigma_bias > 0:
        out = out.copy() if out is inputs else out
        out[:, 3:6] += rng.normal(0.0, aug.sigma_bias, (n, 3))[:, :, None]
    return out


def mse(pred, target):
    """(1/N) sum of squared displacement-error norms, m^2."""
    err = np.asarray(pred) - np.asarray(target)
    return float(np.mean(np.sum(err ** 2, axis=1)))


def evaluate(net, ws, batch_size=1024):
    net.eval()
    outs = []
    with torch.no_grad():
        for k in range(0, len(ws), batch_size):
            x = torch.as_tensor(ws.inputs[k:k + batch_size],
                                dtype=torch.float32)
            outs.append(net(x).numpy())
    return mse(np.concatenate(outs), ws.targets)


def train(train_ws, val_ws, arch=None, config=None, seed=0, out_path=None,
          log_path=None):
    """Fit the network; returns (net, history). `history` rows are
    (epoch, train_mse, val_mse). The best-validation weights are restored
    before export."""
    arch = arch or ArchConfig()
    config = config or TrainConfig()
    if len(train_ws) == 0:
        raise ValueError("empty training set")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    net = TcnNet(arch)
    net.set_norm(train_ws.norm_mean, train_ws.norm_std)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    sched = torch.optim.lr_scheduler.StepLR(
        opt, step_size=config.lr_decay_every, gamma=config.lr_decay)

    targets = torch.as_tensor(train_ws.targets, dtype=torch.float32)
    history = []
    best_val = np.inf
    best_state = None
    stale = 0
    for epoch in range(config.epochs):
        net.train()
        order = rng.permutation(len(train_ws))
        total = 0.0
        for k in range(0, len(order), config.batch_size):
            idx = order[k:k + config.batch_size]
            x_np = _augment(train_ws.inputs[idx], rng, config.augment)
            x = torch.as_tensor(x_np, dtype=torch.float32)
            y = targets[idx]
            opt.zero_grad()
            pred = net(x)
            loss = torch.mean(torch.sum((pred - y) ** 2, dim=1))
            if not torch.isfinite(loss):
                raise TrainingDivergence(
                    f"non-finite loss at epoch {epoch}, batch {k}")
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        sched.step()
        train_mse = total / len(order)
        val_mse = evaluate(net, val_ws) if len(val_ws) else train_mse
        history.append((epoch, train_mse, val_mse))
        if val_mse < best_val:
            best_val = val_mse
            best_state = {k: v.clone() for k, v in net.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    if best_state is not None:
        net.load_state_dict(best_state)
    net.eval()
    if out_path is not None:
        export_weights(net, out_path)
    if log_path is not None:
        with open(log_path, "w") as f:
            f.write("epoch,train_mse,val_mse\n")
            for row in history:
                f.write(f"{row[0]},{row[1]:.10g},{row[2]:.10g}\n")
    return net, history
