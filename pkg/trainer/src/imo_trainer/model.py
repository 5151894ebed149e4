"""Torch model for the displacement network, plus export/import of the
shared weight interchange JSON:
    {"format_version": 1,
     "meta": {"channels", "window", "kernel", "dilations", "hidden_channels"},
     "norm": {"mean": [...], "std": [...]},
     "tensors": {name: {"shape": [...], "data": [row-major floats]}}}
Tensor names: block{i}.conv{1|2}.{weight|bias}, block{i}.skip.weight,
head.{weight|bias}.
"""

import dataclasses
import json
import os
import tempfile

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

FORMAT_VERSION = 1


class WeightFormatError(Exception):
    pass


@dataclasses.dataclass
class ArchConfig:
    channels: int = 6
    window: int = 50
    kernel: int = 3
    dilations: tuple = (1, 2, 4, 8, 16)
    hidden: int = 32

    def receptive_field(self):
        return 1 + sum(2 * (self.kernel - 1) * d for d in self.dilations)


class _Block(nn.Module):
    def __init__(self, in_ch, out_ch, kernel, dilation):
        super().__init__()
        self.dilation = dilation
        self.pad = dilation * (kernel - 1)
        self.conv1 = nn.Conv1d(in_ch, out_ch, kernel, dilation=dilation)
        self.conv2 = nn.Conv1d(out_ch, out_ch, kernel, dilation=dilation)
        self.skip = nn.Conv1d(in_ch, out_ch, 1, bias=False) \
            if in_ch != out_ch else None

    def forward(self, x):
        z = F.relu(self.conv1(F.pad(x, (self.pad, 0))))
        z = F.relu(self.conv2(F.pad(z, (self.pad, 0))))
        res = x if self.skip is None else self.skip(x)
        return z + res


class TcnNet(nn.Module):
    """Dilated causal TCN with residual blocks; the head reads the last
    time frame. Input normalization constants are buffers so they export
    with the weights."""

    def __init__(self, arch):
        super().__init__()
        if arch.receptive_field() < arch.window:
            raise ValueError("receptive field smaller than input window")
        self.arch = arch
        blocks = []
        in_ch = arch.channels
        for d in arch.dilations:
            blocks.append(_Block(in_ch, arch.hidden, arch.kernel, d))
            in_ch = arch.hidden
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Linear(in_ch, 3)
        self.register_buffer("norm_mean", torch.zeros(arch.channels))
        self.register_buffer("norm_std", torch.ones(arch.channels))

    def set_norm(self, mean, std):
        self.norm_mean.copy_(torch.as_tensor(mean, dtype=torch.float64))
        self.norm_std.copy_(torch.as_tensor(std, dtype=torch.float64))

    def forward(self, x):
        # x: (batch, channels, window)
        y = (x - self.norm_mean[:, None]) / self.norm_std[:, None]
        for block in self.blocks:
            y = block(y)
        return self.head(y[:, :, -1])


def export_weights(net, path):
    """Atomic write of the interchange JSON (temp file + rename)."""
    arch = net.arch
    tensors = {}

    def put(name, tensor):
        arr = tensor.detach().cpu().double().numpy()
        tensors[name] = {"shape": list(arr.shape),
                         "data": arr.ravel().tolist()}

    for i, block in enumerate(net.blocks):
        put(f"block{i}.conv1.weight", block.conv1.weight)
        put(f"block{i}.conv1.bias", block.conv1.bias)
        put(f"block{i}.conv2.weight", block.conv2.weight)
        put(f"block{i}.conv2.bias", block.conv2.bias)
        if block.skip is not None:
            # stored as a (out_ch, in_ch) projection matrix
            tensors[f"block{i}.skip.weight"] = {
                "shape": list(block.skip.weight.shape[:2]),
                "data": block.skip.weight.detach().cpu().double()
                .numpy().ravel().tolist()}
    put("head.weight", net.head.weight)
    put("head.bias", net.head.bias)

    doc = {
        "format_version": FORMAT_VERSION,
        "meta": {"channels": arch.channels, "window": arch.window,
                 "kernel": arch.kernel, "dilations": list(arch.dilations),
                 "hidden_channels": arch.hidden},
        "norm": {"mean": net.norm_mean.tolist(),
                 "std": net.norm_std.tolist()},
        "tensors": tensors,
    }
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(doc, f)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def net_from_weights(path):
    """Rebuild a TcnNet from an interchange file (float64 parameters)."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise WeightFormatError(f"{path}: {e}") from e
    if doc.get("format_version") != FORMAT_VERSION:
        raise WeightFormatError(
            f"unsupported format_version {doc.get('format_version')!r}")
    meta = doc["meta"]
    arch = ArchConfig(channels=int(meta["channels"]),
                      window=int(meta["window"]),
                      kernel=int(meta["kernel"]),
                      dilations=tuple(int(d) for d in meta["dilations"]),
                      hidden=int(meta["hidden_channels"]))
    net = TcnNet(arch).double()

    def get(name, shape):
        if name not in doc["tensors"]:
            raise WeightFormatError(f"missing tensor {name}")
        entry = doc["tensors"][name]
        arr = np.asarray(entry["data"], dtype=float)
        if tuple(entry["shape"]) != tuple(shape):
            raise WeightFormatError(f"tensor {name}: shape mismatch")
        if not np.all(np.isfinite(arr)):
            raise WeightFormatError(f"tensor {name}: non-finite weight")
        return torch.from_numpy(arr.reshape(shape).copy())

    with torch.no_grad():
        in_ch = arch.channels
        for i, block in enumerate(net.blocks):
            k = arch.kernel
            block.conv1.weight.copy_(
                get(f"block{i}.conv1.weight", (arch.hidden, in_ch, k)))
            block.conv1.bias.copy_(
                get(f"block{i}.conv1.bias", (arch.hidden,)))
            block.conv2.weight.copy_(
                get(f"block{i}.conv2.weight", (arch.hidden, arch.hidden, k)))
            block.conv2.bias.copy_(
                get(f"block{i}.conv2.bias", (arch.hidden,)))
            if block.skip is not None:
                block.skip.weight.copy_(
                    get(f"block{i}.skip.weight",
                        (arch.hidden, in_ch))[:, :, None])
            in_ch = arch.hidden
        net.head.weight.copy_(get("head.weight", (3, in_ch)))
        net.head.bias.copy_(get("head.bias", (3,)))
    norm = doc.get("norm", {})
    net.set_norm(norm.get("mean", np.zeros(arch.channels)),
                 norm.get("std", np.ones(arch.channels)))
    net.eval()
    return net


def reference_forward(weight_path, x):
    """Forward pass driven entirely by an interchange file; the parity
    oracle against the inference-side implementation."""
    net = net_from_weights(weight_path)
    x = np.asarray(x, dtype=float)
    arch = net.arch
    if x.shape != (arch.channels, arch.window):
        raise ValueError(f"input shape {x.shape} does not match model "
                         f"({arch.channels}, {arch.window})")
    with torch.no_grad():
        y = net(torch.from_numpy(x[None]))
    return y[0].numpy()
