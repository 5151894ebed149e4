"""Temporal convolutional network inference: dilated causal 1-D
convolutions with residual blocks, pure numpy.

Weights come from a self-describing JSON interchange file:
    {"format_version": 1,
     "meta": {"channels", "window", "kernel", "dilations", "hidden_channels"},
     "norm": {"mean": [...], "std": [...]},
     "tensors": {name: {"shape": [...], "data": [row-major floats]}}}
Tensor names: block{i}.conv{1|2}.{weight|bias}, block{i}.skip.weight,
head.{weight|bias}.
"""

import dataclasses
import json

import numpy as np

FORMAT_VERSION = 1


class WeightLoadError(Exception):
    """Weight file missing, malformed, or inconsistent with its metadata."""


@dataclasses.dataclass
class ConvLayer:
    weight: np.ndarray  # (out_ch, in_ch, kernel)
    bias: np.ndarray    # (out_ch,)
    dilation: int


@dataclasses.dataclass
class ResidualBlock:
    conv1: ConvLayer
    conv2: ConvLayer
    skip: np.ndarray  # (out_ch, in_ch) 1x1 projection, or None if identity


@dataclasses.dataclass
class TcnModel:
    blocks: list
    head_weight: np.ndarray  # (3, channels of last block)
    head_bias: np.ndarray    # (3,)
    input_channels: int
    window: int
    norm_mean: np.ndarray    # (input_channels,)
    norm_std: np.ndarray
    meta: dict


def _tensor(tensors, name, shape):
    if name not in tensors:
        raise WeightLoadError(f"missing tensor {name}")
    entry = tensors[name]
    arr = np.asarray(entry["data"], dtype=float)
    declared = tuple(entry["shape"])
    if declared != tuple(shape):
        raise WeightLoadError(
            f"tensor {name}: expected shape {tuple(shape)}, got {declared}")
    if arr.size != int(np.prod(shape)):
        raise WeightLoadError(f"tensor {name}: data length does not match "
                              "declared shape")
    if not np.all(np.isfinite(arr)):
        raise WeightLoadError(f"tensor {name}: non-finite weight")
    return arr.reshape(shape)


def load_weights(path):
    """Read and shape-check an interchange file; the model is immutable."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise WeightLoadError(f"{path}: {e}") from e
    if doc.get("format_version") != FORMAT_VERSION:
        raise WeightLoadError(
            f"unsupported format_version {doc.get('format_version')!r}")
    meta = doc["meta"]
    channels = int(meta["channels"])
    window = int(meta["window"])
    kernel = int(meta["kernel"])
    dilations = [int(d) for d in meta["dilations"]]
    hidden = int(meta["hidden_channels"])
    tensors = doc["tensors"]

    blocks = []
    in_ch = channels
    for i, dil in enumerate(dilations):
        w1 = _tensor(tensors, f"block{i}.conv1.weight", (hidden, in_ch,
                                                         kernel))
        b1 = _tensor(tensors, f"block{i}.conv1.bias", (hidden,))
        w2 = _tensor(tensors, f"block{i}.conv2.weight", (hidden, hidden,
                                                         kernel))
        b2 = _tensor(tensors, f"block{i}.conv2.bias", (hidden,))
        skip = None
        if in_ch != hidden:
            skip = _tensor(tensors, f"block{i}.skip.weight", (hidden, in_ch))
        blocks.append(ResidualBlock(ConvLayer(w1, b1, dil),
                                    ConvLayer(w2, b2, dil), skip))
        in_ch = hidden

    head_w = _tensor(tensors, "head.weight", (3, in_ch))
    head_b = _tensor(tensors, "head.bias", (3,))
    norm = doc.get("norm", {})
    mean = np.asarray(norm.get("mean", np.zeros(channels)), dtype=float)
    std = np.asarray(norm.get("std", np.ones(channels)), dtype=float)
    if mean.shape != (channels,) or std.shape != (channels,):
        raise WeightLoadError("norm stats do not match channel count")

    model = TcnModel(blocks, head_w, head_b, channels, window,
                     mean, std, dict(meta))
    if receptive_field(model) < window:
        raise WeightLoadError("receptive field smaller than input window")
    return model


def _causal_conv(x, layer):
    """Dilated causal convolution; x is (channels, time)."""
    w, b, d = layer.weight, layer.bias, layer.dilation
    kernel = w.shape[2]
    pad = d * (kernel - 1)
    xp = np.pad(x, ((0, 0), (pad, 0)))
    T = x.shape[1]
    out = np.tile(b[:, None], (1, T))
    for k in range(kernel):
        # tap k reaches back (kernel-1-k)*d samples
        seg = xp[:, pad + (k - kernel + 1) * d:pad + (k - kernel + 1) * d + T]
        out = out + w[:, :, k] @ seg
    return out


def forward(model, x):
    """Forward pass on a (channels, window) input; returns the 3-vector
    displacement prediction from the last time step."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_channels, model.window):
        raise ValueError(f"input shape {x.shape} does not match model "
                         f"({model.input_channels}, {model.window})")
    y = (x - model.norm_mean[:, None]) / model.norm_std[:, None]
    for block in model.blocks:
        z = np.maximum(_causal_conv(y, block.conv1), 0.0)
        z = np.maximum(_causal_conv(z, block.conv2), 0.0)
        res = y if block.skip is None else block.skip @ y
        y = z + res
    return model.head_weight @ y[:, -1] + model.head_bias


def receptive_field(model):
    """Number of input samples visible to the last output frame."""
    return 1 + sum(2 * (b.conv1.weight.shape[2] - 1) * b.conv1.dilation
                   for b in model.blocks)


def describe(model):
    """Metadata summary used by the CLI weight inspector."""
    return {
        "input_channels": model.input_channels,
        "window": model.window,
        "blocks": len(model.blocks),
        "kernel": model.blocks[0].conv1.weight.shape[2] if model.blocks
        else None,
        "dilations": [b.conv1.dilation for b in model.blocks],
        "hidden_channels": model.blocks[0].conv1.weight.shape[0]
        if model.blocks else None,
        "receptive_field": receptive_field(model),
        "parameters": int(sum(
            b.conv1.weight.size + b.conv1.bias.size + b.conv2.weight.size
            + b.conv2.bias.size + (b.skip.size if b.skip is not None else 0)
            for b in model.blocks)
            + model.head_weight.size + model.head_bias.size),
    }
