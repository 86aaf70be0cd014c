"""Neural network layers with hand-written gradients.

Functional ops take batched inputs: images are ``[B, C, H, W]`` and feature
vectors ``[B, F]``. The module classes wrap them with named parameters so a
network can be checkpointed and optimized.
"""

from __future__ import annotations

import json
import struct
import zlib
from typing import Iterator

import numpy as np

from .autodiff import Tensor, as_tensor, make_node
from .errors import ChecksumError, MagicError, ParameterError, TruncationError, VersionError

LEAKY_SLOPE = 0.01


def conv_output_size(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


def conv2d(x, weight, bias, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation plus bias, computed as an im2col matmul."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 4 or weight.ndim != 4:
        raise ParameterError(f"conv2d expects x [B,C,H,W] and weight [O,C,kh,kw], got {x.shape}, {weight.shape}")
    B, C, H, W = x.shape
    O, Cw, kh, kw = weight.shape
    if Cw != C or bias.shape != (O,):
        raise ParameterError(f"conv2d channel mismatch: x {x.shape}, weight {weight.shape}, bias {bias.shape}")
    Ho, Wo = conv_output_size(H, kh, stride, padding), conv_output_size(W, kw, stride, padding)
    if Ho < 1 or Wo < 1:
        raise ParameterError(f"conv2d output would be empty for input {x.shape}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (Ho - 1) * stride + 1 : stride, : (Wo - 1) * stride + 1 : stride]
    # column layout (kh, kw, C) keeps each tap's channel block contiguous for the scatter in bw
    cols = win.transpose(0, 2, 3, 4, 5, 1).reshape(B, Ho * Wo, kh * kw * C)
    wmat = weight.data.transpose(0, 2, 3, 1).reshape(O, -1)
    out = np.matmul(wmat, cols.transpose(0, 2, 1)).reshape(B, O, Ho, Wo) + bias.data[:, None, None]

    def bw(g):
        gr = g.reshape(B, O, Ho * Wo)
        gw = np.matmul(gr, cols).sum(axis=0).reshape(O, kh, kw, C).transpose(0, 3, 1, 2)
        gb = gr.sum(axis=(0, 2))
        gx = None
        if x.requires_grad:
            dcols = np.matmul(gr.transpose(0, 2, 1), wmat).reshape(B, Ho, Wo, kh, kw, C)
            gxp = np.zeros((B, xp.shape[2], xp.shape[3], C))
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i : i + stride * Ho : stride, j : j + stride * Wo : stride] += dcols[:, :, :, i, j]
            gx = gxp[:, padding : padding + H, padding : padding + W].transpose(0, 3, 1, 2)
        return gx, gw, gb

    return make_node(out, (x, weight, bias), bw, "conv2d")


def instance_norm(x, eps: float = 1e-5) -> Tensor:
    """Per-example, per-channel standardization over the spatial axes (no affine)."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ParameterError(f"instance_norm expects [B,C,H,W], got {x.shape}")
    axes = (2, 3)
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=axes, keepdims=True) + eps)
    y = xc * inv

    def bw(g):
        return (inv * (g - g.mean(axis=axes, keepdims=True) - y * (g * y).mean(axis=axes, keepdims=True)),)

    return make_node(y, (x,), bw, "instance_norm")


def leaky_relu(x, slope: float = LEAKY_SLOPE) -> Tensor:
    x = as_tensor(x)
    # subgradient at 0 taken from the positive side
    pos = x.data >= 0
    return make_node(np.where(pos, x.data, slope * x.data), (x,), lambda g: (np.where(pos, g, slope * g),), "leaky_relu")


def max_pool2d(x, size: int = 2) -> Tensor:
    """Non-overlapping max pooling (stride = size); trailing rows/cols dropped."""
    x = as_tensor(x)
    B, C, H, W = x.shape
    Ho, Wo = H // size, W // size
    if Ho < 1 or Wo < 1:
        raise ParameterError(f"max_pool2d input {x.shape} smaller than pool {size}")
    blocks = x.data[:, :, : Ho * size, : Wo * size].reshape(B, C, Ho, size, Wo, size)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho, Wo, size * size)
    arg = blocks.argmax(axis=-1)  # first max in row-major order within the block
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        gb = np.zeros((B, C, Ho, Wo, size * size))
        np.put_along_axis(gb, arg[..., None], g[..., None], axis=-1)
        gb = gb.reshape(B, C, Ho, Wo, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho * size, Wo * size)
        gx = np.zeros(x.shape)
        gx[:, :, : Ho * size, : Wo * size] = gb
        return (gx,)

    return make_node(out, (x,), bw, "max_pool2d")


def dropout(x, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity outside training or when ``p == 0``."""
    x = as_tensor(x)
    if not 0 <= p < 1:
        raise ParameterError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0:
        return x
    if rng is None:
        raise ParameterError("dropout in training mode needs an rng")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return make_node(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


def dense(x, weight, bias) -> Tensor:
    """``x @ W.T + b`` with W shaped [F_out, F_in]."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1] or bias.shape != (weight.shape[0],):
        raise ParameterError(f"dense shape mismatch: x {x.shape}, W {weight.shape}, b {bias.shape}")
    xd = x.data

    def bw(g):
        if xd.ndim == 1:
            return g @ weight.data, np.outer(g, xd), g
        return g @ weight.data, g.T @ xd, g.sum(axis=0)

    return make_node(xd @ weight.data.T + bias.data, (x, weight, bias), bw, "dense")


def flatten(x) -> Tensor:
    x = as_tensor(x)
    return x.reshape(x.shape[0], -1)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean of ``-log softmax(logits)[label]`` over the batch."""
    logits = as_tensor(logits)
    single = logits.ndim == 1
    z = logits.data[None] if single else logits.data
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    B, K = z.shape
    if labels.shape != (B,) or labels.min() < 0 or labels.max() >= K:
        raise ParameterError(f"labels {labels} invalid for logits of shape {logits.shape}")
    lsm = log_softmax(z)
    loss = -lsm[np.arange(B), labels].mean()

    def bw(g):
        d = np.exp(lsm)
        d[np.arange(B), labels] -= 1.0
        d *= g / B
        return (d[0] if single else d,)

    return make_node(np.asarray(loss), (logits,), bw, "softmax_xent")


# ---------------------------------------------------------------- modules


class Module:
    training = False

    def parameters(self) -> Iterator[tuple[str, Tensor]]:
        return iter(())

    def forward(self, x, rng=None):
        raise NotImplementedError

    def __call__(self, x, rng=None):
        return self.forward(x, rng)

    def config(self) -> dict:
        return {"type": type(self).__name__}


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Kaiming uniform with a=sqrt(5), i.e. bound 1/sqrt(fan_in)."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2d(Module):
    def __init__(self, c_in, c_out, kernel=3, stride=1, padding=1, rng=None):
        rng = rng or np.random.default_rng(0)
        self.c_in, self.c_out, self.kernel, self.stride, self.padding = c_in, c_out, kernel, stride, padding
        self.weight = Tensor(kaiming_uniform(rng, (c_out, c_in, kernel, kernel), c_in * kernel * kernel), True)
        self.bias = Tensor(np.zeros(c_out), True)

    def parameters(self):
        yield "weight", self.weight
        yield "bias", self.bias

    def forward(self, x, rng=None):
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def config(self):
        return {"type": "Conv2d", "c_in": self.c_in, "c_out": self.c_out, "kernel": self.kernel,
                "stride": self.stride, "padding": self.padding}


class Dense(Module):
    def __init__(self, f_in, f_out, rng=None):
        rng = rng or np.random.default_rng(0)
        self.f_in, self.f_out = f_in, f_out
        self.weight = Tensor(kaiming_uniform(rng, (f_out, f_in), f_in), True)
        self.bias = Tensor(np.zeros(f_out), True)

    def parameters(self):
        yield "weight", self.weight
        yield "bias", self.bias

    def forward(self, x, rng=None):
        return dense(x, self.weight, self.bias)

    def config(self):
        return {"type": "Dense", "f_in": self.f_in, "f_out": self.f_out}


class InstanceNorm(Module):
    def __init__(self, eps=1e-5):
        self.eps = eps

    def forward(self, x, rng=None):
        return instance_norm(x, self.eps)

    def config(self):
        return {"type": "InstanceNorm", "eps": self.eps}


class LeakyReLU(Module):
    def __init__(self, slope=LEAKY_SLOPE):
        self.slope = slope

    def forward(self, x, rng=None):
        return leaky_relu(x, self.slope)

    def config(self):
        return {"type": "LeakyReLU", "slope": self.slope}


class MaxPool2d(Module):
    def __init__(self, size=2):
        self.size = size

    def forward(self, x, rng=None):
        return max_pool2d(x, self.size)

    def config(self):
        return {"type": "MaxPool2d", "size": self.size}


class Dropout(Module):
    def __init__(self, p=0.3):
        self.p = p

    def forward(self, x, rng=None):
        return dropout(x, self.p, self.training, rng)

    def config(self):
        return {"type": "Dropout", "p": self.p}


class Flatten(Module):
    def forward(self, x, rng=None):
        return flatten(x)


class Sequential(Module):
    def __init__(self, *layers):
        self.layers = list(layers)

    def parameters(self):
        for i, layer in enumerate(self.layers):
            for name, p in layer.parameters():
                yield f"{i}.{name}", p

    def train(self, flag=True):
        self.training = flag
        for layer in self.layers:
            if isinstance(layer, Sequential):
                layer.train(flag)
            else:
                layer.training = flag
        return self

    def eval(self):
        return self.train(False)

    def forward(self, x, rng=None):
        for layer in self.layers:
            x = layer(x, rng)
        return x

    def config(self):
        return {"type": "Sequential", "layers": [layer.config() for layer in self.layers]}


# ------------------------------------------------------------- checkpoints

CHECKPOINT_MAGIC = b"MDQW"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, named_params, architecture: dict, metadata: dict | None = None) -> None:
    """Write parameters as little-endian float64 arrays behind a JSON header.

    Layout: magic, u32 version, u32 header length, UTF-8 JSON header
    (architecture echo, free-form metadata, ordered parameter names and
    shapes), the raw arrays in header order, then a CRC-32 of all prior bytes.
    """
    named = [(name, np.asarray(t.data if isinstance(t, Tensor) else t, dtype="<f8")) for name, t in named_params]
    header = {
        "architecture": architecture,
        "metadata": metadata or {},
        "params": [{"name": n, "shape": list(a.shape)} for n, a in named],
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(hb)) + hb
    body += b"".join(a.tobytes() for _, a in named)
    with open(path, "wb") as fh:
        fh.write(body + struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray], dict]:
    """Return ``(architecture, {name: array}, metadata)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise MagicError(f"{path}: not a weight checkpoint")
    if len(raw) < 16:
        raise TruncationError(f"{path}: file too short")
    (version, hlen) = struct.unpack_from("<II", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    if len(raw) < 12 + hlen + 4:
        raise TruncationError(f"{path}: truncated header")
    header = json.loads(raw[12 : 12 + hlen])
    expected = 12 + hlen + 8 * sum(int(np.prod(p["shape"])) for p in header["params"]) + 4
    if len(raw) != expected:
        raise TruncationError(f"{path}: expected {expected} bytes, found {len(raw)}")
    if zlib.crc32(raw[:-4]) != struct.unpack("<I", raw[-4:])[0]:
        raise ChecksumError(f"{path}: checksum mismatch")
    params, off = {}, 12 + hlen
    for p in header["params"]:
        n = int(np.prod(p["shape"]))
        params[p["name"]] = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(p["shape"]).astype(np.float64)
        off += 8 * n
    return header["architecture"], params, header.get("metadata", {})
