"""Small sigmoid-headed convnet with reverse-mode gradients and RMSProp.

Parameters are stored float32 (the checkpoint dtype); all forward/backward
arithmetic runs in float64 so finite-difference gradient checks are clean.
Loss and gradients go through logits, never through log(probability), so the
stack stays finite for any inputs in [0, 1] and weights of moderate size.

The layer stack is data-driven: a descriptor is a tuple of layer specs,
("conv", out_ch, k, stride) | ("relu",) | ("flatten",) | ("dense", n_out),
applied to a (channels, h, w) input, with an implicit sigmoid head. Every
network used by the players shares `standard_arch`.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .scene import PATCH_SIZE, Patch

VALID_OUTPUTS = (15, 18, 36)


def standard_arch(n_outputs: int) -> tuple:
    return (("conv", 8, 5, 2), ("relu",), ("conv", 16, 3, 2), ("relu",),
            ("flatten",), ("dense", 128), ("relu",), ("dense", n_outputs))


@dataclass
class NetworkParams:
    arch: tuple                   # layer descriptor, hashable
    input_shape: tuple            # (channels, h, w)
    n_outputs: int
    seed: int
    tensors: list                 # float32 arrays, conv/dense (W, b) pairs in order

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.arch, self.input_shape, self.n_outputs,
                             self.seed, [t.copy() for t in self.tensors])


@dataclass
class OptState:
    """RMSProp running squared-gradient cache plus hyper-parameters."""

    caches: list                  # float64, same shapes as the parameters
    learning_rate: float = 1e-3
    decay: float = 0.9
    eps: float = 1e-8
    batch_size: int = 64

    @classmethod
    def zeros_like(cls, net: NetworkParams, **hyper) -> "OptState":
        return cls([np.zeros(t.shape, dtype=np.float64) for t in net.tensors], **hyper)


@dataclass
class TrainingSample:
    """One supervised output per sample: the attempted action's index."""

    patch: np.ndarray             # (32, 32) float32
    target_index: int
    target_value: float           # in [0, 1]; soft targets allowed


def _tensor_shapes(arch: tuple, input_shape: tuple) -> list:
    shapes = []
    c, h, w = input_shape
    flat = None
    for layer in arch:
        kind = layer[0]
        if kind == "conv":
            _, out_ch, k, stride = layer
            shapes.append(((out_ch, c, k, k), (out_ch,)))
            h = (h - k) // stride + 1
            w = (w - k) // stride + 1
            c = out_ch
        elif kind == "flatten":
            flat = c * h * w
        elif kind == "dense":
            n_in = flat if flat is not None else c * h * w
            shapes.append(((n_in, layer[1]), (layer[1],)))
            flat = layer[1]
        elif kind == "relu":
            pass
        else:
            raise ValueError(f"unknown layer {layer!r}")
    return shapes


def init_network(n_outputs: int, seed: int, arch: Optional[tuple] = None,
                 input_shape: tuple = (1, PATCH_SIZE, PATCH_SIZE)) -> NetworkParams:
    """Glorot-uniform weights, zero biases, deterministic in the seed."""
    if arch is None:
        if n_outputs not in VALID_OUTPUTS:
            raise ValueError(f"n_outputs must be one of {VALID_OUTPUTS}, got {n_outputs}")
        arch = standard_arch(n_outputs)
    rng = np.random.default_rng(seed)
    tensors = []
    for w_shape, b_shape in _tensor_shapes(arch, input_shape):
        if len(w_shape) == 4:
            fan_in = w_shape[1] * w_shape[2] * w_shape[3]
            fan_out = w_shape[0] * w_shape[2] * w_shape[3]
        else:
            fan_in, fan_out = w_shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        tensors.append(rng.uniform(-limit, limit, size=w_shape).astype(np.float32))
        tensors.append(np.zeros(b_shape, dtype=np.float32))
    return NetworkParams(tuple(arch), tuple(input_shape), n_outputs, seed, tensors)


@lru_cache(maxsize=32)
def _im2col_indices(c: int, h: int, w: int, k: int, stride: int) -> np.ndarray:
    """Gather indices mapping flat (c*h*w) input to (out_locs, c*k*k) columns."""
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    idx = np.empty((oh * ow, c * k * k), dtype=np.intp)
    loc = 0
    for i in range(oh):
        for j in range(ow):
            col = 0
            for ci in range(c):
                for ki in range(k):
                    for kj in range(k):
                        idx[loc, col] = ci * h * w + (i * stride + ki) * w + (j * stride + kj)
                        col += 1
            loc += 1
    return idx


def _as_batch(patches, dtype=np.float64) -> np.ndarray:
    """(B, h, w) array from a Patch, an array, or a sequence of either."""
    if isinstance(patches, Patch):
        return patches.pixels[None].astype(dtype)
    arr = np.asarray(patches)
    if arr.dtype == object:
        arr = np.stack([p.pixels if isinstance(p, Patch) else p for p in patches])
    if arr.ndim == 2:
        arr = arr[None]
    return arr.astype(dtype, copy=False)


def _forward_pass(net: NetworkParams, x: np.ndarray, keep: bool,
                  dtype=np.float64):
    """Logits plus (when keep) the per-layer inputs needed for backward."""
    b = x.shape[0]
    c, h, w = net.input_shape
    act = x.reshape(b, c, h, w).astype(dtype, copy=False)
    caches = []
    ti = 0
    first = True
    for layer in net.arch:
        kind = layer[0]
        if kind == "conv":
            _, out_ch, k, stride = layer
            bc, cc, hh, ww = act.shape
            idx = _im2col_indices(cc, hh, ww, k, stride)
            cols = act.reshape(bc, cc * hh * ww)[:, idx]
            wt = net.tensors[ti].astype(dtype).reshape(out_ch, -1)
            bias = net.tensors[ti + 1].astype(dtype)
            out = (cols.reshape(-1, cols.shape[2]) @ wt.T).reshape(
                bc, -1, out_ch) + bias
            oh = (hh - k) // stride + 1
            ow = (ww - k) // stride + 1
            if keep:
                caches.append(("conv", cols, act.shape, (k, stride), wt, first))
            act = out.transpose(0, 2, 1).reshape(bc, out_ch, oh, ow)
            ti += 2
        elif kind == "relu":
            if keep:
                caches.append(("relu", act > 0))
            act = np.maximum(act, 0.0)
        elif kind == "flatten":
            if keep:
                caches.append(("flatten", act.shape))
            act = act.reshape(b, -1)
        elif kind == "dense":
            if act.ndim > 2:
                act = act.reshape(b, -1)
            wt = net.tensors[ti].astype(dtype)
            bias = net.tensors[ti + 1].astype(dtype)
            if keep:
                caches.append(("dense", act, wt))
            act = act @ wt + bias
            ti += 2
        first = False
    return act, caches


def forward_logits(net: NetworkParams, patches, dtype=np.float32) -> np.ndarray:
    """Prediction-path logits; float32 by default (the gradient path is float64)."""
    logits, _ = _forward_pass(net, _as_batch(patches, dtype), keep=False, dtype=dtype)
    return logits


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(net: NetworkParams, patch) -> np.ndarray:
    """Per-action success probabilities; (N_a,) for one patch, (B, N_a) batched."""
    single = isinstance(patch, Patch) or (np.asarray(patch).ndim == 2)
    probs = sigmoid(forward_logits(net, patch))
    return probs[0] if single else probs


def bce_loss(pred: float, target: float) -> float:
    """Binary cross entropy from probabilities; pred must be strictly in (0, 1)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if np.any(pred <= 0.0) or np.any(pred >= 1.0):
        raise ValueError("pred must lie strictly inside (0, 1)")
    out = -(target * np.log(pred) + (1.0 - target) * np.log1p(-pred))
    return float(out) if out.ndim == 0 else out


def _bce_from_logits(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


def _batch_arrays(batch) -> tuple:
    pixels = np.stack([s.patch for s in batch]).astype(np.float64)
    idx = np.array([s.target_index for s in batch], dtype=np.intp)
    targets = np.array([s.target_value for s in batch], dtype=np.float64)
    return pixels, idx, targets


def batch_loss(net: NetworkParams, batch) -> float:
    """Mean masked BCE: each sample contributes only its target_index output.

    Computed in float64; this is the function the gradient check differences.
    """
    pixels, idx, targets = _batch_arrays(batch)
    logits, _ = _forward_pass(net, pixels, keep=False, dtype=np.float64)
    z = logits[np.arange(len(batch)), idx]
    return float(np.mean(_bce_from_logits(z, targets)))


def backward(net: NetworkParams, batch) -> list:
    """Gradients of the mean masked BCE w.r.t. every parameter tensor."""
    if len(batch) == 0:
        raise ValueError("backward needs a non-empty batch")
    pixels, idx, targets = _batch_arrays(batch)
    b = len(batch)
    logits, caches = _forward_pass(net, pixels, keep=True)

    dz = np.zeros_like(logits)
    rows = np.arange(b)
    dz[rows, idx] = (sigmoid(logits[rows, idx]) - targets) / b

    grads = [None] * len(net.tensors)
    ti = len(net.tensors)
    delta = dz
    for cache in reversed(caches):
        kind = cache[0]
        if kind == "dense":
            _, act_in, wt = cache
            ti -= 2
            grads[ti] = act_in.T @ delta
            grads[ti + 1] = delta.sum(axis=0)
            delta = delta @ wt.T
        elif kind == "flatten":
            delta = delta.reshape(cache[1])
        elif kind == "relu":
            delta = delta * cache[1]
        elif kind == "conv":
            _, cols, in_shape, (k, stride), wt, first = cache
            bc, out_ch, oh, ow = delta.shape
            dl = delta.reshape(bc, out_ch, oh * ow).transpose(0, 2, 1)   # (B, L, O)
            ti -= 2
            grads[ti] = np.tensordot(dl, cols, axes=([0, 1], [0, 1])).reshape(
                net.tensors[ti].shape)
            grads[ti + 1] = dl.sum(axis=(0, 1))
            if first:
                continue   # input gradients of the first layer are never used
            dcols = (dl.reshape(-1, out_ch) @ wt).reshape(bc, oh * ow, -1)
            # col2im: every kernel offset maps output locations injectively,
            # so the scatter is k*k strided additions
            _, cc, hh, ww = in_shape
            dc6 = dcols.reshape(bc, oh, ow, cc, k, k)
            dx = np.zeros(in_shape, dtype=np.float64)
            for ki in range(k):
                for kj in range(k):
                    dx[:, :, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride] += \
                        dc6[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
            delta = dx
    return grads


def rmsprop_step(net: NetworkParams, grads: list, opt: OptState) -> tuple:
    """One RMSProp update; returns the new (params, state) functionally."""
    new_tensors = []
    new_caches = []
    for w, g, c in zip(net.tensors, grads, opt.caches):
        g = np.asarray(g, dtype=np.float64)
        c2 = opt.decay * c + (1.0 - opt.decay) * g * g
        w2 = w.astype(np.float64) - opt.learning_rate * g / (np.sqrt(c2) + opt.eps)
        new_tensors.append(w2.astype(np.float32))
        new_caches.append(c2)
    return (NetworkParams(net.arch, net.input_shape, net.n_outputs, net.seed, new_tensors),
            replace(opt, caches=new_caches))


def grad_check(net: NetworkParams, batch, n_probes: int = 100, h: float = 1e-4,
               rng_seed: int = 0) -> float:
    """Max relative error between backward and central finite differences.

    Probes up to n_probes randomly chosen coordinates; the difference
    quotient is accumulated in float64 on a float64 copy of the parameters.
    """
    analytic = backward(net, batch)
    rng = np.random.default_rng(rng_seed)
    sizes = [t.size for t in net.tensors]
    total = sum(sizes)
    chosen = rng.choice(total, size=min(n_probes, total), replace=False)

    work = net.copy()
    worst = 0.0
    for flat in np.sort(chosen):
        ti = 0
        while flat >= sizes[ti]:
            flat -= sizes[ti]
            ti += 1
        orig = work.tensors[ti].copy()
        base = np.float64(orig.flat[flat])

        probe = orig.astype(np.float64)
        probe.flat[flat] = base + h
        work.tensors[ti] = probe
        up = batch_loss(work, batch)
        probe = orig.astype(np.float64)
        probe.flat[flat] = base - h
        work.tensors[ti] = probe
        down = batch_loss(work, batch)
        work.tensors[ti] = orig

        numeric = (up - down) / (2.0 * h)
        a = float(analytic[ti].flat[flat])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpoint format: one file, a JSON manifest line, a blank line, then the
# float32 little-endian tensors concatenated in manifest order

_MAGIC = "advgrasp-net-v1"


def save_network(net: NetworkParams, path) -> None:
    manifest = {
        "format": _MAGIC,
        "arch": [list(layer) for layer in net.arch],
        "input_shape": list(net.input_shape),
        "n_outputs": net.n_outputs,
        "seed": net.seed,
        "tensor_shapes": [list(t.shape) for t in net.tensors],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        fh.write(b"\n\n")
        for t in net.tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_network(path) -> NetworkParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    sep = blob.index(b"\n\n")
    manifest = json.loads(blob[:sep].decode("utf-8"))
    if manifest.get("format") != _MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    tensors = []
    offset = sep + 2
    for shape in manifest["tensor_shapes"]:
        n = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=offset).reshape(shape)
        tensors.append(arr.copy())
        offset += 4 * n
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return NetworkParams(tuple(tuple(l) for l in manifest["arch"]),
                         tuple(manifest["input_shape"]), int(manifest["n_outputs"]),
                         int(manifest["seed"]), tensors)
