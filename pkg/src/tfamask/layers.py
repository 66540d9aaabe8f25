"""Differentiable layers used by the mask network.

Each layer is a single fused graph node with a hand-written backward pass;
a forward through the full network stays at a few graph nodes per block,
which keeps the training loop fast enough for the ablation harness.

Convention throughout: activations are time-major [frames, channels].
Convolution weights are [taps, in_channels, out_channels].
"""

from __future__ import annotations

import zlib

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LN_EPS = 1e-8


def _conv_core(x: Tensor, w: Tensor, b: Tensor, dilation: int, left_pad: int) -> Tensor:
    """Shared 1-D convolution: y[l] = b + sum_t w[t] . x[l + t*dilation - left_pad],
    reading zeros outside [0, L)."""
    if x.data.ndim != 2:
        raise ValueError(f"conv1d: input must be [frames, channels], got {x.data.shape}")
    if w.data.ndim != 3:
        raise ValueError(f"conv1d: weight must be [taps, in, out], got {w.data.shape}")
    k, c_in, c_out = w.data.shape
    if x.data.shape[1] != c_in:
        raise ValueError(f"conv1d: input has {x.data.shape[1]} channels, "
                         f"weight expects {c_in}")
    if b.data.shape != (c_out,):
        raise ValueError(f"conv1d: bias shape {b.data.shape} != ({c_out},)")
    if dilation < 1:
        raise ValueError(f"conv1d: dilation must be >= 1, got {dilation}")

    L = x.data.shape[0]
    span = (k - 1) * dilation
    xp = np.zeros((L + span, c_in), dtype=x.data.dtype)
    xp[left_pad:left_pad + L] = x.data

    patches = np.empty((L, k, c_in), dtype=x.data.dtype)
    for t in range(k):
        patches[:, t, :] = xp[t * dilation:t * dilation + L]
    flat = patches.reshape(L, k * c_in)
    wmat = w.data.reshape(k * c_in, c_out)
    y = flat @ wmat + b.data

    def bwd(g):
        ad.accumulate_grad(b, g.sum(axis=0))
        ad.accumulate_grad(w, (flat.T @ g).reshape(k, c_in, c_out))
        if x.requires_grad:
            dflat = (g @ wmat.T).reshape(L, k, c_in)
            dxp = np.zeros_like(xp)
            for t in range(k):
                dxp[t * dilation:t * dilation + L] += dflat[:, t, :]
            ad.accumulate_grad(x, dxp[left_pad:left_pad + L])

    return ad.node(y, (x, w, b), bwd)


def conv1d_causal(x: Tensor, w: Tensor, b: Tensor, dilation: int = 1) -> Tensor:
    """Dilated causal convolution: output frame l sees input frames
    l, l-d, ..., l-(k-1)d only. Tap k-1 multiplies the current frame."""
    k = w.data.shape[0]
    return _conv_core(x, w, b, dilation, left_pad=(k - 1) * dilation)


def conv1d_same(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Zero-padded convolution centred on each position (odd tap count)."""
    k = w.data.shape[0]
    if k % 2 == 0:
        raise ValueError(f"conv1d_same: tap count must be odd, got {k}")
    return _conv_core(x, w, b, dilation=1, left_pad=(k - 1) // 2)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    """Normalize each frame over its channels (biased variance), then scale
    and shift per channel."""
    if x.data.ndim != 2:
        raise ValueError(f"layer_norm: input must be [frames, channels], got {x.data.shape}")
    c = x.data.shape[1]
    if gain.data.shape != (c,) or bias.data.shape != (c,):
        raise ValueError(f"layer_norm: gain/bias {gain.data.shape}/{bias.data.shape} "
                         f"do not match {c} channels")

    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x.data - mu) * inv
    y = gain.data * xhat + bias.data

    def bwd(g):
        ad.accumulate_grad(bias, g.sum(axis=0))
        ad.accumulate_grad(gain, (g * xhat).sum(axis=0))
        if x.requires_grad:
            gh = g * gain.data
            m1 = gh.mean(axis=1, keepdims=True)
            m2 = (gh * xhat).mean(axis=1, keepdims=True)
            ad.accumulate_grad(x, inv * (gh - m1 - xhat * m2))

    return ad.node(y, (x, gain, bias), bwd)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Per-frame linear map with bias: [L, c_in] @ [c_in, c_out] + [c_out]."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ValueError(f"affine: incompatible shapes {x.data.shape} vs {w.data.shape}")
    if b.data.shape != (w.data.shape[1],):
        raise ValueError(f"affine: bias shape {b.data.shape} != ({w.data.shape[1]},)")

    def bwd(g):
        ad.accumulate_grad(b, g.sum(axis=0))
        ad.accumulate_grad(w, x.data.T @ g)
        if x.requires_grad:
            ad.accumulate_grad(x, g @ w.data.T)

    return ad.node(x.data @ w.data + b.data, (x, w, b), bwd)


def param_rng(master_seed: int, name: str) -> np.random.Generator:
    """Generator for one named parameter; the stream depends only on the
    master seed and the name, so shared parameters initialize identically
    across model variants."""
    return np.random.default_rng([master_seed, zlib.crc32(name.encode("utf-8"))])


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int, fan_out: int, dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def conv_params(rng: np.random.Generator, taps: int, c_in: int, c_out: int,
                dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
    w = glorot_uniform(rng, (taps, c_in, c_out), taps * c_in, taps * c_out, dtype)
    return w, np.zeros(c_out, dtype=dtype)


def affine_params(rng: np.random.Generator, c_in: int, c_out: int,
                  dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
    w = glorot_uniform(rng, (c_in, c_out), c_in, c_out, dtype)
    return w, np.zeros(c_out, dtype=dtype)


def layer_norm_params(channels: int, dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
    return np.ones(channels, dtype=dtype), np.zeros(channels, dtype=dtype)
