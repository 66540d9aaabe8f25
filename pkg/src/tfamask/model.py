"""Residual dilated-convolution mask network.

Input magnitudes [frames, bins] are projected to d_model channels, refined
by a stack of pre-activated bottleneck blocks with cyclically dilated
causal convolutions, and mapped to a sigmoid mask of the input shape.
Attention, when enabled, rescales each block's bottleneck branch just
before the residual addition, so the identity path stays untouched.

Parameters live in a flat dict keyed by the checkpoint tensor names; every
tensor's initial value depends only on the master seed and its own name,
which keeps shared weights bit-identical across attention variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import attention
from . import autodiff as ad
from . import layers
from .attention import TfaSpec
from .autodiff import Tensor
from .stft import NUM_BINS


@dataclass(frozen=True)
class ModelConfig:
    num_blocks: int = 40
    d_model: int = 256
    bottleneck: int = 64
    kernel_size: int = 3
    max_dilation: int = 16
    attn: TfaSpec = field(default_factory=lambda: TfaSpec(d_model=256))
    input_bins: int = NUM_BINS
    output_bins: int = NUM_BINS

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ValueError(f"num_blocks must be >= 1, got {self.num_blocks}")
        d = self.max_dilation
        if d < 1 or d & (d - 1):
            raise ValueError(f"max_dilation must be a power of two, got {d}")
        if self.attn.d_model != self.d_model:
            raise ValueError(f"attention d_model {self.attn.d_model} != model "
                             f"d_model {self.d_model}")

    @property
    def dilation_cycle(self) -> int:
        return self.max_dilation.bit_length()

    def with_variant(self, variant: str) -> "ModelConfig":
        return replace(self, attn=replace(self.attn, variant=variant))


def dilation_for_block(b: int, max_dilation: int) -> int:
    """Dilation of block b (1-based): powers of two cycling 1..max_dilation."""
    if b < 1:
        raise ValueError(f"block index must be >= 1, got {b}")
    if max_dilation < 1 or max_dilation & (max_dilation - 1):
        raise ValueError(f"max_dilation must be a power of two, got {max_dilation}")
    return 2 ** ((b - 1) % max_dilation.bit_length())


def _block_shapes(cfg: ModelConfig, b: int) -> dict[str, tuple]:
    dm, df, k = cfg.d_model, cfg.bottleneck, cfg.kernel_size
    p = f"block{b}"
    shapes = {
        f"{p}.unit1.ln.gain": ("ln", dm), f"{p}.unit1.ln.bias": ("ln", dm),
        f"{p}.unit1.conv.W": ("conv", 1, dm, df), f"{p}.unit1.conv.b": ("conv", 1, dm, df),
        f"{p}.unit2.ln.gain": ("ln", df), f"{p}.unit2.ln.bias": ("ln", df),
        f"{p}.unit2.conv.W": ("conv", k, df, df), f"{p}.unit2.conv.b": ("conv", k, df, df),
        f"{p}.unit3.ln.gain": ("ln", df), f"{p}.unit3.ln.bias": ("ln", df),
        f"{p}.unit3.conv.W": ("conv", 1, df, dm), f"{p}.unit3.conv.b": ("conv", 1, df, dm),
    }
    a = cfg.attn
    branches = {"ta": ("ta",), "fa": ("fa",), "tfa": ("ta", "fa")}.get(a.variant, ())
    for branch in branches:
        q = f"{p}.tfa.{branch}"
        shapes[f"{q}.conv1.W"] = ("conv", a.kernel_size, 1, a.mid_channels)
        shapes[f"{q}.conv1.b"] = ("conv", a.kernel_size, 1, a.mid_channels)
        shapes[f"{q}.conv2.W"] = ("conv", a.kernel_size, a.mid_channels, 1)
        shapes[f"{q}.conv2.b"] = ("conv", a.kernel_size, a.mid_channels, 1)
    return shapes


def init_params(cfg: ModelConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """Fresh trainable parameters, keyed by checkpoint tensor name."""
    arrays: dict[str, np.ndarray] = {}

    def put_affine(name: str, c_in: int, c_out: int):
        w, b_ = layers.affine_params(layers.param_rng(seed, name + ".W"), c_in, c_out, dtype)
        arrays[name + ".W"], arrays[name + ".b"] = w, b_

    put_affine("in_proj", cfg.input_bins, cfg.d_model)
    for b in range(1, cfg.num_blocks + 1):
        for name, kind in _block_shapes(cfg, b).items():
            if name.endswith(".b") or name.endswith(".bias"):
                continue
            if kind[0] == "ln":
                gain, bias = layers.layer_norm_params(kind[1], dtype)
                arrays[name] = gain
                arrays[name.replace(".gain", ".bias")] = bias
            else:
                _, taps, c_in, c_out = kind
                w, b_ = layers.conv_params(layers.param_rng(seed, name), taps, c_in, c_out, dtype)
                arrays[name] = w
                arrays[name[:-2] + ".b"] = b_
    gain, bias = layers.layer_norm_params(cfg.d_model, dtype)
    arrays["out.ln.gain"], arrays["out.ln.bias"] = gain, bias
    put_affine("out", cfg.d_model, cfg.output_bins)

    return {name: Tensor(arr, requires_grad=True) for name, arr in arrays.items()}


def _unit(u: Tensor, params: dict, prefix: str, dilation: int) -> Tensor:
    h = layers.layer_norm(u, params[prefix + ".ln.gain"], params[prefix + ".ln.bias"])
    h = ad.relu(h)
    return layers.conv1d_causal(h, params[prefix + ".conv.W"], params[prefix + ".conv.b"],
                                dilation=dilation)


def block_forward(x: Tensor, cfg: ModelConfig, params: dict, b: int,
                  sink: list | None = None) -> Tensor:
    """One pre-activated bottleneck block with residual skip."""
    if x.data.shape[1] != cfg.d_model:
        raise ValueError(f"block input width {x.data.shape[1]} != d_model {cfg.d_model}")
    p = f"block{b}"
    u = _unit(x, params, f"{p}.unit1", 1)
    u = _unit(u, params, f"{p}.unit2", dilation_for_block(b, cfg.max_dilation))
    u = _unit(u, params, f"{p}.unit3", 1)
    if cfg.attn.variant != "off":
        u = attention.apply(u, cfg.attn, params, f"{p}.tfa", sink)
    return ad.add(x, u)


def network_forward(mag: Tensor, cfg: ModelConfig, params: dict,
                    sink: list | None = None) -> Tensor:
    """Magnitudes [L, input_bins] -> mask [L, output_bins], entries in (0, 1)."""
    if mag.data.ndim != 2 or mag.data.shape[1] != cfg.input_bins:
        raise ValueError(f"expected input [frames, {cfg.input_bins}], "
                         f"got {mag.data.shape}")
    h = layers.affine(mag, params["in_proj.W"], params["in_proj.b"])
    for b in range(1, cfg.num_blocks + 1):
        h = block_forward(h, cfg, params, b, sink)
    h = ad.relu(layers.layer_norm(h, params["out.ln.gain"], params["out.ln.bias"]))
    return ad.sigmoid(layers.affine(h, params["out.W"], params["out.b"]))


def count_params(cfg: ModelConfig) -> int:
    """Exact learned-scalar count from the config arithmetic alone."""
    dm, df, k = cfg.d_model, cfg.bottleneck, cfg.kernel_size
    in_proj = cfg.input_bins * dm + dm
    per_block = (2 * dm + 1 * dm * df + df) \
        + (2 * df + k * df * df + df) \
        + (2 * df + 1 * df * dm + dm) \
        + cfg.attn.param_count()
    out = 2 * dm + dm * cfg.output_bins + cfg.output_bins
    return in_proj + cfg.num_blocks * per_block + out


def built_param_count(params: dict[str, Tensor]) -> int:
    return sum(int(t.data.size) for t in params.values())
