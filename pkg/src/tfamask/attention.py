"""Time-frequency attention over a [frames, channels] feature grid.

Both branches squeeze the grid to a 1-D profile by global average pooling,
push it through a two-conv bottleneck (1 -> mid -> 1 channels, centred
taps), and squash with a sigmoid. The time profile scales frames, the
frequency profile scales channels, and the combined variant applies their
rank-1 outer product. Every attention value lies strictly in (0, 1), so
the module can only attenuate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import layers
from .autodiff import Tensor

VARIANTS = ("off", "ta", "fa", "tfa")


@dataclass(frozen=True)
class TfaSpec:
    """Shape and wiring of one attention instance."""

    d_model: int
    kernel_size: int = 17
    mid_channels: int = 1
    variant: str = "tfa"

    def __post_init__(self):
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ValueError(f"attention kernel_size must be odd and positive, "
                             f"got {self.kernel_size}")
        if self.mid_channels < 1:
            raise ValueError(f"mid_channels must be >= 1, got {self.mid_channels}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown attention variant {self.variant!r}; "
                             f"expected one of {VARIANTS}")

    def branch_param_count(self) -> int:
        k, m = self.kernel_size, self.mid_channels
        return (k * m + m) + (k * m + 1)

    def param_count(self) -> int:
        """Learned scalars the active variant adds to one block."""
        if self.variant == "off":
            return 0
        if self.variant in ("ta", "fa"):
            return self.branch_param_count()
        return 2 * self.branch_param_count()


@dataclass
class AttentionMaps:
    """Detached maps from one apply() call, for export and inspection."""

    t_map: np.ndarray  # [L, 1]
    f_map: np.ndarray  # [1, d_model]
    tf_map: np.ndarray  # [L, d_model]


def _branch_stack(profile: Tensor, params: dict, prefix: str) -> Tensor:
    """conv -> ReLU -> conv -> sigmoid along a [length, 1] profile."""
    h = layers.conv1d_same(profile, params[prefix + ".conv1.W"], params[prefix + ".conv1.b"])
    h = ad.relu(h)
    h = layers.conv1d_same(h, params[prefix + ".conv2.W"], params[prefix + ".conv2.b"])
    return ad.sigmoid(h)


def ta_branch(y: Tensor, params: dict, prefix: str) -> Tensor:
    """Per-frame attention: pool over channels, then convolve along time.
    Returns [L, 1] values in (0, 1)."""
    z = ad.mean_over_axis(y, axis=1)
    return _branch_stack(z, params, prefix + ".ta")


def fa_branch(y: Tensor, params: dict, prefix: str) -> Tensor:
    """Per-channel attention: pool over frames, then convolve along the
    channel axis. Returns [1, d_model] values in (0, 1)."""
    d = y.data.shape[1]
    z = ad.reshape(ad.mean_over_axis(y, axis=0), (d, 1))
    f = _branch_stack(z, params, prefix + ".fa")
    return ad.reshape(f, (1, d))


def combine(t_map: Tensor, f_map: Tensor) -> Tensor:
    """Rank-1 outer product: tf[l, k] = t[l] * f[k]."""
    if t_map.data.ndim != 2 or t_map.data.shape[1] != 1:
        raise ValueError(f"combine: t_map must be [L, 1], got {t_map.data.shape}")
    if f_map.data.ndim != 2 or f_map.data.shape[0] != 1:
        raise ValueError(f"combine: f_map must be [1, d], got {f_map.data.shape}")
    return ad.matmul(t_map, f_map)


def apply(y: Tensor, spec: TfaSpec, params: dict, prefix: str,
          sink: list | None = None) -> Tensor:
    """Scale the feature grid by the variant's attention map; `off` is the
    identity. When `sink` is given, the detached maps are appended to it
    (missing branch filled with ones)."""
    L, d = y.data.shape
    if spec.variant == "off":
        return y
    if spec.variant == "ta":
        t = ta_branch(y, params, prefix)
        out = ad.mul(y, ad.broadcast_to(t, (L, d)))
        t_np, f_np = t.data.copy(), np.ones((1, d), dtype=y.data.dtype)
    elif spec.variant == "fa":
        f = fa_branch(y, params, prefix)
        out = ad.mul(y, ad.broadcast_to(f, (L, d)))
        t_np, f_np = np.ones((L, 1), dtype=y.data.dtype), f.data.copy()
    elif spec.variant == "tfa":
        t = ta_branch(y, params, prefix)
        f = fa_branch(y, params, prefix)
        out = ad.mul(y, combine(t, f))
        t_np, f_np = t.data.copy(), f.data.copy()
    else:
        raise ValueError(f"unknown attention variant {spec.variant!r}")
    if sink is not None:
        sink.append(AttentionMaps(t_map=t_np, f_map=f_np, tf_map=t_np * f_np))
    return out
