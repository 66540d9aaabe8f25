"""Mask targets and mask-based reconstruction.

Two supervised targets over [frames, bins] spectra:
  ratio mask      sqrt(|S|^2 / (|S|^2 + |D|^2)), in [0, 1]
  phase-sensitive (|S| / |X|) * cos(phase(S) - phase(X)), clamped to [0, 1]
with the all-zero bin (0/0) defined as 0 in both: silent bins stay silent.
Enhancement multiplies the predicted mask into the complex noisy spectrum,
so the noisy phase is retained.
"""

from __future__ import annotations

import numpy as np

from . import stft
from .autodiff import Tensor, no_grad

MASK_KINDS = ("irm", "psm")


def _check_shapes(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def irm(clean_mag: np.ndarray, noise_mag: np.ndarray) -> np.ndarray:
    """Ideal ratio mask from clean and noise magnitudes."""
    _check_shapes(clean_mag, noise_mag, "irm")
    s2 = clean_mag.astype(np.float64) ** 2
    d2 = noise_mag.astype(np.float64) ** 2
    denom = s2 + d2
    out = np.zeros_like(s2)
    np.divide(s2, denom, out=out, where=denom > 0.0)
    return np.sqrt(out)


def psm(clean: np.ndarray, noisy: np.ndarray) -> np.ndarray:
    """Phase-sensitive mask: magnitude ratio times the cosine of the phase
    error, clamped to the sigmoid's output range."""
    _check_shapes(clean, noisy, "psm")
    s = np.asarray(clean, dtype=np.complex128)
    x = np.asarray(noisy, dtype=np.complex128)
    xmag = np.abs(x)
    # |S|/|X| * cos(th_S - th_X) == Re(S * conj(X)) / |X|^2
    num = (s * np.conj(x)).real
    out = np.zeros_like(xmag)
    np.divide(num, xmag ** 2, out=out, where=xmag > 0.0)
    return np.clip(out, 0.0, 1.0)


def mask_target(kind: str, clean_spec: np.ndarray, noise_spec: np.ndarray,
                noisy_spec: np.ndarray) -> np.ndarray:
    if kind == "irm":
        return irm(np.abs(clean_spec), np.abs(noise_spec))
    if kind == "psm":
        return psm(clean_spec, noisy_spec)
    raise ValueError(f"unknown mask kind {kind!r}; expected one of {MASK_KINDS}")


def apply_mask(noisy_spec: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Scale each complex bin by its mask value; phase is untouched."""
    _check_shapes(noisy_spec, mask, "apply_mask")
    return noisy_spec * mask


def enhance(noisy_wave: np.ndarray, cfg, params: dict[str, Tensor],
            sink: list | None = None) -> np.ndarray:
    """Full pipeline: analyze, predict a mask, filter, resynthesize.
    Output has the input's length."""
    from . import model  # deferred: avoid import cycle at package init

    spec = stft.stft(noisy_wave)
    mag = np.abs(spec).astype(np.float32)
    with no_grad():
        mask = model.network_forward(Tensor(mag), cfg, params, sink).data
    return stft.istft(apply_mask(spec, mask.astype(np.float64)), len(noisy_wave))


def oracle_enhance(noisy_wave: np.ndarray, clean_wave: np.ndarray,
                   scaled_noise: np.ndarray, kind: str) -> np.ndarray:
    """Enhance with the true target mask instead of a model prediction
    (upper-bound reference)."""
    spec_x = stft.stft(noisy_wave)
    mask = mask_target(kind, stft.stft(clean_wave), stft.stft(scaled_noise), spec_x)
    return stft.istft(apply_mask(spec_x, mask), len(noisy_wave))
