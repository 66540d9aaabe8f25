"""Frame-based spectral analysis and synthesis.

Square-root-Hann windows (512 samples, hop 256, i.e. 32 ms / 16 ms at
16 kHz) for both analysis and synthesis. The squared window is a periodic
Hann, which sums to exactly 1 at 50% overlap, so overlap-add inverts the
transform exactly away from the edges. Spectra are L x 257 arrays covering
DC through Nyquist. All functions are pure.
"""

from __future__ import annotations

import numpy as np

FRAME_LEN = 512
FRAME_SHIFT = 256
NUM_BINS = FRAME_LEN // 2 + 1


def sqrt_hann_window(length: int = FRAME_LEN) -> np.ndarray:
    """Square root of the periodic (DFT-even) Hann window."""
    n = np.arange(length)
    return np.sqrt(0.5 * (1.0 - np.cos(2.0 * np.pi * n / length)))


_WINDOW = sqrt_hann_window()


def num_frames(n_samples: int) -> int:
    return -(-n_samples // FRAME_SHIFT)


def stft(samples: np.ndarray) -> np.ndarray:
    """Forward transform to the single-sided complex spectrum.

    The input is zero-padded at the tail to complete the final frame;
    there is no centering pre-pad, so framing is causal. Returns a complex
    L x 257 array with L = ceil(len / 256).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"expected a non-empty 1-D sample array, got shape {x.shape}")
    frames = num_frames(x.size)
    padded = np.zeros((frames - 1) * FRAME_SHIFT + FRAME_LEN)
    padded[:x.size] = x
    offsets = np.arange(frames)[:, None] * FRAME_SHIFT + np.arange(FRAME_LEN)[None, :]
    return np.fft.rfft(padded[offsets] * _WINDOW, axis=1)


def istft(spectrum: np.ndarray, out_len: int) -> np.ndarray:
    """Inverse transform by windowed overlap-add, truncated to out_len."""
    spec = np.asarray(spectrum)
    if spec.ndim != 2 or spec.shape[1] != NUM_BINS:
        raise ValueError(f"expected an L x {NUM_BINS} spectrum, got shape {spec.shape}")
    frames = spec.shape[0]
    total = frames * FRAME_SHIFT + FRAME_SHIFT
    if not 0 <= out_len <= total:
        raise ValueError(f"out_len {out_len} outside [0, {total}] "
                         f"for {frames} frames")
    synth = np.fft.irfft(spec, FRAME_LEN, axis=1) * _WINDOW
    out = np.zeros(total)
    for l in range(frames):
        out[l * FRAME_SHIFT:l * FRAME_SHIFT + FRAME_LEN] += synth[l]
    return out[:out_len]


def mag_phase(spectrum: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise modulus and argument; the phase of a zero bin is 0."""
    spec = np.asarray(spectrum)
    magnitude = np.abs(spec)
    phase = np.where(magnitude > 0.0, np.angle(spec), 0.0)
    return magnitude, phase
