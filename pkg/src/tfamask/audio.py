"""WAV file I/O, deterministic test-signal synthesis, and SNR mixing.

All waveforms are mono float64 numpy arrays at a fixed 16 kHz sample rate,
with linear amplitude in [-1, 1] for file I/O. Every generator is a pure
function of its arguments (including the seed), so the functions here are
safe to call concurrently; nothing in this module keeps mutable state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

SAMPLE_RATE = 16000

_PCM16_SCALE = 32768.0
_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3

CLEAN_KINDS = ("harmonic", "chirp", "am_tone")


@dataclass(frozen=True)
class MixSpec:
    """How a clean signal and a noise recording are combined.

    snr_db: target signal-to-noise ratio in decibels.
    noise_offset: index of the first noise sample used.
    seed: seed that produced this pairing (bookkeeping only; mixing itself
        is deterministic given the inputs).
    """

    snr_db: float
    noise_offset: int = 0
    seed: int = 0


def read_wav(path) -> np.ndarray:
    """Read a mono 16 kHz RIFF/WAVE file as float64 samples in [-1, 1].

    Accepts 16-bit integer PCM (scaled by 1/32768) and 32-bit IEEE float
    (passed through). Anything else is rejected with a descriptive error.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise DataError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise DataError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise DataError(f"{path}: truncated data chunk "
                                f"(expected {chunk_size} bytes, got {len(body)})")
            data = body
        # chunks are word-aligned
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise DataError(f"{path}: missing fmt chunk")
    if data is None:
        raise DataError(f"{path}: missing data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if channels != 1:
        raise DataError(f"{path}: unsupported channel count {channels} (mono only)")
    if sample_rate != SAMPLE_RATE:
        raise DataError(f"{path}: unsupported sample rate {sample_rate} Hz "
                        f"(expected {SAMPLE_RATE})")
    if audio_format == _FMT_PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / _PCM16_SCALE
    elif audio_format == _FMT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise DataError(f"{path}: unsupported encoding "
                        f"(format tag {audio_format}, {bits} bits); "
                        f"use 16-bit PCM or 32-bit float")
    if samples.size and not np.all(np.isfinite(samples)):
        raise DataError(f"{path}: non-finite sample values")
    return samples


def write_wav(samples: np.ndarray, path) -> None:
    """Write samples as a mono 16 kHz 16-bit PCM WAV file.

    Values are clamped to [-1, 1 - 2**-15] before quantization, so a
    read-back differs from the input by at most one quantization step.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D sample array, got shape {x.shape}")
    if x.size and not np.all(np.isfinite(x)):
        raise ValueError("cannot write non-finite sample values")
    clipped = np.clip(x, -1.0, 1.0 - 2.0 ** -15)
    pcm = np.rint(clipped * _PCM16_SCALE).astype("<i2")
    body = pcm.tobytes()

    header = b"".join([
        b"RIFF",
        struct.pack("<I", 36 + len(body)),
        b"WAVE",
        b"fmt ",
        struct.pack("<IHHIIHH", 16, _FMT_PCM, 1, SAMPLE_RATE,
                    SAMPLE_RATE * 2, 2, 16),
        b"data",
        struct.pack("<I", len(body)),
    ])
    try:
        Path(path).write_bytes(header + body)
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc


def colored_noise(alpha: float, n: int, seed: int) -> np.ndarray:
    """Unit-RMS noise whose power spectral density follows f**alpha.

    White Gaussian noise is shaped in the frequency domain: the magnitude
    of bin k is scaled by k**(alpha/2) and the DC bin is zeroed, then the
    spectrum is inverse-transformed and normalized to unit RMS.
    """
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    rng = np.random.default_rng(seed)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    gain = np.zeros(spectrum.size)
    k = np.arange(1, spectrum.size, dtype=np.float64)
    gain[1:] = k ** (alpha / 2.0)
    x = np.fft.irfft(spectrum * gain, n)
    return x / np.sqrt(np.mean(x ** 2))


def synth_clean(kind: str, n: int, seed: int, f0: float | None = None) -> np.ndarray:
    """Deterministic unit-RMS test signal with time-varying spectral structure.

    kind:
        "harmonic" - stack of partials over a (by default) slowly modulated
            fundamental; pass f0 to pin the fundamental to a fixed frequency.
        "chirp"    - linear frequency sweep.
        "am_tone"  - amplitude-modulated sinusoid.
    """
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    if kind not in CLEAN_KINDS:
        raise ValueError(f"unknown clean-signal kind {kind!r}; "
                         f"choose from {CLEAN_KINDS}")
    rng = np.random.default_rng(seed)
    t = np.arange(n) / SAMPLE_RATE

    if kind == "harmonic":
        if f0 is None:
            base = rng.uniform(120.0, 280.0)
            vib_rate = rng.uniform(3.0, 7.0)
            vib_phase = rng.uniform(0.0, 2 * np.pi)
            f0_track = base * (1.0 + 0.02 * np.sin(2 * np.pi * vib_rate * t + vib_phase))
        else:
            base = float(f0)
            f0_track = np.full(n, base)
        # integrated instantaneous frequency keeps partials phase-coherent
        cycles = np.cumsum(f0_track) / SAMPLE_RATE
        x = np.zeros(n)
        for h in range(1, 11):
            if h * base * 1.03 >= SAMPLE_RATE / 2:
                break
            x += np.sin(2 * np.pi * h * cycles + rng.uniform(0.0, 2 * np.pi)) / h
        env_rate = rng.uniform(1.5, 4.0)
        env_phase = rng.uniform(0.0, 2 * np.pi)
        x *= 1.0 + 0.4 * np.sin(2 * np.pi * env_rate * t + env_phase)
    elif kind == "chirp":
        f_start = rng.uniform(100.0, 1000.0)
        f_end = rng.uniform(1000.0, 4000.0)
        duration = n / SAMPLE_RATE
        phase = 2 * np.pi * (f_start * t + (f_end - f_start) * t ** 2 / (2 * duration))
        x = np.sin(phase + rng.uniform(0.0, 2 * np.pi))
    else:  # am_tone
        carrier = rng.uniform(300.0, 3000.0)
        rate = rng.uniform(2.0, 8.0)
        depth = rng.uniform(0.5, 0.9)
        x = (1.0 + depth * np.sin(2 * np.pi * rate * t)) \
            * np.sin(2 * np.pi * carrier * t + rng.uniform(0.0, 2 * np.pi))

    return x / np.sqrt(np.mean(x ** 2))


def mix_at_snr(clean: np.ndarray, noise: np.ndarray,
               spec: MixSpec) -> tuple[np.ndarray, np.ndarray]:
    """Mix clean speech with a noise segment at an exact SNR.

    The noise segment starting at spec.noise_offset is scaled so that
    10*log10(sum(clean**2) / sum(scaled**2)) equals spec.snr_db exactly.
    Returns (noisy, scaled_noise); the scaled noise is what training
    targets must be computed from.
    """
    clean = np.asarray(clean, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    offset = int(spec.noise_offset)
    if offset < 0:
        raise ValueError(f"noise offset must be non-negative, got {offset}")
    if noise.size < clean.size + offset:
        raise ValueError(f"noise too short: need {clean.size + offset} samples "
                         f"from offset {offset}, have {noise.size}")
    segment = noise[offset:offset + clean.size]
    clean_energy = float(np.sum(clean ** 2))
    segment_energy = float(np.sum(segment ** 2))
    if clean_energy == 0.0 or segment_energy == 0.0:
        raise ValueError("SNR undefined: clean or noise segment is all zero")
    gain = np.sqrt(clean_energy / segment_energy * 10.0 ** (-spec.snr_db / 10.0))
    scaled = gain * segment
    return clean + scaled, scaled


def snr_between(clean: np.ndarray, noise: np.ndarray) -> float:
    """Measured SNR in dB between a clean signal and a noise signal."""
    clean_energy = float(np.sum(np.asarray(clean, dtype=np.float64) ** 2))
    noise_energy = float(np.sum(np.asarray(noise, dtype=np.float64) ** 2))
    if clean_energy == 0.0 or noise_energy == 0.0:
        raise ValueError("SNR undefined for an all-zero signal")
    return 10.0 * np.log10(clean_energy / noise_energy)
