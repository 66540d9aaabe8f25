"""Objective enhancement metrics and the evaluation grid.

Metrics are waveform-domain: scale-invariant SDR, segmental SNR, and the
mean squared error between magnitude spectra. The evaluation grid crosses
colored-noise slopes with a fixed set of SNR levels, synthesizing a frozen
test set from seeds held out from training and validation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import audio, stft

SI_SDR_CAP_DB = 100.0
SEG_FLOOR_DB = -10.0
SEG_CEIL_DB = 35.0
ACTIVE_FRAME_ENERGY = 1e-8

TEST_STREAM = 303

METRICS = ("si_sdr", "seg_snr", "spectral_mse")


def si_sdr(reference: np.ndarray, estimate: np.ndarray) -> float:
    """Scale-invariant SDR in dB: energy of the projection of the estimate
    onto the reference over the residual energy, capped at +-100 dB."""
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"si_sdr: length mismatch {ref.shape} vs {est.shape}")
    ref_energy = float(ref @ ref)
    if ref_energy <= 0.0:
        raise ValueError("si_sdr: reference is identically zero")
    target = (float(est @ ref) / ref_energy) * ref
    noise = est - target
    t2 = float(target @ target)
    n2 = float(noise @ noise)
    if t2 == 0.0:
        return -SI_SDR_CAP_DB
    if n2 == 0.0 or t2 / n2 >= 10.0 ** (SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    return float(np.clip(10.0 * np.log10(t2 / n2), -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def seg_snr(reference: np.ndarray, estimate: np.ndarray,
            frame: int = stft.FRAME_LEN, hop: int = stft.FRAME_SHIFT,
            floor: float = SEG_FLOOR_DB, ceil: float = SEG_CEIL_DB) -> float:
    """Mean per-frame SNR over frames where the reference carries energy,
    each frame clamped to [floor, ceil] dB."""
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"seg_snr: length mismatch {ref.shape} vs {est.shape}")
    values = []
    for start in range(0, len(ref) - frame + 1, hop):
        r = ref[start:start + frame]
        e = r - est[start:start + frame]
        r2 = float(r @ r)
        if r2 <= ACTIVE_FRAME_ENERGY:
            continue
        e2 = float(e @ e)
        snr = ceil if e2 == 0.0 else 10.0 * np.log10(r2 / e2)
        values.append(float(np.clip(snr, floor, ceil)))
    if not values:
        raise ValueError("seg_snr: no active frames (reference too short or silent)")
    return float(np.mean(values))


def spectral_mse(reference: np.ndarray, estimate: np.ndarray) -> float:
    """Mean squared difference of magnitude spectra."""
    ref_mag = np.abs(stft.stft(reference))
    est_mag = np.abs(stft.stft(estimate))
    return float(np.mean((ref_mag - est_mag) ** 2))


@dataclass(frozen=True)
class EvalSpec:
    """Frozen synthetic test grid: noise slopes x SNR levels."""

    snrs_db: tuple = (-5, 0, 5, 10, 15)
    alphas: tuple = (-2.0, -1.0, 0.0, 1.0, 2.0)
    utts_per_condition: int = 4
    utt_samples: int = 8000
    seed: int = 0


def noise_label(alpha: float) -> str:
    return f"colored_alpha{alpha:+g}"


def test_mixture(spec: EvalSpec, cond_index: int, utt_index: int,
                 alpha: float, snr_db: float):
    """Deterministic test-set item: (clean, noisy, scaled_noise)."""
    rng = np.random.default_rng([spec.seed, TEST_STREAM, cond_index, utt_index])
    kind = audio.CLEAN_KINDS[int(rng.integers(len(audio.CLEAN_KINDS)))]
    clean = audio.synth_clean(kind, spec.utt_samples, int(rng.integers(2 ** 31)))
    noise = audio.colored_noise(alpha, spec.utt_samples, int(rng.integers(2 ** 31)))
    noisy, scaled = audio.mix_at_snr(clean, noise, audio.MixSpec(snr_db=snr_db))
    return clean, noisy, scaled


Enhancer = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def identity_enhancer(noisy, clean, scaled_noise):
    return noisy


def evaluate(enhancer: Enhancer, spec: EvalSpec):
    """Run the grid; returns (report_rows, per_utterance_rows).

    report rows:  (noise_label, snr_db, metric, mean, count)
    detail rows:  (noise_label, snr_db, utt_index, metric, value)
    """
    report = []
    detail = []
    cond_index = 0
    for alpha in spec.alphas:
        for snr_db in spec.snrs_db:
            per_metric = {m: [] for m in METRICS}
            for u in range(spec.utts_per_condition):
                clean, noisy, scaled = test_mixture(spec, cond_index, u, alpha, snr_db)
                est = enhancer(noisy, clean, scaled)
                if len(est) != len(noisy):
                    raise ValueError(f"enhancer changed length {len(noisy)} -> {len(est)}")
                values = {
                    "si_sdr": si_sdr(clean, est),
                    "seg_snr": seg_snr(clean, est),
                    "spectral_mse": spectral_mse(clean, est),
                }
                for m in METRICS:
                    per_metric[m].append(values[m])
                    detail.append((noise_label(alpha), snr_db, u, m, values[m]))
            for m in METRICS:
                report.append((noise_label(alpha), snr_db, m,
                               float(np.mean(per_metric[m])), spec.utts_per_condition))
            cond_index += 1
    return report, detail


def report_csv(rows) -> str:
    lines = ["condition_noise,condition_snr_db,metric,mean,count"]
    for noise, snr_db, metric, mean, count in rows:
        lines.append(f"{noise},{snr_db:g},{metric},{mean!r},{count}")
    return "\n".join(lines) + "\n"


def detail_csv(rows) -> str:
    lines = ["condition_noise,condition_snr_db,utt,metric,value"]
    for noise, snr_db, utt, metric, value in rows:
        lines.append(f"{noise},{snr_db:g},{utt},{metric},{value!r}")
    return "\n".join(lines) + "\n"
