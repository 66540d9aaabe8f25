"""Training: on-the-fly mixture synthesis, mask MSE, clipped Adam, epochs.

Everything downstream of the configs is deterministic. Each batch draws
its mixtures from a generator seeded by (seed, stream, epoch, batch), the
validation set from (seed, stream, index), so the data streams are
independent of the model variant; an ablation run can verify that all
variants consumed identical data by comparing batch digests.

Each utterance in a batch is an independent graph (utterance lengths may
differ; nothing is padded). The batch loss is the mean over every mask
entry in the batch, realized by backpropagating per-utterance sums of
squared errors scaled by 1 / total entry count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import audio, masks, model, stft
from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericError

TRAIN_STREAM = 101
VAL_STREAM = 202

ALPHA_GRID = tuple(np.round(np.arange(-2.0, 2.0 + 1e-9, 0.25), 2))


@dataclass(frozen=True)
class TrainConfig:
    target: str = "irm"
    batch_size: int = 10
    lr: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_lo: float = -1.0
    clip_hi: float = 1.0
    epochs: int = 25
    batches_per_epoch: int = 50
    snr_min_db: float = -10.0
    snr_max_db: float = 20.0
    snr_step_db: float = 1.0
    val_size: int = 100
    utt_min_samples: int = 8000
    utt_max_samples: int = 8000
    seed: int = 0

    def __post_init__(self):
        if self.target not in masks.MASK_KINDS:
            raise ValueError(f"target must be one of {masks.MASK_KINDS}, "
                             f"got {self.target!r}")
        if self.batch_size < 1 or self.epochs < 0 or self.batches_per_epoch < 1:
            raise ValueError("batch_size/epochs/batches_per_epoch out of range")
        if self.utt_min_samples > self.utt_max_samples or self.utt_min_samples < stft.FRAME_LEN:
            raise ValueError(f"utterance sample range [{self.utt_min_samples}, "
                             f"{self.utt_max_samples}] invalid (min {stft.FRAME_LEN})")
        if self.snr_step_db <= 0 or self.snr_max_db < self.snr_min_db:
            raise ValueError("SNR range invalid")

    @property
    def snr_levels(self) -> np.ndarray:
        n = int(round((self.snr_max_db - self.snr_min_db) / self.snr_step_db)) + 1
        return self.snr_min_db + self.snr_step_db * np.arange(n)


def draw_mixture(cfg: TrainConfig, rng: np.random.Generator):
    """One synthetic (clean, noisy, scaled_noise, meta) draw."""
    n = int(rng.integers(cfg.utt_min_samples, cfg.utt_max_samples + 1))
    kind = audio.CLEAN_KINDS[int(rng.integers(len(audio.CLEAN_KINDS)))]
    clean_seed = int(rng.integers(2 ** 31))
    alpha = float(ALPHA_GRID[int(rng.integers(len(ALPHA_GRID)))])
    noise_seed = int(rng.integers(2 ** 31))
    levels = cfg.snr_levels
    snr_db = float(levels[int(rng.integers(len(levels)))])

    clean = audio.synth_clean(kind, n, clean_seed)
    noise = audio.colored_noise(alpha, n, noise_seed)
    noisy, scaled = audio.mix_at_snr(clean, noise, audio.MixSpec(snr_db=snr_db))
    meta = (n, kind, clean_seed, alpha, noise_seed, snr_db)
    return clean, noisy, scaled, meta


def _pair_from_mixture(cfg: TrainConfig, clean, noisy, scaled):
    spec_x = stft.stft(noisy)
    mag = np.abs(spec_x).astype(np.float32)
    target = masks.mask_target(cfg.target, stft.stft(clean), stft.stft(scaled),
                               spec_x).astype(np.float32)
    return mag, target


def make_batch(cfg: TrainConfig, rng: np.random.Generator):
    """batch_size training pairs [(noisy_mag, target_mask, meta), ...]."""
    out = []
    for _ in range(cfg.batch_size):
        clean, noisy, scaled, meta = draw_mixture(cfg, rng)
        mag, target = _pair_from_mixture(cfg, clean, noisy, scaled)
        out.append((mag, target, meta))
    return out


def batch_rng(cfg: TrainConfig, epoch: int, batch: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, TRAIN_STREAM, epoch, batch])


def make_val_set(cfg: TrainConfig):
    """Frozen validation pairs; seeds disjoint from the training stream."""
    out = []
    for i in range(cfg.val_size):
        rng = np.random.default_rng([cfg.seed, VAL_STREAM, i])
        clean, noisy, scaled, _ = draw_mixture(cfg, rng)
        out.append(_pair_from_mixture(cfg, clean, noisy, scaled))
    return out


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    if pred.data.shape != target.shape:
        raise ValueError(f"mse_loss: shape mismatch {pred.data.shape} vs {target.shape}")
    return ad.reduce_mean(ad.square(ad.sub(pred, Tensor(target))))


def clip_gradients(params: dict[str, Tensor], lo: float = -1.0, hi: float = 1.0) -> None:
    """Elementwise clamp of every gradient value (not a norm rescale)."""
    for p in params.values():
        if p.grad is not None:
            np.clip(p.grad, lo, hi, out=p.grad)


class Adam:
    """Bias-corrected Adam over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.steps = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        self.steps += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.steps
        c2 = 1.0 - b2 ** self.steps
        for name, p in self.params.items():
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    history: list = field(default_factory=list)  # (epoch, train_mse, val_mse)
    best_epoch: int = -1
    best_val_mse: float = float("inf")
    best_params: dict = field(default_factory=dict)  # name -> ndarray
    batch_digests: list = field(default_factory=list)  # one hex digest per epoch


def epoch_digest(metas) -> str:
    """Digest of every mixture drawn this epoch; equal digests mean equal
    data streams (used to confirm variants saw identical batches)."""
    h = hashlib.sha256()
    for meta in metas:
        h.update(repr(meta).encode())
    return h.hexdigest()


def _val_mse(model_cfg, params, val_set) -> float:
    sse = 0.0
    count = 0
    with ad.no_grad():
        for mag, target in val_set:
            pred = model.network_forward(Tensor(mag), model_cfg, params).data
            sse += float(np.sum((pred - target) ** 2))
            count += target.size
    return sse / count


def train_loop(model_cfg: model.ModelConfig, cfg: TrainConfig,
               params: dict[str, Tensor] | None = None,
               log=None) -> tuple[TrainResult, dict[str, Tensor]]:
    """Run the full schedule; returns (result, final parameters)."""
    if params is None:
        params = model.init_params(model_cfg, cfg.seed)
    opt = Adam(params, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    val_set = make_val_set(cfg)
    result = TrainResult()

    for epoch in range(1, cfg.epochs + 1):
        epoch_sse = 0.0
        epoch_count = 0
        metas = []
        for b in range(cfg.batches_per_epoch):
            batch = make_batch(cfg, batch_rng(cfg, epoch, b))
            metas.extend(meta for _, _, meta in batch)
            total_entries = sum(t.size for _, t, _ in batch)
            opt.zero_grad()
            batch_sse = 0.0
            for mag, target, _ in batch:
                pred = model.network_forward(Tensor(mag), model_cfg, params)
                sse = ad.reduce_sum(ad.square(ad.sub(pred, Tensor(target))))
                batch_sse += float(sse.data)
                ad.backward(ad.scale(sse, 1.0 / total_entries))
            loss = batch_sse / total_entries
            if not np.isfinite(loss):
                raise NumericError(f"loss became non-finite at epoch {epoch} "
                                   f"batch {b + 1}")
            clip_gradients(params, cfg.clip_lo, cfg.clip_hi)
            opt.step()
            epoch_sse += batch_sse
            epoch_count += total_entries

        train_mse = epoch_sse / epoch_count
        val_mse = _val_mse(model_cfg, params, val_set)
        if not np.isfinite(val_mse):
            raise NumericError(f"validation loss became non-finite at epoch {epoch}")
        result.history.append((epoch, train_mse, val_mse))
        result.batch_digests.append(epoch_digest(metas))
        if val_mse < result.best_val_mse:
            result.best_val_mse = val_mse
            result.best_epoch = epoch
            result.best_params = {k: p.data.copy() for k, p in params.items()}
        if log is not None:
            log(f"epoch {epoch:3d}  train_mse {train_mse:.6f}  val_mse {val_mse:.6f}")

    if not result.best_params and params:
        result.best_params = {k: p.data.copy() for k, p in params.items()}
    return result, params


def history_csv(history) -> str:
    lines = ["epoch,train_mse,val_mse"]
    for epoch, train_mse, val_mse in history:
        lines.append(f"{epoch},{float(train_mse)!r},{float(val_mse)!r}")
    return "\n".join(lines) + "\n"
