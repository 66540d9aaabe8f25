"""Mask-based speech enhancement with a time-frequency attention module
on a residual dilated-convolution backbone, on a purpose-built
reverse-mode autodiff core. See the README for the CLI and library tour.
"""

__version__ = "0.1.0"

from . import stft
from .attention import AttentionMaps, TfaSpec
from .audio import MixSpec, colored_noise, mix_at_snr, read_wav, synth_clean, write_wav
from .autodiff import Tensor, backward, grad_check, no_grad
from .masks import apply_mask, enhance, irm, psm
from .metrics import EvalSpec, evaluate, seg_snr, si_sdr
from .model import ModelConfig, count_params, init_params, network_forward
from .train import Adam, TrainConfig, train_loop

__all__ = [
    "AttentionMaps", "TfaSpec", "MixSpec", "colored_noise", "mix_at_snr",
    "read_wav", "synth_clean", "write_wav", "Tensor", "backward", "grad_check",
    "no_grad", "apply_mask", "enhance", "irm", "psm", "EvalSpec", "evaluate",
    "seg_snr", "si_sdr", "ModelConfig", "count_params", "init_params",
    "network_forward", "stft", "Adam", "TrainConfig", "train_loop", "__version__",
]
