"""Config files, overrides, and the effective-config echo.

Config files are TOML with up to three tables, [model], [train], [eval],
whose keys mirror the corresponding dataclass fields. Precedence, lowest
to highest: built-in defaults, config file, repeated `--set key=value`
overrides, dedicated CLI flags. Every run echoes the merged result to
`effective_config.toml` in its output directory, so any run can be
reproduced from its artifacts alone.
"""

from __future__ import annotations

import difflib
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .attention import VARIANTS, TfaSpec
from .errors import ConfigError
from .masks import MASK_KINDS
from .metrics import EvalSpec
from .model import ModelConfig
from .train import TrainConfig

# canonical key order; value is the expected type
_SCHEMA = {
    "model": {
        "num_blocks": int, "d_model": int, "bottleneck": int, "kernel_size": int,
        "max_dilation": int, "variant": str, "attn_kernel_size": int,
        "attn_mid_channels": int, "input_bins": int, "output_bins": int,
    },
    "train": {
        "target": str, "batch_size": int, "lr": float, "adam_beta1": float,
        "adam_beta2": float, "adam_eps": float, "clip_lo": float, "clip_hi": float,
        "epochs": int, "batches_per_epoch": int, "snr_min_db": float,
        "snr_max_db": float, "snr_step_db": float, "val_size": int,
        "utt_min_samples": int, "utt_max_samples": int, "seed": int,
    },
    "eval": {
        "utts_per_condition": int, "utt_samples": int,
    },
}


def default_config() -> dict:
    return {
        "model": {
            "num_blocks": 40, "d_model": 256, "bottleneck": 64, "kernel_size": 3,
            "max_dilation": 16, "variant": "tfa", "attn_kernel_size": 17,
            "attn_mid_channels": 1, "input_bins": 257, "output_bins": 257,
        },
        "train": {
            "target": "irm", "batch_size": 10, "lr": 0.001, "adam_beta1": 0.9,
            "adam_beta2": 0.999, "adam_eps": 1e-8, "clip_lo": -1.0, "clip_hi": 1.0,
            "epochs": 25, "batches_per_epoch": 50, "snr_min_db": -10.0,
            "snr_max_db": 20.0, "snr_step_db": 1.0, "val_size": 100,
            "utt_min_samples": 8000, "utt_max_samples": 8000, "seed": 0,
        },
        "eval": {
            "utts_per_condition": 4, "utt_samples": 8000,
        },
    }


def _all_keys() -> list[str]:
    return [f"{sect}.{key}" for sect, keys in _SCHEMA.items() for key in keys]


def _reject_unknown(dotted: str) -> None:
    near = difflib.get_close_matches(dotted, _all_keys(), n=1)
    hint = f"; did you mean {near[0]!r}?" if near else ""
    raise ConfigError(f"unknown config key {dotted!r}{hint} "
                      f"(valid keys: {', '.join(_all_keys())})")


def _checked(dotted: str, value):
    sect, _, key = dotted.partition(".")
    expected = _SCHEMA.get(sect, {}).get(key)
    if expected is None:
        _reject_unknown(dotted)
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, expected) or isinstance(value, bool):
        raise ConfigError(f"config key {dotted!r} wants {expected.__name__}, "
                          f"got {value!r}")
    return value


def load_config(path=None) -> dict:
    """Defaults merged with an optional TOML file."""
    cfg = default_config()
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}")
    for sect, table in raw.items():
        if sect not in _SCHEMA:
            _reject_unknown(f"{sect}.*")
        if not isinstance(table, dict):
            raise ConfigError(f"{path}: [{sect}] must be a table of keys")
        for key, value in table.items():
            cfg[sect][key] = _checked(f"{sect}.{key}", value)
    return cfg


def parse_set_value(text: str):
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    return text


def apply_overrides(cfg: dict, sets: list[str]) -> dict:
    """`--set section.key=value` pairs, applied in order."""
    for item in sets:
        dotted, sep, raw = item.partition("=")
        if not sep or not dotted:
            raise ConfigError(f"--set wants section.key=value, got {item!r}")
        sect, _, key = dotted.partition(".")
        if sect not in _SCHEMA or key not in _SCHEMA.get(sect, {}):
            _reject_unknown(dotted)
        cfg[sect][key] = _checked(dotted, parse_set_value(raw))
    return cfg


def build(cfg: dict):
    """Effective dict -> (ModelConfig, TrainConfig, EvalSpec)."""
    m, t, e = cfg["model"], cfg["train"], cfg["eval"]
    if m["variant"] not in VARIANTS:
        raise ConfigError(f"model.variant must be one of {VARIANTS}, "
                          f"got {m['variant']!r}")
    if t["target"] not in MASK_KINDS:
        raise ConfigError(f"train.target must be one of {MASK_KINDS}, "
                          f"got {t['target']!r}")
    try:
        attn = TfaSpec(d_model=m["d_model"], kernel_size=m["attn_kernel_size"],
                       mid_channels=m["attn_mid_channels"], variant=m["variant"])
        model_cfg = ModelConfig(
            num_blocks=m["num_blocks"], d_model=m["d_model"],
            bottleneck=m["bottleneck"], kernel_size=m["kernel_size"],
            max_dilation=m["max_dilation"], attn=attn,
            input_bins=m["input_bins"], output_bins=m["output_bins"])
        train_cfg = TrainConfig(**{k: t[k] for k in _SCHEMA["train"]})
        eval_spec = EvalSpec(utts_per_condition=e["utts_per_condition"],
                             utt_samples=e["utt_samples"], seed=t["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    return model_cfg, train_cfg, eval_spec


def _toml_value(value) -> str:
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def effective_toml(cfg: dict) -> str:
    """Canonical serialization: fixed section and key order."""
    lines = []
    for sect, keys in _SCHEMA.items():
        lines.append(f"[{sect}]")
        for key in keys:
            lines.append(f"{key} = {_toml_value(cfg[sect][key])}")
        lines.append("")
    return "\n".join(lines)
