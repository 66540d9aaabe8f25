"""TOML configuration handling and the command-line surface.

CLI commands are exercised through cli.main() with real artifact
directories under tmp_path; the micro config keeps each run under a
second or two.
"""

import pytest

from tfamask import audio
from tfamask import checkpoint
from tfamask import cli
from tfamask import config
from tfamask import model
from tfamask.attention import TfaSpec
from tfamask.errors import ConfigError

MICRO_TOML = """\
[model]
num_blocks = 2
d_model = 8
bottleneck = 4
kernel_size = 3
max_dilation = 2
attn_kernel_size = 3

[train]
batch_size = 2
epochs = 2
batches_per_epoch = 2
val_size = 2
utt_min_samples = 2000
utt_max_samples = 2000

[eval]
utts_per_condition = 1
utt_samples = 2000
"""


@pytest.fixture
def micro_config(tmp_path):
    path = tmp_path / "micro.toml"
    path.write_text(MICRO_TOML)
    return path


@pytest.fixture
def noisy_wav(tmp_path):
    clean = audio.synth_clean("harmonic", 4000, seed=1)
    noise = audio.colored_noise(0.0, 4000, seed=2)
    noisy, _ = audio.mix_at_snr(clean, noise, audio.MixSpec(snr_db=5.0))
    clean_path = tmp_path / "clean.wav"
    noisy_path = tmp_path / "noisy.wav"
    audio.write_wav(clean, clean_path)
    audio.write_wav(noisy, noisy_path)
    return noisy_path, clean_path


class TestConfig:
    def test_defaults_build(self):
        model_cfg, train_cfg, eval_spec = config.build(config.default_config())
        assert model_cfg.num_blocks == 40
        assert train_cfg.epochs == 25
        assert eval_spec.utts_per_condition == 4

    def test_file_merges_over_defaults(self, micro_config):
        cfg = config.load_config(micro_config)
        assert cfg["model"]["num_blocks"] == 2
        assert cfg["model"]["kernel_size"] == 3
        assert cfg["train"]["lr"] == 0.001  # untouched default

    def test_unknown_key_suggests(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[model]\nd_modle = 8\n")
        with pytest.raises(ConfigError, match="did you mean 'model.d_model'"):
            config.load_config(bad)

    def test_unknown_section(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[optimizer]\nlr = 0.1\n")
        with pytest.raises(ConfigError, match="unknown config key"):
            config.load_config(bad)

    def test_type_errors(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('[train]\nepochs = "ten"\n')
        with pytest.raises(ConfigError, match="wants int"):
            config.load_config(bad)
        bad.write_text("[train]\nlr = true\n")
        with pytest.raises(ConfigError, match="wants float"):
            config.load_config(bad)

    def test_int_promotes_to_float(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[train]\nlr = 1\n")
        cfg = config.load_config(p)
        assert cfg["train"]["lr"] == 1.0
        assert isinstance(cfg["train"]["lr"], float)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            config.load_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[model\n")
        with pytest.raises(ConfigError, match="not valid TOML"):
            config.load_config(p)

    def test_overrides_and_value_parsing(self):
        cfg = config.default_config()
        cfg = config.apply_overrides(cfg, ["train.epochs=3", "model.variant=fa",
                                           "train.lr=0.01"])
        assert cfg["train"]["epochs"] == 3
        assert cfg["model"]["variant"] == "fa"
        assert cfg["train"]["lr"] == 0.01
        with pytest.raises(ConfigError, match="section.key=value"):
            config.apply_overrides(cfg, ["no-equals-sign"])
        with pytest.raises(ConfigError, match="did you mean 'train.epochs'"):
            config.apply_overrides(cfg, ["epochs=3"])
        with pytest.raises(ConfigError, match="unknown config key"):
            config.apply_overrides(cfg, ["train.epoch=3"])

    def test_build_validates_enums(self):
        cfg = config.default_config()
        cfg["model"]["variant"] = "dual"
        with pytest.raises(ConfigError, match="variant"):
            config.build(cfg)
        cfg = config.default_config()
        cfg["train"]["target"] = "ibm"
        with pytest.raises(ConfigError, match="target"):
            config.build(cfg)

    def test_build_wraps_model_errors(self):
        cfg = config.default_config()
        cfg["model"]["max_dilation"] = 12
        with pytest.raises(ConfigError, match="power of two"):
            config.build(cfg)

    def test_effective_toml_roundtrips(self, tmp_path):
        cfg = config.default_config()
        cfg["train"]["lr"] = 0.0005
        text = config.effective_toml(cfg)
        p = tmp_path / "eff.toml"
        p.write_text(text)
        assert config.load_config(p) == cfg

    def test_attention_fields_reach_model(self):
        cfg = config.default_config()
        cfg["model"]["attn_kernel_size"] = 5
        cfg["model"]["attn_mid_channels"] = 2
        model_cfg, _, _ = config.build(cfg)
        assert model_cfg.attn.kernel_size == 5
        assert model_cfg.attn.mid_channels == 2


class TestCliErrors:
    def test_no_command_usage_exits_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 1

    def test_bad_set_exits_1(self, micro_config, tmp_path):
        rc = cli.main(["train", "--config", str(micro_config),
                       "--out", str(tmp_path / "o"), "--set", "nonsense"])
        assert rc == 1

    def test_unknown_key_exits_1(self, micro_config, tmp_path, capsys):
        rc = cli.main(["train", "--config", str(micro_config),
                       "--out", str(tmp_path / "o"), "--set", "train.epoch=1"])
        assert rc == 1
        assert "did you mean" in capsys.readouterr().err

    def test_missing_wav_exits_2(self, tmp_path):
        rc = cli.main(["enhance", str(tmp_path / "absent.wav"),
                       str(tmp_path / "out.wav"), "--oracle", "irm",
                       "--clean", str(tmp_path / "absent2.wav")])
        assert rc == 2

    def test_enhance_needs_exactly_one_source(self, noisy_wav, tmp_path, capsys):
        noisy, clean = noisy_wav
        rc = cli.main(["enhance", str(noisy), str(tmp_path / "o.wav")])
        assert rc == 1
        rc = cli.main(["enhance", str(noisy), str(tmp_path / "o.wav"),
                       "--oracle", "irm"])  # oracle without clean
        assert rc == 1

    def test_mismatched_checkpoint_exits_2(self, micro_config, noisy_wav,
                                           tmp_path, capsys):
        # checkpoint holds a different architecture; first mismatching
        # tensor must be named
        other = model.ModelConfig(num_blocks=1, d_model=4, bottleneck=2,
                                  kernel_size=3, max_dilation=1,
                                  attn=TfaSpec(d_model=4, kernel_size=3))
        ckpt = tmp_path / "other.ckpt"
        checkpoint.save_checkpoint(model.init_params(other, 0), ckpt)
        noisy, _ = noisy_wav
        rc = cli.main(["enhance", str(noisy), str(tmp_path / "o.wav"),
                       "--config", str(micro_config), "--ckpt", str(ckpt)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "in_proj.W" in err


class TestCliTrain:
    def test_artifacts_and_determinism(self, micro_config, tmp_path, capsys):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert cli.main(["train", "--config", str(micro_config),
                         "--out", str(out1)]) == 0
        assert cli.main(["train", "--config", str(micro_config),
                         "--out", str(out2)]) == 0
        for name in ("history.csv", "batch_digests.txt", "best.ckpt",
                     "last.ckpt", "effective_config.toml", "history.png"):
            assert (out1 / name).exists(), name
        assert (out1 / "history.csv").read_text() == (out2 / "history.csv").read_text()
        assert (out1 / "best.ckpt").read_bytes() == (out2 / "best.ckpt").read_bytes()
        history = (out1 / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,train_mse,val_mse"
        assert len(history) == 3  # header + 2 epochs
        digests = (out1 / "batch_digests.txt").read_text().splitlines()
        assert len(digests) == 2 and digests[0].startswith("1,")

    def test_seed_flag_changes_stream(self, micro_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.main(["train", "--config", str(micro_config), "--out", str(out1)])
        cli.main(["train", "--config", str(micro_config), "--out", str(out2),
                  "--seed", "5"])
        assert (out1 / "batch_digests.txt").read_text() \
            != (out2 / "batch_digests.txt").read_text()

    def test_variant_flag_recorded(self, micro_config, tmp_path):
        out = tmp_path / "v"
        cli.main(["train", "--config", str(micro_config), "--out", str(out),
                  "--variant", "fa"])
        assert 'variant = "fa"' in (out / "effective_config.toml").read_text()


class TestCliEnhance:
    def test_model_path_with_attention_dump(self, micro_config, noisy_wav, tmp_path):
        out = tmp_path / "run"
        cli.main(["train", "--config", str(micro_config), "--out", str(out)])
        noisy, _ = noisy_wav
        enhanced = tmp_path / "enh.wav"
        rc = cli.main(["enhance", str(noisy), str(enhanced),
                       "--config", str(micro_config),
                       "--ckpt", str(out / "best.ckpt"),
                       "--dump-attention", "--out", str(tmp_path / "maps")])
        assert rc == 0
        est = audio.read_wav(enhanced)
        assert len(est) == len(audio.read_wav(noisy))
        block1 = (tmp_path / "maps" / "attention_block1.csv").read_text().splitlines()
        frames = (4000 + 255) // 256
        assert len(block1) == 1 + frames
        assert block1[0].split(",")[:2] == ["frame", "t_map"]
        assert len(block1[1].split(",")) == 2 + 8  # frame, t_map, d_model cols
        fmaps = (tmp_path / "maps" / "attention_fmaps.csv").read_text().splitlines()
        assert len(fmaps) == 1 + 2  # header + num_blocks
        assert (tmp_path / "maps" / "attention.png").exists()

    def test_dump_rejected_for_variant_off(self, micro_config, noisy_wav, tmp_path):
        out = tmp_path / "run"
        cli.main(["train", "--config", str(micro_config), "--out", str(out),
                  "--variant", "off"])
        noisy, _ = noisy_wav
        rc = cli.main(["enhance", str(noisy), str(tmp_path / "e.wav"),
                       "--config", str(micro_config), "--variant", "off",
                       "--ckpt", str(out / "best.ckpt"), "--dump-attention"])
        assert rc == 1

    def test_oracle_path_improves_si_sdr(self, noisy_wav, tmp_path):
        noisy_path, clean_path = noisy_wav
        enhanced = tmp_path / "oracle.wav"
        rc = cli.main(["enhance", str(noisy_path), str(enhanced),
                       "--oracle", "irm", "--clean", str(clean_path)])
        assert rc == 0
        from tfamask import metrics
        clean = audio.read_wav(clean_path)
        noisy = audio.read_wav(noisy_path)
        est = audio.read_wav(enhanced)
        assert metrics.si_sdr(clean, est) > metrics.si_sdr(clean, noisy)


class TestCliEvaluate:
    def test_noisy_baseline_report(self, micro_config, tmp_path, capsys):
        out = tmp_path / "ev"
        rc = cli.main(["evaluate", "--config", str(micro_config),
                       "--out", str(out)])
        assert rc == 0
        report = (out / "report.csv").read_text().splitlines()
        assert report[0] == "condition_noise,condition_snr_db,metric,mean,count"
        # 5 alphas x 5 snrs x 3 metrics
        assert len(report) == 1 + 75
        assert (out / "detail.csv").exists()
        assert (out / "report.png").exists()

    def test_model_report_includes_baseline(self, micro_config, tmp_path):
        run = tmp_path / "run"
        cli.main(["train", "--config", str(micro_config), "--out", str(run)])
        out = tmp_path / "ev"
        rc = cli.main(["evaluate", "--config", str(micro_config),
                       "--out", str(out), "--ckpt", str(run / "best.ckpt")])
        assert rc == 0
        assert (out / "report.csv").exists()
        assert (out / "report_noisy.csv").exists()
        text = (out / "report.csv").read_text()
        base = (out / "report_noisy.csv").read_text()
        assert text != base


class TestCliAblate:
    def test_micro_ablation_artifacts(self, micro_config, tmp_path):
        out = tmp_path / "abl"
        rc = cli.main(["ablate", "--config", str(micro_config),
                       "--out", str(out)])
        assert rc == 0
        for variant in ("off", "ta", "fa", "tfa"):
            vdir = out / f"variant_{variant}"
            assert (vdir / "history.csv").exists()
            assert (vdir / "best.ckpt").exists()
        hist = (out / "ablation_history.csv").read_text().splitlines()
        assert hist[0] == "variant,epoch,train_mse,val_mse"
        assert len(hist) == 1 + 4 * 2  # 4 variants x 2 epochs
        ev = (out / "ablation_eval.csv").read_text().splitlines()
        assert ev[0] == "variant,condition_noise,condition_snr_db,metric,mean,count"
        assert len(ev) == 1 + 4 * 75
        assert (out / "ablation_history.png").exists()
        assert (out / "ablation_eval.png").exists()


class TestCliGradcheck:
    def test_passes_cleanly(self, capsys):
        rc = cli.main(["gradcheck", "--seed", "0", "--draws", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_injected_defect_detected(self, capsys):
        rc = cli.main(["gradcheck", "--draws", "1", "--inject-broken"])
        assert rc == 3
        assert "FAIL" in capsys.readouterr().out
