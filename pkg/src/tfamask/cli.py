"""Command-line surface: train, enhance, evaluate, ablate, gradcheck.

Exit codes: 0 success, 1 usage/config error, 2 data error (files,
checkpoints), 3 numeric failure (non-finite loss, failed gradient check).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import attention, audio, checkpoint, config, gradcheck, masks, metrics, model, plots, train
from .autodiff import Tensor
from .errors import ConfigError, DataError, NumericError, TfaMaskError


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sp, out_default):
    sp.add_argument("--config", metavar="PATH", help="TOML config file")
    sp.add_argument("--seed", type=int, metavar="N", help="override train.seed")
    sp.add_argument("--out", metavar="DIR", default=out_default,
                    help=f"output directory (default {out_default})")
    sp.add_argument("--set", action="append", default=[], metavar="key=value",
                    help="override one config key, repeatable (e.g. train.lr=0.01)")
    sp.add_argument("--target", choices=masks.MASK_KINDS, help="override train.target")
    sp.add_argument("--variant", choices=attention.VARIANTS,
                    help="override model.variant")


def build_parser() -> _Parser:
    p = _Parser(prog="tfamask",
                description="Mask-based speech enhancement with time-frequency "
                            "attention: training, inference, ablation, checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train one model")
    _add_common(t, "runs/train")

    e = sub.add_parser("enhance", help="denoise a WAV file")
    e.add_argument("input", help="noisy input WAV (16 kHz mono)")
    e.add_argument("output", help="enhanced output WAV")
    e.add_argument("--ckpt", metavar="PATH", help="trained checkpoint")
    e.add_argument("--oracle", choices=masks.MASK_KINDS,
                   help="bypass the model; apply the true target mask")
    e.add_argument("--clean", metavar="PATH", help="clean reference WAV (oracle mode)")
    e.add_argument("--dump-attention", action="store_true",
                   help="export per-block attention maps as CSV + figure")
    _add_common(e, None)

    v = sub.add_parser("evaluate", help="run the synthetic test grid")
    v.add_argument("--ckpt", metavar="PATH", help="trained checkpoint")
    v.add_argument("--oracle", choices=masks.MASK_KINDS,
                   help="evaluate the true target mask instead of a model")
    _add_common(v, "runs/eval")

    a = sub.add_parser("ablate", help="train and compare all attention variants")
    _add_common(a, "runs/ablate")

    g = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--draws", type=int, default=20, help="random draws per case")
    g.add_argument("--inject-broken", action="store_true", help=argparse.SUPPRESS)
    return p


def _effective_config(args) -> dict:
    cfg = config.load_config(args.config)
    config.apply_overrides(cfg, args.set)
    if getattr(args, "seed", None) is not None:
        cfg["train"]["seed"] = args.seed
    if getattr(args, "target", None) is not None:
        cfg["train"]["target"] = args.target
    if getattr(args, "variant", None) is not None:
        cfg["model"]["variant"] = args.variant
    return cfg


def _prepare_out(args, cfg: dict) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.toml").write_text(config.effective_toml(cfg))
    return out


def _load_model(cfg_dict: dict, ckpt_path) -> tuple:
    model_cfg, train_cfg, _ = config.build(cfg_dict)
    params = model.init_params(model_cfg, train_cfg.seed)
    checkpoint.load_into(params, ckpt_path)
    return model_cfg, params


def _write_variant_artifacts(out: Path, result, params) -> None:
    (out / "history.csv").write_text(train.history_csv(result.history))
    (out / "batch_digests.txt").write_text(
        "".join(f"{i + 1},{d}\n" for i, d in enumerate(result.batch_digests)))
    checkpoint.save_checkpoint(result.best_params, out / "best.ckpt")
    checkpoint.save_checkpoint(params, out / "last.ckpt")


def cmd_train(args) -> int:
    cfg = _effective_config(args)
    out = _prepare_out(args, cfg)
    model_cfg, train_cfg, _ = config.build(cfg)
    print(f"training variant={model_cfg.attn.variant} target={train_cfg.target} "
          f"seed={train_cfg.seed} -> {out}")
    result, params = train.train_loop(model_cfg, train_cfg, log=print)
    _write_variant_artifacts(out, result, params)
    plots.save_history_plot({model_cfg.attn.variant: result.history}, out / "history.png")
    print(f"best epoch {result.best_epoch} val_mse {result.best_val_mse:.6f}; "
          f"artifacts in {out}")
    return 0


def _dump_attention(out_dir: Path, sink) -> None:
    d = sink[0].f_map.shape[1]
    for i, maps in enumerate(sink):
        lines = ["frame,t_map," + ",".join(f"tf_{k}" for k in range(d))]
        for l in range(maps.tf_map.shape[0]):
            row = ",".join(repr(float(x)) for x in maps.tf_map[l])
            lines.append(f"{l},{float(maps.t_map[l, 0])!r},{row}")
        (out_dir / f"attention_block{i + 1}.csv").write_text("\n".join(lines) + "\n")
    lines = ["block," + ",".join(f"f_{k}" for k in range(d))]
    for i, maps in enumerate(sink):
        row = ",".join(repr(float(x)) for x in maps.f_map[0])
        lines.append(f"{i + 1},{row}")
    (out_dir / "attention_fmaps.csv").write_text("\n".join(lines) + "\n")
    plots.save_attention_plot(sink, out_dir / "attention.png")


def cmd_enhance(args) -> int:
    if args.oracle and args.ckpt:
        raise ConfigError("--oracle and --ckpt are mutually exclusive")
    noisy = audio.read_wav(args.input)
    if args.oracle:
        if not args.clean:
            raise ConfigError("--oracle needs --clean PATH (the clean reference)")
        if args.dump_attention:
            raise ConfigError("--dump-attention needs a model, not --oracle")
        clean = audio.read_wav(args.clean)
        if len(clean) != len(noisy):
            raise DataError(f"clean length {len(clean)} != noisy length {len(noisy)}")
        est = masks.oracle_enhance(noisy, clean, noisy - clean, args.oracle)
    else:
        if not args.ckpt:
            raise ConfigError("enhance needs --ckpt PATH (or --oracle with --clean)")
        cfg = _effective_config(args)
        model_cfg, params = _load_model(cfg, args.ckpt)
        sink: list | None = [] if args.dump_attention else None
        if args.dump_attention and model_cfg.attn.variant == "off":
            raise ConfigError("--dump-attention needs an attention variant, "
                              "model.variant is 'off'")
        est = masks.enhance(noisy, model_cfg, params, sink)
        if args.dump_attention:
            out_dir = Path(args.out) if args.out else (Path(args.output).parent or Path("."))
            out_dir.mkdir(parents=True, exist_ok=True)
            _dump_attention(out_dir, sink)
            print(f"attention maps for {len(sink)} blocks -> {out_dir}")
    audio.write_wav(est, args.output)
    print(f"enhanced {args.input} -> {args.output} ({len(est)} samples)")
    return 0


def cmd_evaluate(args) -> int:
    if args.oracle and args.ckpt:
        raise ConfigError("--oracle and --ckpt are mutually exclusive")
    cfg = _effective_config(args)
    out = _prepare_out(args, cfg)
    _, _, eval_spec = config.build(cfg)

    if args.ckpt:
        model_cfg, params = _load_model(cfg, args.ckpt)
        label = f"model_{model_cfg.attn.variant}"
        enhancer = lambda noisy, clean, scaled: masks.enhance(noisy, model_cfg, params)
    elif args.oracle:
        label = f"oracle_{args.oracle}"
        kind = args.oracle
        enhancer = lambda noisy, clean, scaled: masks.oracle_enhance(
            noisy, clean, scaled, kind)
    else:
        label = "noisy"
        enhancer = metrics.identity_enhancer

    report, detail = metrics.evaluate(enhancer, eval_spec)
    (out / "report.csv").write_text(metrics.report_csv(report))
    (out / "detail.csv").write_text(metrics.detail_csv(detail))
    reports = {label: report}
    if label != "noisy":
        baseline, _ = metrics.evaluate(metrics.identity_enhancer, eval_spec)
        (out / "report_noisy.csv").write_text(metrics.report_csv(baseline))
        reports["noisy"] = baseline
    plots.save_report_plot(reports, out / "report.png")

    for metric in metrics.METRICS:
        mean = np.mean([r[3] for r in report if r[2] == metric])
        print(f"{label} {metric} grand mean {mean:.4f}")
    print(f"report -> {out / 'report.csv'}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _effective_config(args)
    out = _prepare_out(args, cfg)
    model_cfg, train_cfg, eval_spec = config.build(cfg)

    histories: dict[str, list] = {}
    reports: dict[str, list] = {}
    digests: dict[str, list] = {}
    joint_eval_rows = []
    for variant in attention.VARIANTS:
        vcfg = model_cfg.with_variant(variant)
        vdir = out / f"variant_{variant}"
        vdir.mkdir(exist_ok=True)
        print(f"[{variant}] training...")
        result, params = train.train_loop(vcfg, train_cfg)
        _write_variant_artifacts(vdir, result, params)
        histories[variant] = result.history
        digests[variant] = result.batch_digests

        best = model.init_params(vcfg, train_cfg.seed)
        checkpoint.load_into(best, vdir / "best.ckpt")
        report, _ = metrics.evaluate(
            lambda noisy, clean, scaled: masks.enhance(noisy, vcfg, best), eval_spec)
        reports[variant] = report
        joint_eval_rows.extend((variant,) + row for row in report)
        final = result.history[-1]
        print(f"[{variant}] final train_mse {final[1]:.6f} val_mse {final[2]:.6f} "
              f"best epoch {result.best_epoch}")

    reference = digests["off"]
    for variant, dig in digests.items():
        if dig != reference:
            raise NumericError(f"variant {variant} consumed a different batch "
                               f"stream than 'off'; determinism broken")
    print("batch digests identical across variants")

    lines = ["variant,epoch,train_mse,val_mse"]
    for variant, rows in histories.items():
        for epoch, tr, va in rows:
            lines.append(f"{variant},{epoch},{float(tr)!r},{float(va)!r}")
    (out / "ablation_history.csv").write_text("\n".join(lines) + "\n")

    lines = ["variant,condition_noise,condition_snr_db,metric,mean,count"]
    for variant, noise, snr_db, metric, mean, count in joint_eval_rows:
        lines.append(f"{variant},{noise},{snr_db:g},{metric},{mean!r},{count}")
    (out / "ablation_eval.csv").write_text("\n".join(lines) + "\n")

    plots.save_history_plot(histories, out / "ablation_history.png")
    plots.save_report_plot(reports, out / "ablation_eval.png")
    print(f"ablation artifacts -> {out}")
    return 0


def _broken_case(rng):
    from . import autodiff as ad
    arr = rng.standard_normal(8)
    x0 = Tensor(arr, requires_grad=True, dtype=np.float64)

    def f(x):
        def bwd(g):
            ad.accumulate_grad(x, 0.9 * g)  # deliberately wrong factor
        y = ad.node(x.data.copy(), (x,), bwd)
        return ad.reduce_sum(ad.square(y))

    return f, x0, None


def cmd_gradcheck(args) -> int:
    cases = list(gradcheck.CASES)
    if args.inject_broken:
        cases.append(("injected_broken", _broken_case))
    all_ok = True
    print(f"{'case':28s} {'max_rel_err':>12s}  verdict")
    for name, build in cases:
        err = gradcheck.run_case(build, args.seed, args.draws)
        ok = err < gradcheck.TOLERANCE
        all_ok = all_ok and ok
        print(f"{name:28s} {err:12.3e}  {'PASS' if ok else 'FAIL'}")
    if not all_ok:
        print("gradient check FAILED", file=sys.stderr)
        return 3
    print("all gradient checks passed")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "enhance": cmd_enhance, "evaluate": cmd_evaluate,
                "ablate": cmd_ablate, "gradcheck": cmd_gradcheck}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"tfamask: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"tfamask: data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"tfamask: numeric failure: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"tfamask: missing file: {exc}", file=sys.stderr)
        return 2
    except TfaMaskError as exc:
        print(f"tfamask: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
