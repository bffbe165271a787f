"""Command-line interface: degrade, train, sr, eval, selftest.

Every command exits 0 on success and a distinct nonzero code with a
single-line `error: <category>: <message>` on stderr otherwise.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .checkpoint import CheckpointError, load_model, save_checkpoint
from .codec import (ManifestError, ManifestRow, load_image, load_triple,
                    make_triple, read_manifest, save_image, write_manifest)
from .config import ConfigError, load_config
from .metrics import psnr, ssim, write_report
from .selftest import run_selftest
from .tensor import Tensor
from .unfold import super_resolve, train, unfold_infer

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_MANIFEST = 4
EXIT_CONFIG = 5
EXIT_CHECKPOINT = 6
EXIT_SELFTEST = 7
EXIT_BADINPUT = 8

IMAGE_EXTENSIONS = (".png", ".ppm")


class CliError(Exception):
    def __init__(self, code: int, category: str, message: str):
        super().__init__(message)
        self.code = code
        self.category = category


def _fail(code, category, message):
    raise CliError(code, category, str(message).replace("\n", " "))


def _list_images(directory: str) -> list[str]:
    if not os.path.isdir(directory):
        _fail(EXIT_IO, "io", f"not a directory: {directory}")
    names = sorted(n for n in os.listdir(directory)
                   if n.lower().endswith(IMAGE_EXTENSIONS))
    if not names:
        _fail(EXIT_IO, "io", f"no .png/.ppm images in {directory}")
    return names


def cmd_degrade(args) -> int:
    try:
        qfs = [int(q) for q in args.qf.split(",") if q.strip()]
    except ValueError:
        _fail(EXIT_BADINPUT, "input", f"bad --qf list: {args.qf!r}")
    if not qfs or any(not 1 <= q <= 100 for q in qfs):
        _fail(EXIT_BADINPUT, "input", f"--qf values must be in [1, 100]: {args.qf!r}")
    names = _list_images(args.input)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for name in names:
        stem = os.path.splitext(name)[0]
        x = load_image(os.path.join(args.input, name))
        for qf in qfs:
            try:
                t = make_triple(x, args.scale, qf)
            except ValueError as e:
                _fail(EXIT_BADINPUT, "input", f"{name}: {e}")
            tag = f"{stem}_s{args.scale}_qf{qf}"
            hr, lr, lc = f"{tag}_hr.png", f"{tag}_lr.png", f"{tag}_lrc.png"
            save_image(t.x, os.path.join(args.out, hr))
            save_image(t.y, os.path.join(args.out, lr))
            save_image(t.z, os.path.join(args.out, lc))
            rows.append(ManifestRow(hr, lr, lc, args.scale, qf, t.codec_id))
    write_manifest(rows, os.path.join(args.out, "manifest.tsv"))
    print(f"wrote {len(rows)} triples to {args.out}")
    return 0


def _load_triples(manifest_path: str, expected_scale: int | None = None):
    rows = read_manifest(manifest_path)
    if not rows:
        _fail(EXIT_MANIFEST, "manifest", f"empty manifest: {manifest_path}")
    if expected_scale is not None:
        bad = [r for r in rows if r.scale != expected_scale]
        if bad:
            _fail(EXIT_MANIFEST, "manifest",
                  f"manifest scale {bad[0].scale} != config scale {expected_scale}")
    return [load_triple(r) for r in rows], rows


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    triples, _ = _load_triples(args.train_manifest, cfg.scale)
    val = None
    if args.val_manifest:
        val, _ = _load_triples(args.val_manifest, cfg.scale)
    model = None
    if args.resume:
        model = load_model(args.resume)
        from .config import config_to_text
        if config_to_text(model.cfg) != config_to_text(cfg):
            _fail(EXIT_CHECKPOINT, "checkpoint",
                  f"resume checkpoint config does not match {args.config}")
    model, history = train(cfg, triples, val, model=model, log=print)
    save_checkpoint(model.params_arm, model.params_rem, cfg, args.out)
    print(f"saved checkpoint to {args.out}")
    return 0


def cmd_sr(args) -> int:
    model = load_model(args.ckpt)
    z = load_image(args.input)
    if args.dump_iterates or args.dump_debug:
        debug = [] if args.dump_debug else None
        trace = unfold_infer(Tensor(z[None]), model, debug=debug)
        out = np.clip(trace.x_hats[-1].data[0], 0.0, 1.0)
        if args.dump_iterates:
            os.makedirs(args.dump_iterates, exist_ok=True)
            for j, xt in enumerate(trace.x_hats):
                save_image(np.clip(xt.data[0], 0.0, 1.0),
                           os.path.join(args.dump_iterates, f"x_hat_{j}.png"))
        if args.dump_debug:
            os.makedirs(args.dump_debug, exist_ok=True)
            for j, d in enumerate(debug):
                np.savez(os.path.join(args.dump_debug, f"debug_it{j + 1}.npz"),
                         **d)
    else:
        out = super_resolve(z, model)
    save_image(out, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in wanted if m not in ("psnr", "ssim")]
    if unknown:
        _fail(EXIT_BADINPUT, "input", f"unknown metric {unknown[0]!r}")
    model = load_model(args.ckpt)
    triples, rows = _load_triples(args.manifest, model.cfg.scale)
    report = []
    for t, row in zip(triples, rows):
        pred = super_resolve(t.z, model)
        report.append((os.path.basename(row.hr_path),
                       psnr(pred, t.x), ssim(pred, t.x)))
    write_report(args.report, report)
    print(f"wrote {args.report} ({len(report)} rows)")
    return 0


def cmd_selftest(args) -> int:
    failures = run_selftest()
    if failures:
        _fail(EXIT_SELFTEST, "selftest", f"{failures} check(s) failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cisr",
        description="Compressed-image super-resolution: data preparation, "
                    "training, inference, and evaluation.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("degrade", help="build (HR, LR, compressed) triples")
    d.add_argument("--input", required=True, help="directory of HR images")
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--scale", type=int, choices=(2, 3, 4), required=True)
    d.add_argument("--qf", required=True, help="comma-separated quality factors")
    d.add_argument("--codec", default="jpegsim", choices=("jpegsim",))
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_degrade)

    t = sub.add_parser("train", help="train a model from manifests")
    t.add_argument("--config", required=True)
    t.add_argument("--train-manifest", required=True)
    t.add_argument("--val-manifest")
    t.add_argument("--out", required=True, help="checkpoint output path")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sr", help="super-resolve one image")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dump-iterates", help="directory for x_hat_0..J images")
    s.add_argument("--dump-debug", help="directory for per-iteration maps")
    s.set_defaults(func=cmd_sr)

    e = sub.add_parser("eval", help="score a model over a manifest")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--metrics", default="psnr,ssim")
    e.set_defaults(func=cmd_eval)

    st = sub.add_parser("selftest", help="run the built-in oracle suite")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e.category}: {e}", file=sys.stderr)
        return e.code
    except FileNotFoundError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return EXIT_IO
    except ManifestError as e:
        print(f"error: manifest: {e}", file=sys.stderr)
        return EXIT_MANIFEST
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as e:
        print(f"error: checkpoint: {e}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except ValueError as e:
        print(f"error: input: {e}", file=sys.stderr)
        return EXIT_BADINPUT


if __name__ == "__main__":
    sys.exit(main())
