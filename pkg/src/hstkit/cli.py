"""Command-line entry point: ``hstkit <verb> ...``.

Exit codes: 0 success, 1 a contract failed (check, tolerance, bad input
file), 2 usage error (bad arguments, missing checkpoint/config).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
PARAM_TOLERANCE = 0.05


class UsageError(Exception):
    pass


def _threads() -> int:
    try:
        n = int(os.environ.get("HSTKIT_THREADS", "1"))
    except ValueError:
        raise UsageError("HSTKIT_THREADS must be an integer") from None
    if n < 1:
        raise UsageError("HSTKIT_THREADS must be >= 1")
    return n


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def write_json(path, obj) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def write_provenance(out_dir, command: str, args: dict, config_text: str | None = None) -> None:
    """Config snapshot and code version beside a command's outputs."""
    os.makedirs(out_dir, exist_ok=True)
    write_json(os.path.join(out_dir, "provenance.json"),
               {"command": command, "args": args, "version": f"hstkit {__version__}"})
    if config_text is not None:
        with open(os.path.join(out_dir, "config_snapshot.ini"), "w") as f:
            f.write(config_text)


def _quality(v: str):
    if v.lower() == "none":
        return None
    try:
        q = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"quality must be 1..100 or 'none', got {v!r}") from None
    if not 1 <= q <= 100:
        raise argparse.ArgumentTypeError(f"quality must be 1..100 or 'none', got {q}")
    return q


def _spec(args):
    from .degradation import DegradationSpec
    try:
        return DegradationSpec(scale=args.scale, jpeg_quality=args.quality)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _require_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise UsageError(f"{what} {path} not found")


def _load_model(path: str):
    from .model import SRModel, load_checkpoint
    from .model.checkpoint import CheckpointError
    _require_file(path, "checkpoint")
    try:
        ck = load_checkpoint(path)
    except CheckpointError as e:
        raise UsageError(str(e)) from None
    return SRModel(ck.config, ck.params)


# ---------------------------------------------------------------------------
# degrade


def _degrade_one(job):
    src, dst, spec_dict, seed = job
    from .degradation import DegradationSpec, degrade
    from .io import load_png, save_png
    try:
        spec = DegradationSpec.from_dict(spec_dict)
        hr = load_png(src).crop_to_multiple(spec.scale)
        lr = degrade(hr, spec, seed=seed)
        save_png(lr, dst)
        digest = hashlib.sha256(lr.pixels.tobytes()).hexdigest()
        return {"ok": True, "lr_shape": list(lr.shape), "pixels_sha256": digest}
    except Exception as e:  # per-file failure, reported and skipped
        return {"ok": False, "error": f"{type(e).__name__}: {e}"}


def cmd_degrade(args) -> int:
    if not os.path.isdir(args.input):
        raise UsageError(f"input directory {args.input} not found")
    spec = _spec(args)
    out = args.out
    rels = []
    for dirpath, _, files in os.walk(args.input):
        for f in files:
            if f.lower().endswith((".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")):
                rels.append(os.path.relpath(os.path.join(dirpath, f), args.input).replace(os.sep, "/"))
    rels.sort(key=lambda r: r.encode())
    jobs = []
    for i, rel in enumerate(rels):
        dst = os.path.join(out, os.path.splitext(rel)[0] + ".png")
        jobs.append((os.path.join(args.input, rel), dst, spec.to_dict(), args.seed * 1_000_003 + i))
    n = _threads()
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(n) as ex:
            results = list(ex.map(_degrade_one, jobs))
    else:
        results = [_degrade_one(j) for j in jobs]
    digest = spec.digest()
    entries, failed = [], 0
    for rel, res in zip(rels, results):
        rec = {"source": rel, "output": os.path.splitext(rel)[0] + ".png", "spec_hash": digest}
        if res["ok"]:
            rec.update(lr_shape=res["lr_shape"], pixels_sha256=res["pixels_sha256"])
        else:
            failed += 1
            rec["error"] = res["error"]
            print(f"error: {rel}: {res['error']}", file=sys.stderr)
        entries.append(rec)
    write_json(os.path.join(out, "manifest.json"),
               {"spec": spec.to_dict(), "spec_hash": digest, "seed": args.seed, "files": entries})
    write_provenance(out, "degrade", {"input": args.input, "scale": args.scale,
                                     "quality": args.quality, "seed": args.seed})
    print(f"degraded {len(rels) - failed}/{len(rels)} images -> {out} (spec {digest[:12]})")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    from .experiment import ConfigFileError, load_config
    from .io import DatasetIndex
    from .model import SRModel
    from .train import run_chain
    _require_file(args.config, "config")
    try:
        cfg = load_config(args.config)
    except ConfigFileError as e:
        raise UsageError(f"{args.config}: {e}") from None
    seed = cfg.seed if args.seed is None else args.seed
    out = args.out or cfg.output_dir
    dtype = np.float64 if cfg.precision == "float64" else np.float32
    train_items = DatasetIndex.scan(cfg.train).load()
    val_items = DatasetIndex.scan(cfg.val).load() if cfg.val else None
    write_provenance(out, "train", {"config": os.path.abspath(args.config), "seed": seed},
                     cfg.source_text)
    model = SRModel.create(cfg.model, seed=seed, dtype=dtype)
    results = run_chain(cfg.stages, model, train_items, out, val_items, seed)
    for name, res in results.items():
        last = res.records[-1] if res.records else {}
        print(f"{name}: {res.checkpoint} {json.dumps(last, sort_keys=True)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / infer


def cmd_eval(args) -> int:
    from .io import DatasetIndex
    from .train import evaluate
    model = _load_model(args.checkpoint)
    if not os.path.isdir(args.test_dir):
        raise UsageError(f"test directory {args.test_dir} not found")
    spec = _spec(args)
    items = DatasetIndex.scan(args.test_dir).load()
    report = evaluate(model, items, spec, ensemble=args.ensemble, seed=args.seed)
    for name, p, s in report.rows:
        print(f"{name}\tPSNR {p:.4f}\tSSIM {'n/a' if s is None else f'{s:.4f}'}")
    print(f"mean\tPSNR {report.mean_psnr:.4f}\tSSIM {report.mean_ssim:.4f}")
    if args.out:
        write_json(os.path.join(args.out, "report.json"),
                   {"spec": spec.to_dict(), "ensemble": args.ensemble, **report.to_dict()})
        write_provenance(args.out, "eval", {"checkpoint": args.checkpoint, "test_dir": args.test_dir,
                                            "scale": args.scale, "quality": args.quality,
                                            "ensemble": args.ensemble, "seed": args.seed})
    return EXIT_OK


def cmd_infer(args) -> int:
    from .io import load_png, save_png
    from .train import infer, self_ensemble_infer
    model = _load_model(args.checkpoint)
    _require_file(args.image, "image")
    lr = load_png(args.image)
    sr = self_ensemble_infer(model, lr) if args.ensemble else infer(model, lr)
    out = args.out or os.path.splitext(args.image)[0] + "_x4.png"
    if os.path.isdir(out):
        out = os.path.join(out, os.path.splitext(os.path.basename(args.image))[0] + "_x4.png")
    save_png(sr, out)
    write_provenance(os.path.dirname(os.path.abspath(out)), "infer",
                     {"checkpoint": args.checkpoint, "image": args.image, "ensemble": args.ensemble})
    print(f"{lr.height}x{lr.width} -> {sr.height}x{sr.width}: {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# params / gradcheck


def cmd_params(args) -> int:
    from .model import PRESETS, REFERENCE_PARAMS, count_for_config, preset
    from .tensor import ConfigError
    names = sorted(PRESETS) if args.preset.lower() == "all" else [args.preset]
    ok = True
    for name in names:
        try:
            cfg = preset(name)
        except ConfigError as e:
            raise UsageError(str(e)) from None
        n = count_for_config(cfg)
        ref = REFERENCE_PARAMS[name.upper()]
        dev = n / ref - 1
        good = abs(dev) <= PARAM_TOLERANCE
        ok &= good
        print(f"{name.upper()}\t{n}\t{n / 1e6:.2f}M\tref {ref / 1e6:.2f}M\t{dev:+.2%}\t{'ok' if good else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_gradcheck(args) -> int:
    from .tensor.gradcheck import TOLERANCE, run_primitive_checks
    if args.scope == "op":
        rows = run_primitive_checks(seed=args.seed)
    else:
        from .checks import model_gradcheck
        rows = model_gradcheck(seed=args.seed, max_entries=args.max_entries)
    ok = True
    for name, err in rows:
        good = err <= TOLERANCE
        ok &= good
        print(f"{name}\t{err:.3e}\t{'ok' if good else 'FAIL'}")
    worst = max((e for _, e in rows), default=0.0)
    print(f"{len(rows)} checks, worst {worst:.3e}, tolerance {TOLERANCE:.0e}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hstkit", description="Compressed-image x4 super-resolution toolkit.")
    p.add_argument("--version", action="version", version=f"hstkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def degradation_flags(sp, quality_default):
        sp.add_argument("--scale", type=int, default=4)
        sp.add_argument("--quality", type=_quality, default=quality_default,
                        help="JPEG quality 1..100, or 'none' to skip compression")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("degrade", help="bicubic-downsample and JPEG-compress a directory of HR images")
    sp.add_argument("input")
    sp.add_argument("--out", required=True)
    degradation_flags(sp, 10)
    sp.set_defaults(func=cmd_degrade)

    sp = sub.add_parser("train", help="run the stages of an experiment config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sp.add_argument("--out", default=None, help="override the config output directory")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="PSNR/SSIM of a checkpoint on a directory of HR images")
    sp.add_argument("checkpoint")
    sp.add_argument("test_dir")
    sp.add_argument("--ensemble", action="store_true")
    sp.add_argument("--out", default=None)
    degradation_flags(sp, 10)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("infer", help="super-resolve one image")
    sp.add_argument("checkpoint")
    sp.add_argument("image")
    sp.add_argument("--ensemble", action="store_true")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("params", help="parameter count of a preset against its reference size")
    sp.add_argument("--preset", default="all")
    sp.set_defaults(func=cmd_params)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    sp.add_argument("--scope", choices=("op", "model"), default="op")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-entries", type=int, default=None,
                    help="sample at most this many elements per model parameter")
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=_threads()):
            return args.func(args)
    except UsageError as e:
        print(f"hstkit {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
