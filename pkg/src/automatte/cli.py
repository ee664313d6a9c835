"""Command line front end.

    automatte trimap IN -o OUT
    automatte matte IN --trimap TM -o OUT
    automatte auto IN -o DIR [--dump]
    automatte eval --test A --ref B
    automatte corpus DIR -o REPORT.csv [--ref-dir D]

Exit status: 0 success, 1 per-image warnings in corpus mode, 2 fatal error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from automatte import config as cfgmod
from automatte import kernels
from automatte.matting import build_system, solve_alpha
from automatte.pipeline import StageError, run_pipeline, ssd, write_outputs
from automatte.raster import RasterError, load_field, load_rgb, save_gray
from automatte.trimap import load_trimap, save_trimap

log = logging.getLogger("automatte")

IMAGE_SUFFIXES = {".png", ".ppm", ".pgm", ".pnm"}
MATTING_KEYS = ("lambda", "epsilon", "cg_tol", "cg_maxiter")
TIMED_STAGES = (
    "lab",
    "segmentation",
    "saliency",
    "fusion",
    "region_median",
    "patches",
    "descriptors",
    "classification",
    "modified_saliency",
    "binarize",
    "trimap",
    "build_system",
    "solve_alpha",
)


class UsageError(Exception):
    pass


def _add_config_flags(p: argparse.ArgumentParser, keys) -> None:
    g = p.add_argument_group("parameters (override --config)")
    g.add_argument("--config", metavar="FILE", help="flat 'key = value' file merged over the defaults")
    for key in keys:
        g.add_argument(cfgmod.flag_name(key), dest=f"cfg_{key}", metavar="V", help=cfgmod.KEYS[key][1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="automatte", description="Automatic trimap generation and alpha matting.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trimap", help="generate a trimap from an image")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="trimap PNG to write")
    p.add_argument("--saliency-from", metavar="F1,F2,F3", help="external saliency maps; leave a slot empty to compute it")
    _add_config_flags(p, cfgmod.KEYS)

    p = sub.add_parser("matte", help="solve alpha from an image and a trimap")
    p.add_argument("input")
    p.add_argument("--trimap", required=True, help="trimap PNG (0 background, 255 foreground, else unknown)")
    p.add_argument("-o", "--output", required=True, help="matte PNG to write")
    _add_config_flags(p, MATTING_KEYS)

    p = sub.add_parser("auto", help="full pipeline: trimap and matte")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--dump", action="store_true", help="also write every intermediate stage")
    p.add_argument("--saliency-from", metavar="F1,F2,F3", help="external saliency maps; leave a slot empty to compute it")
    _add_config_flags(p, cfgmod.KEYS)

    p = sub.add_parser("eval", help="sum of squared differences between two mattes")
    p.add_argument("--test", required=True, help="matte under test")
    p.add_argument("--ref", required=True, help="reference matte")

    p = sub.add_parser("corpus", help="run the pipeline over a directory and write a CSV report")
    p.add_argument("input", help="directory of PNG/PPM images")
    p.add_argument("-o", "--output", required=True, help="CSV report to write")
    p.add_argument("--ref-dir", help="directory of reference mattes with matching file names")
    _add_config_flags(p, cfgmod.KEYS)
    return parser


def resolve_config(args, keys) -> cfgmod.PipelineConfig:
    base = cfgmod.PipelineConfig()
    values = {}
    if getattr(args, "config", None):
        values.update(cfgmod.parse_config_text(_read_text(args.config), args.config))
    for key in keys:
        raw = getattr(args, f"cfg_{key}", None)
        if raw is not None:
            values[key] = cfgmod.parse_value(key, raw)
    return cfgmod.from_flat(values, base)


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise cfgmod.ConfigError(f"cannot read config {path}: {exc}") from exc


def _saliency_overrides(spec: str | None, shape):
    if not spec:
        return None
    parts = spec.split(",")
    if len(parts) > 3:
        raise UsageError("--saliency-from takes at most three comma-separated files")
    parts += [""] * (3 - len(parts))
    maps = []
    for part in parts:
        part = part.strip()
        if not part:
            maps.append(None)
            continue
        m = load_field(part)
        if m.shape != shape:
            raise UsageError(f"saliency map {part} is {m.shape[1]}x{m.shape[0]}, image is {shape[1]}x{shape[0]}")
        maps.append(m)
    return maps


def _same_path(a, b) -> bool:
    try:
        return Path(a).resolve() == Path(b).resolve()
    except OSError:
        return False


def cmd_trimap(args) -> int:
    cfg = resolve_config(args, cfgmod.KEYS)
    if _same_path(args.input, args.output):
        raise UsageError("output would overwrite the input image")
    img = load_rgb(args.input)
    res = run_pipeline(img, cfg, threads=kernels.default_threads(), saliency_maps=_saliency_overrides(args.saliency_from, img.shape[:2]), stop_after_trimap=True)
    save_trimap(res.trimap, args.output)
    _report_flags(res.flags)
    return 0


def cmd_matte(args) -> int:
    cfg = resolve_config(args, MATTING_KEYS)
    if _same_path(args.input, args.output) or _same_path(args.trimap, args.output):
        raise UsageError("output would overwrite an input file")
    img = load_rgb(args.input)
    tm = load_trimap(args.trimap, cfg.trimap.c)
    if tm.shape != img.shape[:2]:
        raise UsageError(f"trimap is {tm.shape[1]}x{tm.shape[0]}, image is {img.shape[1]}x{img.shape[0]}")
    mp = cfg.matting
    matte = solve_alpha(build_system(img, tm, mp.lam, mp.epsilon), mp.tol, mp.maxiter)
    save_gray(matte.alpha, args.output)
    if not matte.info.converged:
        print("warning: matting solve did not converge", file=sys.stderr)
    return 0


def cmd_auto(args) -> int:
    cfg = resolve_config(args, cfgmod.KEYS)
    cfg = cfgmod.replace(cfg, dump_intermediates=args.dump)
    img = load_rgb(args.input)
    res = run_pipeline(img, cfg, threads=kernels.default_threads(), saliency_maps=_saliency_overrides(args.saliency_from, img.shape[:2]))
    write_outputs(res, args.output, dump=args.dump)
    _report_flags(res.flags)
    return 0


def cmd_eval(args) -> int:
    a = load_field(args.test)
    b = load_field(args.ref)
    if a.shape != b.shape:
        raise UsageError(f"matte sizes differ: {a.shape} vs {b.shape}")
    total, mean = ssd(a, b)
    print(f"ssd={total:.6g} mean={mean:.6g}")
    return 0


@dataclass
class CorpusRow:
    name: str
    ssd_vs_reference: float | None = None
    ssd_mean: float | None = None
    unknown_fraction: float = 0.0
    fg_fraction: float = 0.0
    timings: dict = field(default_factory=dict)
    total_ms: float = 0.0
    flags: list = field(default_factory=list)
    status: str = "ok"


@dataclass
class CorpusReport:
    rows: list
    mean_ssd: float | None
    mean_unknown_fraction: float
    mean_fg_fraction: float


def _corpus_one(path: Path, cfg, ref_dir) -> CorpusRow:
    row = CorpusRow(name=path.name)
    try:
        img = load_rgb(path)
        res = run_pipeline(img, cfg, threads=1)
    except (RasterError, StageError, ValueError) as exc:
        row.status = "error"
        row.flags = [f"error: {exc}"]
        return row
    row.fg_fraction, row.unknown_fraction = res.trimap.fractions()
    row.timings = dict(res.timings)
    row.total_ms = res.total_ms
    row.flags = sorted(res.flags)
    if ref_dir is not None:
        ref_path = Path(ref_dir) / path.name
        try:
            ref = load_field(ref_path)
            row.ssd_vs_reference, row.ssd_mean = ssd(res.matte.alpha, ref)
        except (RasterError, ValueError) as exc:
            row.flags.append(f"reference: {exc}")
    return row


def run_corpus(in_dir, cfg, ref_dir=None, workers=1) -> CorpusReport:
    files = sorted(p for p in Path(in_dir).iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    if workers > 1 and len(files) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda p: _corpus_one(p, cfg, ref_dir), files))
    else:
        rows = [_corpus_one(p, cfg, ref_dir) for p in files]
    ok = [r for r in rows if r.status == "ok"]
    ssds = [r.ssd_vs_reference for r in ok if r.ssd_vs_reference is not None]
    return CorpusReport(
        rows=rows,
        mean_ssd=float(np.mean(ssds)) if ssds else None,
        mean_unknown_fraction=float(np.mean([r.unknown_fraction for r in ok])) if ok else 0.0,
        mean_fg_fraction=float(np.mean([r.fg_fraction for r in ok])) if ok else 0.0,
    )


def write_corpus_csv(report: CorpusReport, path) -> None:
    def fmt(v):
        return "" if v is None else f"{v:.6g}"

    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(
            ["name", "status", "ssd_vs_reference", "ssd_mean", "unknown_fraction", "fg_fraction"]
            + [f"t_{s}_ms" for s in TIMED_STAGES]
            + ["total_ms", "flags"]
        )
        for r in report.rows:
            wr.writerow(
                [r.name, r.status, fmt(r.ssd_vs_reference), fmt(r.ssd_mean), f"{r.unknown_fraction:.6f}", f"{r.fg_fraction:.6f}"]
                + [f"{r.timings.get(s, 0.0):.3f}" for s in TIMED_STAGES]
                + [f"{r.total_ms:.3f}", ";".join(r.flags)]
            )


def cmd_corpus(args) -> int:
    cfg = resolve_config(args, cfgmod.KEYS)
    in_dir = Path(args.input)
    if not in_dir.is_dir():
        raise UsageError(f"{in_dir} is not a directory")
    if args.ref_dir and not Path(args.ref_dir).is_dir():
        raise UsageError(f"{args.ref_dir} is not a directory")
    report = run_corpus(in_dir, cfg, args.ref_dir, workers=kernels.default_threads())
    write_corpus_csv(report, args.output)
    mean = "n/a" if report.mean_ssd is None else f"{report.mean_ssd:.6g}"
    print(
        f"images={len(report.rows)} mean_ssd={mean} "
        f"mean_unknown_fraction={report.mean_unknown_fraction:.4f} mean_fg_fraction={report.mean_fg_fraction:.4f}"
    )
    warned = any(r.status != "ok" or r.flags for r in report.rows)
    return 1 if warned else 0


def _report_flags(flags) -> None:
    for f in sorted(flags):
        print(f"warning: {f}", file=sys.stderr)


COMMANDS = {"trimap": cmd_trimap, "matte": cmd_matte, "auto": cmd_auto, "eval": cmd_eval, "corpus": cmd_corpus}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, cfgmod.ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"automatte: error: {exc}", file=sys.stderr)
        return 2
    except (RasterError, StageError, ValueError) as exc:
        print(f"automatte: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
