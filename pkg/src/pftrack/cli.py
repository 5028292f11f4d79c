"""Command-line entry point: ``pftrack <subcommand> ...`` or ``python -m pftrack``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from . import configure_logging
from . import sequences as sq
from . import tracker as tk
from . import ungm
from .errors import PFTrackError

log = logging.getLogger(__name__)


def _rect_arg(text: str) -> tuple[float, float, float, float]:
    try:
        x, y, w, h = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,w,h, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("rectangle width and height must be positive")
    return x, y, w, h


def _size_arg(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pftrack",
        description="Particle-filter tracking with fused colour and edge histograms.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ungm-bench", help="compare multinomial and classified resampling on UNGM")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--particles", type=int, default=100)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--step-coefficient", type=float, default=0.4)
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("synth", help="write a synthetic sequence (PPM frames + ground truth)")
    p.add_argument("--preset", default="occlusion",
                   choices=["static", "linear", "occlusion", "illumination", "similar"])
    p.add_argument("--spec", type=Path, help="JSON file of SynthSpec fields (overrides the preset)")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("track", help="track a target through a sequence directory")
    p.add_argument("sequence", type=Path, help="directory with img/ and optional groundtruth_rect.txt")
    p.add_argument("--config", type=Path, help="TrackerConfig JSON")
    p.add_argument("--init", type=_rect_arg, help="initial window x,y,w,h (default: first ground-truth line)")
    p.add_argument("--color-only", action="store_true", help="disable the edge cue and fusion adaptation")
    p.add_argument("--exact-histograms", action="store_true", help="kernel-weighted per-particle histograms")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1, help="worker threads for particle scoring")
    p.add_argument("--overlay", action="store_true", help="also write frames with the estimate drawn in")
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("bench-hist", help="time naive vs integral region histograms")
    p.add_argument("--size", type=_size_arg, default=(480, 360), help="image WxH")
    p.add_argument("--particles", type=_int_list, default=[20, 50, 100, 500])
    p.add_argument("--region", type=_size_arg, default=(100, 100), help="region WxH")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("eval", help="centre-location error of a results.csv against ground truth")
    p.add_argument("sequence", type=Path)
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    return parser


def cmd_ungm_bench(args) -> int:
    params = ungm.UngmParams(
        particle_count=args.particles,
        steps=args.steps,
        step_coefficient=args.step_coefficient,
        runs=args.runs,
        seed=args.seed,
    )
    results = ungm.run_comparison(params)
    runs_path, trace_path = ungm.write_outputs(results, args.out)
    s = ungm.summarize(results)
    print(
        f"mean RMSE  TRPF {s['mean_rmse_trpf']:.4f}  IRPF {s['mean_rmse_irpf']:.4f}  "
        f"IRPF wins {s['irpf_win_rate']:.0%} of {len(results)} runs"
    )
    print(f"wrote {runs_path} and {trace_path}")
    return 0


def cmd_synth(args) -> int:
    spec = sq.preset(args.preset, seed=args.seed, frame_count=args.frames)
    if args.spec is not None:
        with open(args.spec) as fh:
            fields = json.load(fh)
        fields = {k: tuple(v) if isinstance(v, list) else v for k, v in fields.items()}
        spec = dataclasses.replace(spec, **fields)
    seq = sq.generate_synthetic(spec, args.out)
    print(f"wrote {len(seq)} frames to {args.out}")
    return 0


def _usage_error(parser, message: str) -> int:
    parser.print_usage(sys.stderr)
    print(f"pftrack: error: {message}", file=sys.stderr)
    return 2


def cmd_track(args, parser) -> int:
    seq = sq.load_sequence(args.sequence)
    if args.init is not None:
        init = args.init
    elif seq.ground_truth:
        init = seq.ground_truth[0].as_tuple()
    else:
        return _usage_error(parser, "track needs --init x,y,w,h when the sequence has no ground truth")

    cfg = tk.TrackerConfig.from_json(args.config) if args.config else tk.TrackerConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.exact_histograms:
        cfg = dataclasses.replace(cfg, fast_histogram=False)
    if args.color_only:
        cfg = cfg.color_only()

    tracker = tk.Tracker(cfg, threads=args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    overlay_dir = args.out / "overlay"
    if args.overlay:
        overlay_dir.mkdir(exist_ok=True)
    results = []
    t0 = time.perf_counter()
    for k, img in enumerate(seq.images()):
        r = tracker.initialize(img, init) if k == 0 else tracker.track_frame(img)
        results.append(r)
        if args.overlay:
            from .features import write_ppm

            write_ppm(sq.draw_rect(img, r.rect), overlay_dir / f"{k + 1:04d}.ppm")
    elapsed = time.perf_counter() - t0
    out_csv = args.out / "results.csv"
    sq.write_results_csv(results, out_csv)
    msg = f"tracked {len(results)} frames in {elapsed:.1f} s; wrote {out_csv}"
    if seq.ground_truth is not None:
        report = sq.evaluate(results, seq)
        msg += f"; mean CLE {report.mean_cle:.2f} px, success {report.success_rate:.0%}"
    print(msg)
    return 0


def cmd_bench_hist(args) -> int:
    rows = sq.bench_histograms(
        image_size=args.size,
        particle_counts=args.particles,
        region_size=args.region,
        repeats=args.repeats,
        seed=args.seed,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "bench_hist.csv"
    sq.write_bench_csv(rows, path)
    print(f"{'particles':>9} {'naive s':>10} {'build s':>10} {'query s':>10} {'integral s':>11}")
    for r in rows:
        print(
            f"{r['particles']:>9} {r['naive_s']:>10.4f} {r['integral_build_s']:>10.4f} "
            f"{r['integral_query_s']:>10.4f} {r['integral_total_s']:>11.4f}"
        )
    print(f"wrote {path}")
    return 0


def cmd_eval(args) -> int:
    seq = sq.load_sequence(args.sequence)
    rects = sq.read_results_csv(args.results)
    report = sq.evaluate(rects, seq)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "eval.csv"
    report.to_csv(path)
    print(
        f"mean CLE {report.mean_cle:.3f} px  RMSE {report.rmse:.3f} px  "
        f"success {report.success_rate:.0%}; wrote {path}"
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        configure_logging()
        if args.command == "ungm-bench":
            return cmd_ungm_bench(args)
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "track":
            return cmd_track(args, parser)
        if args.command == "bench-hist":
            return cmd_bench_hist(args)
        return cmd_eval(args)
    except (PFTrackError, OSError, ValueError, TypeError) as exc:
        print(f"pftrack: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
