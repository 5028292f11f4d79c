"""Image sequences, synthetic scenes, evaluation metrics and the histogram benchmark.

Sequences follow the OTB directory layout::

    <name>/img/0001.ppm, 0002.ppm, ...
    <name>/groundtruth_rect.txt      # one "x,y,w,h" line per frame (optional)
"""

from __future__ import annotations

import csv
import math
import re
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import features as ft
from . import histograms as hg
from .errors import IoFailure, MalformedGroundTruth, MissingFrames, NoGroundTruth

IMAGE_SUFFIXES = {".ppm", ".png", ".jpg", ".jpeg", ".bmp"}
SUCCESS_THRESHOLD_PX = 20.0


@dataclass
class TrackSequence:
    frames: list[Path]
    ground_truth: list[ft.RegionRect] | None = None
    name: str = ""

    def __post_init__(self):
        if self.ground_truth is not None and len(self.ground_truth) != len(self.frames):
            raise MalformedGroundTruth(
                len(self.ground_truth) + 1,
                f"{len(self.ground_truth)} rectangles for {len(self.frames)} frames",
            )

    def __len__(self):
        return len(self.frames)

    def images(self):
        for path in self.frames:
            yield ft.read_image(path)


# -- loading -----------------------------------------------------------------


def parse_rect_line(line: str, line_number: int) -> ft.RegionRect:
    parts = [p for p in re.split(r"[,\s]+", line.strip()) if p]
    try:
        if len(parts) != 4:
            raise ValueError
        x, y, w, h = (int(round(float(p))) for p in parts)
    except ValueError:
        raise MalformedGroundTruth(line_number, line.rstrip("\n")) from None
    return ft.RegionRect(x, y, w, h)


def read_ground_truth(path) -> list[ft.RegionRect]:
    rects = []
    with open(path) as fh:
        for k, line in enumerate(fh, start=1):
            if line.strip():
                rects.append(parse_rect_line(line, k))
    return rects


def write_ground_truth(rects, path) -> None:
    with open(path, "w") as fh:
        for r in rects:
            fh.write(f"{r.x},{r.y},{r.w},{r.h}\n")


def _frame_number(path: Path):
    digits = re.findall(r"\d+", path.stem)
    return (int(digits[-1]) if digits else math.inf, path.name)


def load_sequence(directory) -> TrackSequence:
    directory = Path(directory)
    img_dir = directory / "img"
    if not img_dir.is_dir():
        raise MissingFrames(f"{img_dir} does not exist")
    frames = sorted(
        (p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=_frame_number,
    )
    if not frames:
        raise MissingFrames(f"no image frames in {img_dir}")
    gt_path = directory / "groundtruth_rect.txt"
    truth = read_ground_truth(gt_path) if gt_path.exists() else None
    return TrackSequence(frames=frames, ground_truth=truth, name=directory.name)


# -- synthetic scenes ----------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic face-like target on a textured background.

    Intervals are half-open ``(start, stop)`` frame ranges.  The occluder is
    a flat patch covering ``occluder_cover`` of the target box; illumination
    multiplies every pixel by ``illumination_gain``; the distractor is a
    plain patch of ``distractor_color`` the size of the target.
    """

    frame_count: int = 100
    width: int = 320
    height: int = 240
    target_color: tuple[int, int, int] = (223, 145, 98)
    target_size: tuple[int, int] = (40, 48)
    motion: str = "linear"
    start: tuple[float, float] = (70.0, 120.0)
    velocity: tuple[float, float] = (2.0, 0.0)
    amplitude: tuple[float, float] = (0.0, 30.0)
    period: float = 60.0
    occlusion: tuple[int, int] | None = None
    occluder_color: tuple[int, int, int] = (60, 90, 190)
    occluder_cover: float = 0.65
    illumination: tuple[int, int] | None = None
    illumination_gain: float = 0.5
    distractor: bool = False
    distractor_center: tuple[float, float] | None = None
    distractor_color: tuple[int, int, int] | None = None
    noise_std: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.motion not in ("static", "linear", "sinusoidal"):
            raise ValueError(f"unknown motion {self.motion!r}")
        for name in ("occlusion", "illumination"):
            iv = getattr(self, name)
            if iv is not None and not 0 <= iv[0] <= iv[1] <= self.frame_count:
                raise ValueError(f"{name} interval {iv} outside [0, {self.frame_count})")
        if not 0.0 <= self.occluder_cover <= 1.0:
            raise ValueError("occluder_cover must lie in [0, 1]")

    def center_at(self, k: int) -> tuple[float, float]:
        x0, y0 = self.start
        if self.motion == "static":
            return x0, y0
        vx, vy = self.velocity
        if self.motion == "linear":
            return x0 + vx * k, y0 + vy * k
        ax, ay = self.amplitude
        phase = 2.0 * math.pi * k / self.period
        return x0 + vx * k + ax * math.sin(phase), y0 + vy * k + ay * math.sin(phase)

    def truth_at(self, k: int) -> ft.RegionRect:
        cx, cy = self.center_at(k)
        return ft.RegionRect.from_center(cx, cy, *self.target_size)


def _in(interval, k):
    return interval is not None and interval[0] <= k < interval[1]


def _background(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Vertical low-saturation stripes of random width and shade.

    Stripe borders give the background a strongly oriented edge histogram,
    unlike the roughly isotropic edges of the elliptical target.
    """
    h, w = spec.height, spec.width
    bg = np.empty((h, w, 3))
    x = 0
    while x < w:
        width = int(rng.integers(6, 16))
        shade = rng.uniform(50, 190)
        bg[:, x : x + width] = shade + rng.uniform(-12, 12, size=3)
        x += width
    return bg


def _draw_face(canvas: np.ndarray, rect: ft.RegionRect, color, rng=None):
    """Ellipse face with darker eyes, brows and mouth; clipped to the canvas."""
    h, w = canvas.shape[:2]
    cx, cy = rect.center
    yy, xx = np.mgrid[0:h, 0:w]
    px, py = xx + 0.5, yy + 0.5
    inside = ((px - cx) / (rect.w / 2.0)) ** 2 + ((py - cy) / (rect.h / 2.0)) ** 2 <= 1.0
    canvas[inside] = color
    dark = np.array(color, dtype=float) * 0.35
    for ex in (-0.22, 0.22):
        eye = ((px - (cx + ex * rect.w)) / (0.09 * rect.w)) ** 2 + (
            (py - (cy - 0.12 * rect.h)) / (0.06 * rect.h)
        ) ** 2 <= 1.0
        canvas[eye] = dark
        brow = (np.abs(py - (cy - 0.25 * rect.h) - 0.25 * ex / abs(ex) * (px - (cx + ex * rect.w))) < 0.03 * rect.h) & (
            np.abs(px - (cx + ex * rect.w)) < 0.12 * rect.w
        )
        canvas[brow] = dark
    mouth = (((px - cx) / (0.2 * rect.w)) ** 2 + ((py - (cy + 0.22 * rect.h)) / (0.05 * rect.h)) ** 2) <= 1.0
    canvas[mouth] = dark * 1.4
    nose = (np.abs(px - cx) < 0.03 * rect.w) & (np.abs(py - cy) < 0.1 * rect.h)
    canvas[nose] = dark * 1.6


def render_frame(spec: SynthSpec, k: int, background: np.ndarray, noise: np.ndarray) -> ft.ImageBuffer:
    canvas = background.copy()
    if spec.distractor:
        dc = spec.distractor_center or (spec.width * 0.5, spec.height * 0.5)
        drect = ft.RegionRect.from_center(dc[0], dc[1], *spec.target_size)
        dcol = spec.distractor_color or spec.target_color
        c = drect.clamp(spec.width, spec.height)
        if c is not None:
            canvas[c.y : c.y + c.h, c.x : c.x + c.w] = dcol
    truth = spec.truth_at(k)
    _draw_face(canvas, truth, spec.target_color)
    if _in(spec.occlusion, k):
        # covers the left part of the target box plus a small margin
        ow = int(math.ceil(spec.occluder_cover * truth.w))
        occ = ft.RegionRect(truth.x - 4, truth.y - 6, ow + 4, truth.h + 12).clamp(spec.width, spec.height)
        if occ is not None:
            canvas[occ.y : occ.y + occ.h, occ.x : occ.x + occ.w] = spec.occluder_color
    canvas = canvas + noise
    if _in(spec.illumination, k):
        canvas = canvas * spec.illumination_gain
    return ft.ImageBuffer(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))


def synthesize(spec: SynthSpec):
    """Yield ``(frame, truth_rect)`` pairs without touching the filesystem."""
    rng = np.random.default_rng(spec.seed)
    background = _background(spec, rng)
    for k in range(spec.frame_count):
        noise = rng.normal(0.0, spec.noise_std, size=background.shape)
        yield render_frame(spec, k, background, noise), spec.truth_at(k)


def generate_synthetic(spec: SynthSpec, out_dir) -> TrackSequence:
    """Write PPM frames and exact ground truth in the OTB layout."""
    out_dir = Path(out_dir)
    img_dir = out_dir / "img"
    try:
        img_dir.mkdir(parents=True, exist_ok=True)
        frames, truth = [], []
        for k, (img, rect) in enumerate(synthesize(spec)):
            path = img_dir / f"{k + 1:04d}.ppm"
            ft.write_ppm(img, path)
            frames.append(path)
            truth.append(rect)
        write_ground_truth(truth, out_dir / "groundtruth_rect.txt")
    except OSError as exc:
        raise IoFailure(f"cannot write synthetic sequence to {out_dir}: {exc}") from exc
    return TrackSequence(frames=frames, ground_truth=truth, name=out_dir.name)


def preset(name: str, seed: int = 0, frame_count: int = 100) -> SynthSpec:
    """Named scenes: ``static``, ``linear``, ``occlusion``, ``illumination``, ``similar``."""
    base = SynthSpec(frame_count=frame_count, seed=seed)
    if name == "static":
        return SynthSpec(frame_count=frame_count, seed=seed, motion="static", start=(160.0, 120.0))
    if name == "linear":
        return base
    third = frame_count // 3
    if name == "occlusion":
        return SynthSpec(
            frame_count=frame_count,
            seed=seed,
            motion="sinusoidal",
            start=(90.0, 110.0),
            velocity=(1.4, 0.0),
            amplitude=(0.0, 25.0),
            period=70.0,
            occlusion=(third, 2 * third),
            distractor=True,
            distractor_center=(90.0 + 1.4 * frame_count / 2 + 10.0, 165.0),
        )
    if name == "illumination":
        return SynthSpec(
            frame_count=frame_count,
            seed=seed,
            motion="sinusoidal",
            start=(90.0, 120.0),
            velocity=(1.4, 0.0),
            amplitude=(0.0, 25.0),
            period=70.0,
            illumination=(third, 2 * third),
            illumination_gain=1.5,
            # a shaded skin-toned patch that brightens to the target's colour
            distractor=True,
            distractor_center=(90.0 + 1.4 * frame_count / 2, 165.0),
            distractor_color=(149, 97, 65),
        )
    if name == "similar":
        return SynthSpec(
            frame_count=frame_count,
            seed=seed,
            motion="sinusoidal",
            start=(90.0, 120.0),
            velocity=(1.4, 0.0),
            amplitude=(0.0, 25.0),
            period=70.0,
            distractor=True,
            distractor_center=(90.0 + 1.4 * frame_count / 2, 160.0),
        )
    raise ValueError(f"unknown preset {name!r}")


# -- metrics -------------------------------------------------------------------


def center_location_error(estimate, truth) -> float:
    """Euclidean distance between rectangle centres; rects are RegionRect or (x, y, w, h)."""
    ex, ey = _center(estimate)
    tx, ty = _center(truth)
    return math.hypot(ex - tx, ey - ty)


def _center(rect):
    if isinstance(rect, ft.RegionRect):
        return rect.center
    x, y, w, h = rect
    return x + w / 2.0, y + h / 2.0


@dataclass
class EvalReport:
    cle: np.ndarray
    rmse: float
    mean_cle: float
    success: np.ndarray
    runtimes: dict = field(default_factory=dict)

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.success)) if self.success.size else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["frame", "cle"])
            for k, e in enumerate(self.cle):
                out.writerow([k, repr(float(e))])


def evaluate(results, sequence: TrackSequence, runtimes=None) -> EvalReport:
    """Per-frame centre error against ground truth.

    ``results`` holds one rectangle per frame, either as tracker
    ``FrameResult`` objects (anything with a ``rect`` attribute) or as
    ``(x, y, w, h)`` tuples.
    """
    if sequence.ground_truth is None:
        raise NoGroundTruth(f"sequence {sequence.name!r} has no ground truth")
    rects = [getattr(r, "rect", r) for r in results]
    if len(rects) != len(sequence.ground_truth):
        raise ValueError(f"{len(rects)} results for {len(sequence.ground_truth)} frames")
    cle = np.array([center_location_error(e, t) for e, t in zip(rects, sequence.ground_truth)])
    return EvalReport(
        cle=cle,
        rmse=float(np.sqrt(np.mean(cle**2))) if cle.size else 0.0,
        mean_cle=float(cle.mean()) if cle.size else 0.0,
        success=cle < SUCCESS_THRESHOLD_PX,
        runtimes=dict(runtimes or {}),
    )


def read_results_csv(path) -> list[tuple[float, float, float, float]]:
    """Rectangles from a ``results.csv`` written by :func:`write_results_csv`."""
    rects = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cx, cy, w, h = (float(row[k]) for k in ("cx", "cy", "w", "h"))
            rects.append((cx - w / 2.0, cy - h / 2.0, w, h))
    return rects


RESULT_COLUMNS = ["frame", "cx", "cy", "w", "h", "ess", "theta_color", "d_color", "rho_edge", "resampled"]


def write_results_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(RESULT_COLUMNS)
        for r in results:
            x, y, w, h = r.rect
            out.writerow(
                [
                    r.frame,
                    f"{x + w / 2.0:.6f}",
                    f"{y + h / 2.0:.6f}",
                    f"{w:.6f}",
                    f"{h:.6f}",
                    f"{r.ess:.6f}",
                    f"{r.theta_color:.6f}",
                    f"{r.d_color:.6f}",
                    f"{r.rho_edge:.6f}",
                    int(r.resampled),
                ]
            )


def draw_rect(img: ft.ImageBuffer, rect, color=(255, 0, 0), thickness=2) -> ft.ImageBuffer:
    """Copy of ``img`` with the outline of ``rect = (x, y, w, h)`` burned in."""
    px = img.pixels.copy()
    x, y, w, h = (int(round(v)) for v in rect)
    H, W = px.shape[:2]
    for t in range(thickness):
        x1, y1, x2, y2 = x + t, y + t, x + w - 1 - t, y + h - 1 - t
        if x2 < x1 or y2 < y1:
            break
        cols = slice(max(x1, 0), min(x2 + 1, W))
        rows = slice(max(y1, 0), min(y2 + 1, H))
        for yy in (y1, y2):
            if 0 <= yy < H:
                px[yy, cols] = color
        for xx in (x1, x2):
            if 0 <= xx < W:
                px[rows, xx] = color
    return ft.ImageBuffer(px)


# -- histogram benchmark ---------------------------------------------------------


def naive_region_counts(img: ft.ImageBuffer, region: ft.RegionRect, spec: ft.QuantizerSpec) -> np.ndarray:
    """Per-region histogram the ordinary way: convert, bin and count the region's pixels."""
    c = region.clamp(img.width, img.height)
    if c is None:
        return np.zeros(spec.color_bins, dtype=np.int64)
    patch = img.pixels[c.y : c.y + c.h, c.x : c.x + c.w]
    h, s, v = ft.rgb_to_hsv_array(patch)
    return np.bincount(ft.quantize_color(h, s, v, spec).ravel(), minlength=spec.color_bins)


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_histograms(
    image_size=(480, 360),
    particle_counts=(20, 50, 100, 500),
    region_size=(100, 100),
    repeats=5,
    seed=0,
    spec: ft.QuantizerSpec | None = None,
) -> list[dict]:
    """Time P region histograms computed naively vs. through an integral histogram.

    Naive: each region's pixels are converted to HSV, binned and counted.
    Integral: the whole frame is binned once and the table built
    (``build_s``), then all P regions are queried (``query_s``).  Times are
    medians over ``repeats`` runs.
    """
    spec = spec or ft.QuantizerSpec()
    rng = np.random.default_rng(seed)
    width, height = image_size
    img = ft.ImageBuffer(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))
    rw, rh = region_size
    rows = []
    build_s = _median_time(lambda: hg.build_integral_histogram(img, spec, "color"), repeats)
    ih = hg.build_integral_histogram(img, spec, "color")
    for p in particle_counts:
        xs = rng.integers(0, max(1, width - rw), size=p)
        ys = rng.integers(0, max(1, height - rh), size=p)
        regions = [ft.RegionRect(int(x), int(y), rw, rh) for x, y in zip(xs, ys)]
        naive_s = _median_time(lambda: [naive_region_counts(img, r, spec) for r in regions], repeats)
        query_s = _median_time(
            lambda: ih.counts_many(xs, ys, np.full(p, rw), np.full(p, rh)), repeats
        )
        rows.append(
            {
                "particles": p,
                "naive_s": naive_s,
                "integral_build_s": build_s,
                "integral_query_s": query_s,
                "integral_total_s": build_s + query_s,
            }
        )
    return rows


def query_time_by_area(sizes=(4, 16, 64, 256), image_size=(480, 360), queries=2000, repeats=5, seed=0):
    """Median seconds per integral query for square regions of each side length."""
    rng = np.random.default_rng(seed)
    width, height = image_size
    bins = rng.integers(0, 256, size=(height, width))
    ih = hg.IntegralHistogram.from_bins(bins, 256)
    out = {}
    for s in sizes:
        xs = rng.integers(0, width - s, size=queries)
        ys = rng.integers(0, height - s, size=queries)

        def run():
            for i in range(queries):
                ih.counts(ft.RegionRect(int(xs[i]), int(ys[i]), s, s))

        out[s] = _median_time(run, repeats) / queries
    return out


def write_bench_csv(rows, path) -> None:
    cols = ["particles", "naive_s", "integral_build_s", "integral_query_s", "integral_total_s"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(cols)
        for r in rows:
            out.writerow([r["particles"]] + [f"{r[c]:.6f}" for c in cols[1:]])
