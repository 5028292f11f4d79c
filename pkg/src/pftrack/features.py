"""Pixel-level features: HSV colour bins, Sobel edge orientation bins, and
Epanechnikov-weighted region histograms.

Images are ``(height, width, 3)`` uint8 arrays wrapped in :class:`ImageBuffer`.
Pixel ``(col, row)`` has its centre at ``(col + 0.5, row + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import histograms
from .errors import (
    AllPixelsBelowEdgeThreshold,
    EmptyRegion,
    ImageTooSmall,
    IoFailure,
)

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])
NO_BIN = -1


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a (height, width, 3) image, got {px.shape}")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def gray(self) -> np.ndarray:
        return self.pixels.astype(float) @ GRAY_WEIGHTS

    def __eq__(self, other):
        return isinstance(other, ImageBuffer) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    orientation: np.ndarray

    @property
    def height(self) -> int:
        return self.magnitude.shape[0]

    @property
    def width(self) -> int:
        return self.magnitude.shape[1]


@dataclass(frozen=True)
class QuantizerSpec:
    hue_bins: int = 8
    sat_bins: int = 8
    val_bins: int = 4
    orientation_bins: int = 16
    magnitude_threshold: float = 25.0

    def __post_init__(self):
        for name in ("hue_bins", "sat_bins", "val_bins", "orientation_bins"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.magnitude_threshold < 0:
            raise ValueError("magnitude_threshold must be >= 0")

    @property
    def color_bins(self) -> int:
        return self.hue_bins * self.sat_bins * self.val_bins

    def bins_for(self, mode: str) -> int:
        if mode == "color":
            return self.color_bins
        if mode == "edge":
            return self.orientation_bins
        raise ValueError(f"unknown feature mode {mode!r}")


@dataclass(frozen=True)
class RegionRect:
    x: int
    y: int
    w: int
    h: int

    @classmethod
    def from_center(cls, cx, cy, w, h) -> "RegionRect":
        """Integer rectangle of size ``round(w) x round(h)`` centred near (cx, cy)."""
        wi = max(1, int(round(w)))
        hi = max(1, int(round(h)))
        return cls(int(math.floor(cx - wi / 2.0 + 0.5)), int(math.floor(cy - hi / 2.0 + 0.5)), wi, hi)

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def clamp(self, width: int, height: int) -> "RegionRect | None":
        """Intersection with the image, or ``None`` when it is empty."""
        x1, y1 = max(self.x, 0), max(self.y, 0)
        x2, y2 = min(self.x + self.w, width), min(self.y + self.h, height)
        if x2 <= x1 or y2 <= y1:
            return None
        return RegionRect(x1, y1, x2 - x1, y2 - y1)

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)


# -- colour ------------------------------------------------------------------


def rgb_to_hsv(r, g, b):
    """Hexcone HSV for one 8-bit pixel: hue in degrees [0, 360), s and v in [0, 1]."""
    h, s, v = rgb_to_hsv_array(np.array([[r, g, b]], dtype=np.uint8))
    return float(h[0]), float(s[0]), float(v[0])


def rgb_to_hsv_array(rgb):
    """Vectorised :func:`rgb_to_hsv` over any ``(..., 3)`` uint8 array."""
    rgb = np.asarray(rgb, dtype=float) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    vmax = rgb.max(axis=-1)
    delta = vmax - rgb.min(axis=-1)
    s = np.where(vmax > 0, delta / np.where(vmax > 0, vmax, 1.0), 0.0)
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        vmax == r,
        np.mod((g - b) / safe, 6.0),
        np.where(vmax == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, 60.0 * h, 0.0)
    h = np.where(h >= 360.0, h - 360.0, h)
    return h, s, vmax


def _uniform_bin(values, bins, upper):
    idx = np.floor(np.asarray(values, dtype=float) / upper * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def quantize_color(h, s, v, spec: QuantizerSpec = QuantizerSpec()):
    """Joint HSV bin, hue-major: ``hbin * (S * V) + sbin * V + vbin``."""
    hb = _uniform_bin(h, spec.hue_bins, 360.0)
    sb = _uniform_bin(s, spec.sat_bins, 1.0)
    vb = _uniform_bin(v, spec.val_bins, 1.0)
    idx = (hb * spec.sat_bins + sb) * spec.val_bins + vb
    return int(idx) if np.ndim(idx) == 0 else idx


def color_bin_image(img: ImageBuffer, spec: QuantizerSpec) -> np.ndarray:
    h, s, v = rgb_to_hsv_array(img.pixels)
    return quantize_color(h, s, v, spec)


# -- edges -------------------------------------------------------------------


def sobel_gradients(img: ImageBuffer) -> GradientField:
    """3x3 Sobel on the grayscale image with edge-replicated borders.

    Orientation is ``arctan(gy / gx)`` in ``(-pi/2, pi/2]``; it is ``pi/2``
    where ``gx == 0`` and ``gy != 0`` and ``0`` where both vanish.
    """
    if img.width < 3 or img.height < 3:
        raise ImageTooSmall(f"Sobel needs at least 3x3 pixels, got {img.width}x{img.height}")
    padded = np.pad(img.gray(), 1, mode="edge")
    gx, gy = _sobel_separable(padded)
    magnitude = np.hypot(gx, gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        orientation = np.arctan(gy / gx)
    orientation = np.where(gx == 0, np.where(gy == 0, 0.0, math.pi / 2), orientation)
    return GradientField(gx, gy, magnitude, orientation)


def _sobel_separable(padded):
    """Sobel as smoothing then differencing.

    Smoothing identical neighbourhoods gives bit-identical sums, so a
    gradient component across a flat direction is exactly zero.
    """
    h, w = padded.shape[0] - 2, padded.shape[1] - 2
    # [1, 2, 1] down the columns, then the horizontal difference
    sy = padded[0:h] + 2.0 * padded[1 : h + 1] + padded[2 : h + 2]
    gx = sy[:, 2 : w + 2] - sy[:, 0:w]
    sx = padded[:, 0:w] + 2.0 * padded[:, 1 : w + 1] + padded[:, 2 : w + 2]
    gy = sx[2 : h + 2] - sx[0:h]
    return gx, gy


def quantize_orientation(theta, magnitude, spec: QuantizerSpec = QuantizerSpec()):
    """Orientation bin over ``(-pi/2, pi/2]``, or ``None`` below the edge threshold.

    Array inputs give an int array with ``NO_BIN`` (-1) for non-edge pixels.
    """
    theta = np.asarray(theta, dtype=float)
    magnitude = np.asarray(magnitude, dtype=float)
    idx = _uniform_bin(theta + math.pi / 2, spec.orientation_bins, math.pi)
    idx = np.where(magnitude < spec.magnitude_threshold, NO_BIN, idx)
    if idx.ndim == 0:
        return None if idx == NO_BIN else int(idx)
    return idx


def edge_bin_image(grad: GradientField, spec: QuantizerSpec) -> np.ndarray:
    return quantize_orientation(grad.orientation, grad.magnitude, spec)


def bin_image(img: ImageBuffer, spec: QuantizerSpec, mode: str, gradients=None) -> np.ndarray:
    """Per-pixel bin index for ``mode`` ("color" or "edge"); -1 marks no bin."""
    if mode == "color":
        return color_bin_image(img, spec)
    if mode == "edge":
        if gradients is None:
            gradients = sobel_gradients(img)
        return edge_bin_image(gradients, spec)
    raise ValueError(f"unknown feature mode {mode!r}")


# -- kernel-weighted histograms ----------------------------------------------


def epanechnikov(x_norm, c=1.0):
    x_norm = np.asarray(x_norm, dtype=float)
    out = np.where(x_norm < 1.0, c * (1.0 - x_norm**2), 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_weights(region: RegionRect, clamped: RegionRect) -> np.ndarray:
    """Epanechnikov weights for the pixels of ``clamped``.

    The kernel is centred on ``region`` (which may overhang the image) with
    radius equal to its half-diagonal, so every pixel inside gets weight > 0.
    """
    cx, cy = region.center
    radius = math.hypot(region.w, region.h) / 2.0
    xs = np.arange(clamped.x, clamped.x + clamped.w) + 0.5
    ys = np.arange(clamped.y, clamped.y + clamped.h) + 0.5
    dist2 = ((xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2) / radius**2
    return epanechnikov(np.sqrt(dist2))


def weighted_histogram_from_bins(bins: np.ndarray, region: RegionRect, n_bins: int, mode="color"):
    """Kernel-weighted histogram of a precomputed bin image over ``region``."""
    height, width = bins.shape
    clamped = region.clamp(width, height)
    if clamped is None:
        raise EmptyRegion(f"{region} does not intersect a {width}x{height} image")
    patch = bins[clamped.y : clamped.y + clamped.h, clamped.x : clamped.x + clamped.w]
    weights = kernel_weights(region, clamped)
    valid = patch >= 0
    if not valid.any():
        raise AllPixelsBelowEdgeThreshold(f"no edge pixels in {region}")
    counts = np.bincount(patch[valid], weights=weights[valid], minlength=n_bins)
    return histograms.Histogram.from_counts(counts)


def weighted_region_histogram(
    img: ImageBuffer,
    region: RegionRect,
    spec: QuantizerSpec = QuantizerSpec(),
    mode: str = "color",
    gradients: GradientField | None = None,
):
    """Epanechnikov-weighted, unit-sum histogram of ``region``.

    In edge mode, pixels under the magnitude threshold are skipped and a
    region without any edge pixel raises :class:`AllPixelsBelowEdgeThreshold`.
    """
    bins = bin_image(img, spec, mode, gradients)
    return weighted_histogram_from_bins(bins, region, spec.bins_for(mode), mode)


# -- image files -------------------------------------------------------------


def _ppm_tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_ppm(path) -> ImageBuffer:
    data = Path(path).read_bytes()
    tokens, offset = _ppm_tokens(data, 4)
    if tokens[0] != b"P6":
        raise ValueError(f"{path}: not a binary PPM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PPM is supported (maxval {maxval})")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=offset)
    pixels = raster.reshape(height, width, 3)
    if maxval != 255:
        pixels = np.round(pixels.astype(float) * 255.0 / maxval).astype(np.uint8)
    return ImageBuffer(pixels)


def write_ppm(img: ImageBuffer, path) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(img.pixels.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_image(path) -> ImageBuffer:
    """Load a P6 PPM directly, anything else (PNG, ...) through Pillow."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P6":
        return read_ppm(path)
    from PIL import Image

    with Image.open(path) as im:
        return ImageBuffer(np.asarray(im.convert("RGB")))
