"""Histograms, integral histograms and the Bhattacharyya-based likelihoods.

An :class:`IntegralHistogram` stores, for every bin ``n``, the number of
pixels of bin ``n`` in the rectangle ``[0, x) x [0, y)``.  The table is
pixel-major, shape ``(height + 1, width + 1, M)``, so the ``M`` counts of one
corner are contiguous and a rectangle query gathers four rows.  Building costs
one scatter over the pixels plus two cumulative sums over the
``(H + 1) * (W + 1) * M`` table; a query costs ``O(M)`` regardless of area.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import features
from .errors import DimensionMismatch, EmptyRegion, ZeroCount

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class Histogram:
    bins: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        bins = np.array(self.bins, dtype=float).reshape(-1)
        if bins.size < 1:
            raise ValueError("a histogram needs at least one bin")
        if np.any(bins < 0) or not np.all(np.isfinite(bins)):
            raise ValueError("histogram bins must be finite and nonnegative")
        if self.normalized and abs(bins.sum() - 1.0) > 1e-9:
            raise ValueError(f"normalized histogram sums to {bins.sum()!r}")
        bins.flags.writeable = False
        object.__setattr__(self, "bins", bins)

    @classmethod
    def from_counts(cls, counts) -> "Histogram":
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if not total > 0:
            raise ZeroCount("cannot normalize an empty histogram")
        return cls(counts / total)

    @property
    def size(self) -> int:
        return self.bins.size

    def __len__(self):
        return self.bins.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["bin", "value"])
            for n, value in enumerate(self.bins):
                out.writerow([n, repr(float(value))])


@dataclass(frozen=True)
class LikelihoodParams:
    sigma_color: float = 0.2
    sigma_edge: float = 0.3

    def __post_init__(self):
        if self.sigma_color <= 0 or self.sigma_edge <= 0:
            raise ValueError("likelihood sigmas must be positive")


class IntegralHistogram:
    """Cumulative per-bin counts of one image under one quantizer and mode."""

    def __init__(self, table: np.ndarray, spec: features.QuantizerSpec, mode: str):
        self.table = table
        self.table.flags.writeable = False
        self.spec = spec
        self.mode = mode

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def n_bins(self) -> int:
        return self.table.shape[2]

    @classmethod
    def from_bins(cls, bins: np.ndarray, n_bins: int, spec=None, mode="color"):
        height, width = bins.shape
        dtype = np.int32 if height * width < 2**31 else np.int64
        table = np.empty((height + 1, width + 1, n_bins), dtype=dtype)
        table[0] = 0
        row = np.zeros((width + 1, n_bins), dtype=dtype)
        cols = np.arange(1, width + 1)
        for y in range(height):
            # row[x] = counts of row y over [0, x), added onto the row above
            row[:] = 0
            valid = bins[y] >= 0
            row[cols[valid], bins[y][valid]] = 1
            np.cumsum(row, axis=0, out=row)
            np.add(table[y], row, out=table[y + 1])
        return cls(table, spec, mode)

    def _corners(self, x, y, w, h):
        """Clamp rectangles given as arrays; returns corner arrays and a validity mask."""
        x1 = np.clip(x, 0, self.width)
        y1 = np.clip(y, 0, self.height)
        x2 = np.clip(np.asarray(x) + w, 0, self.width)
        y2 = np.clip(np.asarray(y) + h, 0, self.height)
        return x1, y1, x2, y2, (x2 > x1) & (y2 > y1)

    def counts_many(self, x, y, w, h) -> np.ndarray:
        """Integer bin counts for a batch of rectangles, shape ``(P, M)``.

        Rectangles are clamped to the image; fully outside ones give zeros.
        """
        x1, y1, x2, y2, _ = self._corners(
            np.asarray(x, dtype=np.int64),
            np.asarray(y, dtype=np.int64),
            np.asarray(w, dtype=np.int64),
            np.asarray(h, dtype=np.int64),
        )
        t = self.table
        counts = t[y2, x2].astype(np.int64)
        counts -= t[y2, x1]
        counts -= t[y1, x2]
        counts += t[y1, x1]
        return counts

    def kernel_counts_many(self, x, y, w, h, rings: int = 3, aspect: float | None = None) -> np.ndarray:
        """Approximately kernel-weighted counts from ``rings`` concentric rectangles.

        The Epanechnikov profile is replaced by a staircase: rectangle ``j``
        covers the central ``(R - j) / R`` of each window and adds the step
        between neighbouring ring weights.  ``rings = 1`` is the plain count.
        """
        x, y, w, h = (np.asarray(v, dtype=np.int64) for v in (x, y, w, h))
        if rings <= 1:
            return self.counts_many(x, y, w, h).astype(float)
        if aspect is None:
            aspect = float(np.median(h / np.maximum(w, 1))) if w.size else 1.0
        fractions, coeffs = ring_coefficients(rings, aspect)
        out = np.zeros((x.size, self.n_bins))
        for f, c in zip(fractions, coeffs):
            wj = np.maximum(1, np.rint(w * f).astype(np.int64))
            hj = np.maximum(1, np.rint(h * f).astype(np.int64))
            out += c * self.counts_many(x + (w - wj) // 2, y + (h - hj) // 2, wj, hj)
        return out

    def counts(self, region: features.RegionRect) -> np.ndarray:
        clamped = region.clamp(self.width, self.height)
        if clamped is None:
            raise EmptyRegion(f"{region} does not intersect a {self.width}x{self.height} image")
        return self.counts_many([clamped.x], [clamped.y], [clamped.w], [clamped.h])[0]


_RING_CACHE: dict = {}


def ring_coefficients(rings: int, aspect: float = 1.0):
    """Rectangle fractions and weights of the staircase kernel approximation.

    Ring ``j`` (between the rectangles at fractions ``(R-j)/R`` and
    ``(R-j-1)/R``) is given the mean Epanechnikov weight of its pixels in a
    window of height/width ratio ``aspect``.  Returns ``(fractions, coeffs)``
    where ``coeffs[j]`` is the increment added by rectangle ``j``.
    """
    key = (rings, round(aspect, 2))
    if key not in _RING_CACHE:
        n = 200
        gx = (np.arange(n) + 0.5) / n - 0.5
        gy = gx * key[1]
        X, Y = np.meshgrid(gx, gy)
        radius = math.hypot(0.5, 0.5 * key[1])
        k = features.epanechnikov(np.sqrt(X**2 + Y**2) / radius)
        # Chebyshev-style level: which concentric rectangle a sample sits in
        level = np.maximum(np.abs(X) / 0.5, np.abs(Y) / (0.5 * key[1]))
        ring = np.minimum((level * rings).astype(int), rings - 1)
        ring_mean = np.array([k[ring == rings - 1 - j].mean() for j in range(rings)])
        # ring_mean is ordered outermost first
        fractions = np.array([(rings - j) / rings for j in range(rings)])
        coeffs = np.diff(ring_mean, prepend=0.0)
        _RING_CACHE[key] = (fractions, coeffs)
    return _RING_CACHE[key]


def build_integral_histogram(
    img: features.ImageBuffer,
    spec: features.QuantizerSpec | None = None,
    mode: str = "color",
    gradients: features.GradientField | None = None,
) -> IntegralHistogram:
    spec = spec or features.QuantizerSpec()
    bins = features.bin_image(img, spec, mode, gradients)
    return IntegralHistogram.from_bins(bins, spec.bins_for(mode), spec, mode)


def region_histogram_query(ih: IntegralHistogram, region: features.RegionRect) -> Histogram:
    """Unweighted histogram of ``region`` by four-corner inclusion-exclusion."""
    counts = ih.counts(region)
    if counts.sum() == 0:
        raise ZeroCount(f"no {ih.mode} pixels counted in {region}")
    return Histogram.from_counts(counts)


def _check_pair(p: Histogram, q: Histogram):
    if p.size != q.size:
        raise DimensionMismatch(f"histograms have {p.size} and {q.size} bins")


def bhattacharyya_coefficient(p: Histogram, q: Histogram) -> float:
    _check_pair(p, q)
    rho = float(np.sum(np.sqrt(p.bins * q.bins)))
    return min(max(rho, 0.0), 1.0)


def bhattacharyya_distance(p: Histogram, q: Histogram) -> float:
    return math.sqrt(max(0.0, 1.0 - bhattacharyya_coefficient(p, q)))


def bhattacharyya_many(candidates: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Row-wise coefficient between a ``(P, M)`` batch and one ``(M,)`` template."""
    candidates = np.asarray(candidates, dtype=float)
    template = np.asarray(template, dtype=float)
    if candidates.shape[-1] != template.shape[-1]:
        raise DimensionMismatch(
            f"histograms have {candidates.shape[-1]} and {template.shape[-1]} bins"
        )
    return np.clip(np.sqrt(candidates * template).sum(axis=-1), 0.0, 1.0)


def color_likelihood(d, params: LikelihoodParams = LikelihoodParams()):
    """Gaussian in the Bhattacharyya distance ``d``."""
    s = params.sigma_color
    out = np.exp(-np.asarray(d, dtype=float) ** 2 / (2.0 * s * s)) / (SQRT_2PI * s)
    return float(out) if out.ndim == 0 else out


def edge_likelihood(rho_m, params: LikelihoodParams = LikelihoodParams()):
    """Gaussian-shaped score in ``1 - rho_m`` (not squared)."""
    s = params.sigma_edge
    out = np.exp(-(1.0 - np.asarray(rho_m, dtype=float)) / (2.0 * s * s)) / (SQRT_2PI * s)
    return float(out) if out.ndim == 0 else out
