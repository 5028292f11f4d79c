import math

import numpy as np
import pytest

from pftrack import features as ft
from pftrack import histograms as hg
from pftrack.errors import DimensionMismatch, EmptyRegion, ZeroCount


def H(values):
    return hg.Histogram(np.asarray(values, dtype=float))


def test_histogram_validation():
    with pytest.raises(ValueError):
        H([0.5, 0.6])
    with pytest.raises(ValueError):
        H([-0.5, 1.5])
    assert hg.Histogram([2.0, 3.0], normalized=False).size == 2
    with pytest.raises(ZeroCount):
        hg.Histogram.from_counts([0, 0])
    np.testing.assert_allclose(hg.Histogram.from_counts([1, 3]).bins, [0.25, 0.75])


def test_histogram_csv(tmp_path):
    path = tmp_path / "h.csv"
    H([0.25, 0.75]).to_csv(path)
    assert path.read_text().splitlines() == ["bin,value", "0,0.25", "1,0.75"]


def test_likelihood_params_positive():
    with pytest.raises(ValueError):
        hg.LikelihoodParams(sigma_color=0)


# -- integral histogram -----------------------------------------------------------------


def naive_counts(bins, region, n_bins):
    c = np.zeros(n_bins, dtype=np.int64)
    for y in range(max(region.y, 0), min(region.y + region.h, bins.shape[0])):
        for x in range(max(region.x, 0), min(region.x + region.w, bins.shape[1])):
            if bins[y, x] >= 0:
                c[bins[y, x]] += 1
    return c


def test_one_pixel_table():
    ih = hg.IntegralHistogram.from_bins(np.array([[3]]), 5)
    assert ih.table.shape == (2, 2, 5)
    assert ih.table[1, 1].tolist() == [0, 0, 0, 1, 0]
    assert ih.table[0].sum() == 0 and ih.table[:, 0].sum() == 0


def test_table_monotone_and_full_query():
    rng = np.random.default_rng(0)
    bins = rng.integers(-1, 8, size=(13, 17))
    ih = hg.IntegralHistogram.from_bins(bins, 8)
    assert np.all(np.diff(ih.table, axis=0) >= 0)
    assert np.all(np.diff(ih.table, axis=1) >= 0)
    full = ih.counts(ft.RegionRect(0, 0, 17, 13))
    np.testing.assert_array_equal(full, np.bincount(bins[bins >= 0], minlength=8))


def test_table_is_read_only():
    ih = hg.IntegralHistogram.from_bins(np.zeros((2, 2), dtype=int), 2)
    with pytest.raises(ValueError):
        ih.table[0, 0, 0] = 5


def test_queries_match_naive_counts():
    rng = np.random.default_rng(1)
    bins = rng.integers(-1, 6, size=(20, 25))
    ih = hg.IntegralHistogram.from_bins(bins, 6)
    for _ in range(50):
        x, y = rng.integers(-5, 25), rng.integers(-5, 20)
        w, h = rng.integers(1, 15, size=2)
        r = ft.RegionRect(int(x), int(y), int(w), int(h))
        if r.clamp(25, 20) is None:
            continue
        np.testing.assert_array_equal(ih.counts(r), naive_counts(bins, r, 6))


def test_tiling_additivity():
    rng = np.random.default_rng(2)
    bins = rng.integers(0, 4, size=(10, 12))
    ih = hg.IntegralHistogram.from_bins(bins, 4)
    whole = ih.counts(ft.RegionRect(2, 1, 8, 7))
    left = ih.counts(ft.RegionRect(2, 1, 3, 7))
    right = ih.counts(ft.RegionRect(5, 1, 5, 7))
    np.testing.assert_array_equal(left + right, whole)


def test_counts_many_batches_and_clamps():
    rng = np.random.default_rng(3)
    bins = rng.integers(0, 5, size=(9, 9))
    ih = hg.IntegralHistogram.from_bins(bins, 5)
    xs, ys, ws, hs = [0, 4, -3, 20], [0, 2, -3, 0], [9, 3, 5, 4], [9, 3, 5, 4]
    out = ih.counts_many(xs, ys, ws, hs)
    assert out.shape == (4, 5)
    for k in range(3):
        np.testing.assert_array_equal(out[k], naive_counts(bins, ft.RegionRect(xs[k], ys[k], ws[k], hs[k]), 5))
    assert out[3].sum() == 0


def test_query_errors():
    bins = np.full((6, 6), -1)
    bins[0, 0] = 1
    ih = hg.IntegralHistogram.from_bins(bins, 3, mode="edge")
    with pytest.raises(EmptyRegion):
        ih.counts(ft.RegionRect(10, 10, 2, 2))
    with pytest.raises(ZeroCount):
        hg.region_histogram_query(ih, ft.RegionRect(2, 2, 3, 3))
    h = hg.region_histogram_query(ih, ft.RegionRect(0, 0, 6, 6))
    assert h.bins.tolist() == [0.0, 1.0, 0.0]


def test_build_from_image_both_modes():
    rng = np.random.default_rng(4)
    img = ft.ImageBuffer(rng.integers(0, 256, size=(12, 14, 3), dtype=np.uint8))
    spec = ft.QuantizerSpec()
    for mode in ("color", "edge"):
        ih = hg.build_integral_histogram(img, spec, mode)
        assert ih.n_bins == spec.bins_for(mode)
        assert (ih.width, ih.height) == (14, 12)
        bins = ft.bin_image(img, spec, mode)
        np.testing.assert_array_equal(
            ih.counts(ft.RegionRect(0, 0, 14, 12)), np.bincount(bins[bins >= 0], minlength=ih.n_bins)
        )


def test_kernel_counts_single_ring_is_plain_count():
    rng = np.random.default_rng(5)
    bins = rng.integers(0, 4, size=(30, 30))
    ih = hg.IntegralHistogram.from_bins(bins, 4)
    plain = ih.counts_many([3], [4], [20], [16])
    np.testing.assert_array_equal(ih.kernel_counts_many([3], [4], [20], [16], rings=1), plain)


def test_kernel_counts_rings_track_kernel_histogram():
    # a centred blob of bin 1 on bin 0: the staircase weighting sits between
    # the flat count and the exact kernel-weighted histogram
    bins = np.zeros((40, 40), dtype=int)
    bins[14:26, 14:26] = 1
    ih = hg.IntegralHistogram.from_bins(bins, 2)
    region = ft.RegionRect(5, 5, 30, 30)
    flat = ih.counts(region) / ih.counts(region).sum()
    ringed = ih.kernel_counts_many([5], [5], [30], [30], rings=4)[0]
    ringed = ringed / ringed.sum()
    exact = ft.weighted_histogram_from_bins(bins, region, 2).bins
    assert flat[1] < ringed[1]
    assert abs(ringed[1] - exact[1]) < abs(flat[1] - exact[1])


def test_ring_coefficients_decrease_outward():
    fractions, coeffs = hg.ring_coefficients(4, 1.0)
    assert fractions.tolist() == [1.0, 0.75, 0.5, 0.25]
    assert np.all(coeffs > 0)
    # the innermost ring weight is close to the kernel peak
    assert 0.9 < coeffs.sum() <= 1.0


# -- Bhattacharyya and likelihoods ---------------------------------------------------------


def test_bhattacharyya_examples():
    p = H([0.5, 0.5])
    q = H([1.0, 0.0])
    assert hg.bhattacharyya_coefficient(p, p) == pytest.approx(1.0)
    assert hg.bhattacharyya_coefficient(H([1, 0]), H([0, 1])) == 0.0
    assert hg.bhattacharyya_coefficient(p, q) == pytest.approx(0.7071, abs=1e-4)
    assert hg.bhattacharyya_distance(p, p) == pytest.approx(0.0, abs=1e-7)
    assert hg.bhattacharyya_distance(H([1, 0]), H([0, 1])) == 1.0
    assert hg.bhattacharyya_distance(p, q) == pytest.approx(0.5412, abs=1e-4)


def test_bhattacharyya_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        hg.bhattacharyya_coefficient(H([1.0]), H([0.5, 0.5]))
    with pytest.raises(DimensionMismatch):
        hg.bhattacharyya_many(np.ones((2, 3)) / 3, np.ones(2) / 2)


def test_bhattacharyya_many_matches_scalar():
    rng = np.random.default_rng(6)
    cands = rng.dirichlet(np.ones(8), size=5)
    t = rng.dirichlet(np.ones(8))
    many = hg.bhattacharyya_many(cands, t)
    for k in range(5):
        assert many[k] == pytest.approx(hg.bhattacharyya_coefficient(H(cands[k]), H(t)))


def test_color_likelihood_examples():
    assert hg.color_likelihood(0.0) == pytest.approx(1.9947, abs=1e-4)
    assert hg.color_likelihood(1.0) == pytest.approx(7.44e-6, rel=1e-3)
    assert hg.color_likelihood(0.0) == pytest.approx(1 / (math.sqrt(2 * math.pi) * 0.2))
    d = np.linspace(0, 1, 50)
    assert np.all(np.diff(hg.color_likelihood(d)) < 0)


def test_edge_likelihood_examples():
    assert hg.edge_likelihood(1.0) == pytest.approx(1.3298, abs=1e-4)
    # 1.3298 * exp(-5.5556) = 5.141e-3; the rounded target 5.13e-3 is within 2e-5
    assert hg.edge_likelihood(0.0) == pytest.approx(1.3298 * math.exp(-0.5 / 0.09), rel=1e-4)
    assert hg.edge_likelihood(0.0) == pytest.approx(5.13e-3, abs=2e-5)
    rho = np.linspace(0, 1, 50)
    assert np.all(np.diff(hg.edge_likelihood(rho)) > 0)
