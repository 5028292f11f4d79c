"""Colour + edge particle-filter tracker.

Each particle carries its last two window states ``(cx, cy, scale)`` so the
second-order autoregressive motion model can be applied per particle; the
state vector is ``[cx, cy, scale, cx_prev, cy_prev, scale_prev]``.

Per frame: propagate, score every particle window against the colour and edge
templates, fuse the two likelihoods with weights ``theta_color`` and
``theta_edge``, update weights, take the weighted mean as the estimate,
resample when the effective sample size drops, then adapt the fusion weights,
the reported window size and (when the filter is confident) the templates.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from . import features as ft
from . import filter_core as fc
from . import histograms as hg
from .errors import AllZeroWeights, DimensionMismatch, EmptyRegion, TargetLost, ZeroCount

log = logging.getLogger(__name__)

SCALE_MIN, SCALE_MAX = 0.2, 5.0


@dataclass(frozen=True)
class TargetState:
    cx: float
    cy: float
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scale", float(np.clip(self.scale, SCALE_MIN, SCALE_MAX)))

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.scale])

    def rect(self, window0) -> tuple[float, float, float, float]:
        """Window ``(x, y, w, h)`` for a base window size ``(w0, h0)``."""
        w, h = window0[0] * self.scale, window0[1] * self.scale
        return (self.cx - w / 2.0, self.cy - h / 2.0, w, h)


@dataclass(frozen=True)
class MotionModel:
    phi1: float = 2.0
    phi2: float = -1.0
    noise_std_pos: float = 8.0
    noise_std_scale: float = 0.02

    def is_stationary(self) -> bool:
        """True inside the AR(2) stationarity triangle."""
        return (
            self.phi1 + self.phi2 < 1.0
            and self.phi2 - self.phi1 < 1.0
            and abs(self.phi2) < 1.0
        )

    def check_stationarity(self) -> bool:
        ok = self.is_stationary()
        if not ok:
            log.warning(
                "AR(2) coefficients (%g, %g) are outside the stationary region",
                self.phi1,
                self.phi2,
            )
        return ok

    @property
    def noise_std(self) -> np.ndarray:
        return np.array([self.noise_std_pos, self.noise_std_pos, self.noise_std_scale])


@dataclass(frozen=True)
class TrackerConfig:
    particle_count: int = 100
    resample: fc.ResampleConfig = field(default_factory=fc.ResampleConfig)
    likelihood: hg.LikelihoodParams = field(default_factory=hg.LikelihoodParams)
    quantizer: ft.QuantizerSpec = field(default_factory=ft.QuantizerSpec)
    motion: MotionModel = field(default_factory=MotionModel)
    tau_inv: float = 0.1
    fusion_smoothing: float = 0.7
    scale_clamp: tuple[float, float] = (0.95, 1.05)
    fast_histogram: bool = True
    kernel_rings: int = 3
    seed: int = 0
    resampling: str = "improved"
    theta_color: float = 0.5
    adapt_fusion: bool = True
    update_templates: bool = True
    update_gate: float = 0.5
    normalize_likelihoods: bool = False

    def __post_init__(self):
        if self.particle_count < 1:
            raise ValueError("particle_count must be >= 1")
        if not 0.0 <= self.tau_inv <= 1.0:
            raise ValueError("tau_inv must lie in [0, 1]")
        if not 0.0 <= self.fusion_smoothing <= 1.0:
            raise ValueError("fusion_smoothing must lie in [0, 1]")
        if not 0.0 <= self.theta_color <= 1.0:
            raise ValueError("theta_color must lie in [0, 1]")
        lo, hi = self.scale_clamp
        if not 0.0 < lo <= 1.0 <= hi:
            raise ValueError("scale_clamp must bracket 1")
        if self.kernel_rings < 1:
            raise ValueError("kernel_rings must be >= 1")
        if self.resampling not in ("improved", "traditional"):
            raise ValueError(f"unknown resampling {self.resampling!r}")

    def color_only(self) -> "TrackerConfig":
        """Baseline with the edge cue switched off and no fusion adaptation."""
        return dataclasses.replace(self, theta_color=1.0, adapt_fusion=False)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrackerConfig":
        data = dict(data)
        nested = {
            "resample": fc.ResampleConfig,
            "likelihood": hg.LikelihoodParams,
            "quantizer": ft.QuantizerSpec,
            "motion": MotionModel,
        }
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown tracker config keys: {sorted(unknown)}")
        for key, kind in nested.items():
            if key in data and isinstance(data[key], dict):
                data[key] = kind(**data[key])
        if "scale_clamp" in data:
            data["scale_clamp"] = tuple(data["scale_clamp"])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "TrackerConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class TargetTemplate:
    color_initial: hg.Histogram
    color_current: hg.Histogram
    edge_initial: hg.Histogram | None
    edge_current: hg.Histogram | None
    theta_color: float
    theta_edge: float
    tau_inv: float
    spread_baseline: float
    window0: tuple[float, float]

    def __post_init__(self):
        if abs(self.theta_color + self.theta_edge - 1.0) > 1e-12:
            raise ValueError("fusion weights must sum to 1")
        if not 0.0 <= self.tau_inv <= 1.0:
            raise ValueError("tau_inv must lie in [0, 1]")


@dataclass
class FrameResult:
    frame: int
    state: TargetState
    rect: tuple[float, float, float, float]
    ess: float
    theta_color: float
    d_color: float
    rho_edge: float
    resampled: bool
    lost: bool = False
    weights: np.ndarray | None = None


# -- model pieces -------------------------------------------------------------


def propagate(history: Sequence[TargetState], model: MotionModel, noise=(0.0, 0.0, 0.0)) -> TargetState:
    """One AR(2) step from ``history = (state_{t-1}, state_{t-2})``."""
    prev, prev2 = history
    nxt = model.phi1 * prev.as_array() + model.phi2 * prev2.as_array() + np.asarray(noise, dtype=float)
    return TargetState(*nxt)


def propagate_particles(states: np.ndarray, model: MotionModel, noise: np.ndarray, scale_clamp=None) -> np.ndarray:
    """AR(2) step for every particle row ``[cx, cy, s, cx_prev, cy_prev, s_prev]``.

    With ``scale_clamp = (lo, hi)`` each particle's scale moves by at most
    that factor per frame.
    """
    cur, prev = states[:, :3], states[:, 3:]
    nxt = model.phi1 * cur + model.phi2 * prev + noise
    if scale_clamp is not None:
        nxt[:, 2] = np.clip(nxt[:, 2], cur[:, 2] * scale_clamp[0], cur[:, 2] * scale_clamp[1])
    nxt[:, 2] = np.clip(nxt[:, 2], SCALE_MIN, SCALE_MAX)
    return np.hstack([nxt, cur])


def _peak(sigma):
    return 1.0 / (math.sqrt(2.0 * math.pi) * sigma)


def fused_likelihoods(rho_color, rho_edge, theta_color, theta_edge, params, normalize=False):
    """Vectorised fused likelihood from Bhattacharyya coefficients."""
    d = np.sqrt(np.clip(1.0 - np.asarray(rho_color, dtype=float), 0.0, None))
    p_color = hg.color_likelihood(d, params)
    p_edge = hg.edge_likelihood(rho_edge, params)
    if normalize:
        p_color = p_color / _peak(params.sigma_color)
        p_edge = p_edge / _peak(params.sigma_edge)
    return theta_color * p_color + theta_edge * p_edge


def fused_likelihood(
    color_hist: hg.Histogram,
    edge_hist: hg.Histogram | None,
    template: TargetTemplate,
    params: hg.LikelihoodParams = hg.LikelihoodParams(),
    normalize: bool = False,
) -> float:
    """Fused likelihood of one candidate; a missing edge histogram scores rho = 0."""
    rho_c = hg.bhattacharyya_coefficient(color_hist, template.color_current)
    if edge_hist is None or template.edge_current is None:
        log.debug("no edge pixels in candidate; edge term uses rho = 0")
        rho_e = 0.0
    else:
        rho_e = hg.bhattacharyya_coefficient(edge_hist, template.edge_current)
    return float(
        fused_likelihoods(rho_c, rho_e, template.theta_color, template.theta_edge, params, normalize)
    )


def update_particle_weights(pset: fc.ParticleSet, fused) -> fc.ParticleSet:
    return fc.sis_weight_update(pset, fused)


def adapt_fusion_weights(template: TargetTemplate, rho_color: float, rho_edge: float, alpha: float) -> TargetTemplate:
    """Pull the fusion weights toward each cue's similarity share, EMA-smoothed."""
    total = rho_color + rho_edge
    if total <= 0:
        return template
    raw = rho_color / total
    theta_c = alpha * template.theta_color + (1.0 - alpha) * raw
    theta_e = alpha * template.theta_edge + (1.0 - alpha) * (1.0 - raw)
    s = theta_c + theta_e
    theta_c = theta_c / s
    return dataclasses.replace(template, theta_color=theta_c, theta_edge=1.0 - theta_c)


def blend_histograms(old: hg.Histogram, current: hg.Histogram, tau_inv: float) -> hg.Histogram:
    if old.size != current.size:
        raise DimensionMismatch(f"histograms have {old.size} and {current.size} bins")
    mixed = tau_inv * old.bins + (1.0 - tau_inv) * current.bins
    return hg.Histogram(mixed / mixed.sum())


def update_template(
    template: TargetTemplate,
    color_hist: hg.Histogram | None,
    edge_hist: hg.Histogram | None = None,
) -> TargetTemplate:
    """Blend the frame-0 templates with histograms measured at the estimate.

    Each cue is updated independently; a cue whose current histogram is
    missing keeps its template.
    """
    color = template.color_current
    if color_hist is not None:
        color = blend_histograms(template.color_initial, color_hist, template.tau_inv)
    edge = template.edge_current
    if edge_hist is not None and template.edge_initial is not None:
        edge = blend_histograms(template.edge_initial, edge_hist, template.tau_inv)
    return dataclasses.replace(template, color_current=color, edge_current=edge)


def particle_spread(pset: fc.ParticleSet, center) -> float:
    """Weighted mean distance of particle centres from ``center``."""
    d = np.hypot(pset.states[:, 0] - center[0], pset.states[:, 1] - center[1])
    return float(pset.weights @ d)


def adapt_window(
    pset: fc.ParticleSet,
    estimate: TargetState,
    template: TargetTemplate,
    clamp=(0.95, 1.05),
) -> TargetState:
    """Rescale the estimate by the particle spread relative to its baseline."""
    spread = particle_spread(pset, (estimate.cx, estimate.cy))
    if template.spread_baseline <= 0:
        return estimate
    factor = float(np.clip(spread / template.spread_baseline, clamp[0], clamp[1]))
    return TargetState(estimate.cx, estimate.cy, estimate.scale * factor)


# -- tracker ------------------------------------------------------------------


class _FrameFeatures:
    """Bin images and (optionally) integral histograms of one frame."""

    def __init__(self, frame: ft.ImageBuffer, cfg: TrackerConfig, need_edge: bool):
        q = cfg.quantizer
        self.width, self.height = frame.width, frame.height
        self.color_bins = ft.color_bin_image(frame, q)
        self.edge_bins = None
        if need_edge:
            self.edge_bins = ft.edge_bin_image(ft.sobel_gradients(frame), q)
        self.color_ih = self.edge_ih = None
        if cfg.fast_histogram:
            self.color_ih = hg.IntegralHistogram.from_bins(self.color_bins, q.color_bins, q, "color")
            if need_edge:
                self.edge_ih = hg.IntegralHistogram.from_bins(
                    self.edge_bins, q.orientation_bins, q, "edge"
                )


def _windows(states: np.ndarray, window0) -> tuple[np.ndarray, ...]:
    w = np.maximum(1, np.rint(window0[0] * states[:, 2])).astype(np.int64)
    h = np.maximum(1, np.rint(window0[1] * states[:, 2])).astype(np.int64)
    x = np.floor(states[:, 0] - w / 2.0 + 0.5).astype(np.int64)
    y = np.floor(states[:, 1] - h / 2.0 + 0.5).astype(np.int64)
    return x, y, w, h


def _normalize_rows(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1, keepdims=True).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 0.0)


class Tracker:
    """Single-target tracker; call :meth:`initialize` then :meth:`track_frame`.

    ``threads > 1`` scores particle chunks on a thread pool.  Scoring only
    reads the frame's histograms, so results do not depend on ``threads``.
    """

    def __init__(self, cfg: TrackerConfig = TrackerConfig(), threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.cfg = cfg
        self.threads = threads
        self._pool = ThreadPoolExecutor(threads) if threads > 1 else None
        cfg.motion.check_stationarity()
        self.rng = np.random.default_rng(cfg.seed)
        self.template: TargetTemplate | None = None
        self.particles: fc.ParticleSet | None = None
        self.estimate: TargetState | None = None
        self.confident: TargetState | None = None
        self.frame_index = 0
        self._zero_streak = 0

    @property
    def need_edge(self) -> bool:
        t = self.template
        if t is None:
            return self.cfg.theta_color < 1.0 or self.cfg.adapt_fusion
        return t.theta_edge > 0 or self.cfg.adapt_fusion

    # -- histograms ------------------------------------------------------

    def _candidate_histograms(self, feats: _FrameFeatures, states: np.ndarray):
        """Per-particle colour and edge histograms as ``(P, M)`` arrays."""
        if self._pool is not None and len(states) >= 2 * self.threads:
            chunks = np.array_split(states, self.threads)
            parts = list(self._pool.map(lambda c: self._histograms_serial(feats, c), chunks))
            color = np.vstack([c for c, _ in parts])
            edge = None if parts[0][1] is None else np.vstack([e for _, e in parts])
            return color, edge
        return self._histograms_serial(feats, states)

    def _histograms_serial(self, feats: _FrameFeatures, states: np.ndarray):
        x, y, w, h = _windows(states, self.template.window0)
        q = self.cfg.quantizer
        edge = None
        if self.cfg.fast_histogram:
            rings = self.cfg.kernel_rings
            w0, h0 = self.template.window0
            color = _normalize_rows(feats.color_ih.kernel_counts_many(x, y, w, h, rings, h0 / w0))
            if feats.edge_ih is not None:
                edge = _normalize_rows(feats.edge_ih.kernel_counts_many(x, y, w, h, rings, h0 / w0))
            return color, edge
        color = np.zeros((len(states), q.color_bins))
        if feats.edge_bins is not None:
            edge = np.zeros((len(states), q.orientation_bins))
        for i in range(len(states)):
            rect = ft.RegionRect(int(x[i]), int(y[i]), int(w[i]), int(h[i]))
            try:
                color[i] = ft.weighted_histogram_from_bins(feats.color_bins, rect, q.color_bins).bins
            except (EmptyRegion, ZeroCount):
                pass
            if edge is not None:
                try:
                    edge[i] = ft.weighted_histogram_from_bins(
                        feats.edge_bins, rect, q.orientation_bins, "edge"
                    ).bins
                except (EmptyRegion, ZeroCount):
                    pass
        return color, edge

    def _likelihoods(self, feats: _FrameFeatures, states: np.ndarray):
        color, edge = self._candidate_histograms(feats, states)
        t = self.template
        rho_c = hg.bhattacharyya_many(color, t.color_current.bins)
        if edge is None or t.edge_current is None:
            rho_e = np.zeros(len(states))
        else:
            rho_e = hg.bhattacharyya_many(edge, t.edge_current.bins)
        lik = fused_likelihoods(
            rho_c, rho_e, t.theta_color, t.theta_edge, self.cfg.likelihood, self.cfg.normalize_likelihoods
        )
        return lik, rho_c, rho_e

    def _estimate_histograms(self, feats: _FrameFeatures, state: TargetState):
        """Kernel-weighted histograms at ``state``'s window (template space)."""
        x, y, w, h = _windows(state.as_array()[None, :], self.template.window0)
        rect = ft.RegionRect(int(x[0]), int(y[0]), int(w[0]), int(h[0]))
        q = self.cfg.quantizer
        try:
            color = ft.weighted_histogram_from_bins(feats.color_bins, rect, q.color_bins)
        except (EmptyRegion, ZeroCount):
            color = None
        edge = None
        if feats.edge_bins is not None:
            try:
                edge = ft.weighted_histogram_from_bins(feats.edge_bins, rect, q.orientation_bins, "edge")
            except (EmptyRegion, ZeroCount):
                edge = None
        return color, edge

    # -- lifecycle -------------------------------------------------------

    def initialize(self, frame: ft.ImageBuffer, rect) -> FrameResult:
        """Build the templates from ``rect = (x, y, w, h)`` and seed the particles."""
        cfg = self.cfg
        x, y, w, h = (float(v) for v in rect)
        region = ft.RegionRect(int(round(x)), int(round(y)), max(1, int(round(w))), max(1, int(round(h))))
        q = cfg.quantizer
        color0 = ft.weighted_region_histogram(frame, region, q, "color")
        try:
            edge0 = ft.weighted_region_histogram(frame, region, q, "edge")
        except ZeroCount:
            log.warning("initial window has no edge pixels; tracking with colour only")
            edge0 = None
        theta_c = cfg.theta_color if edge0 is not None else 1.0
        center = TargetState(x + w / 2.0, y + h / 2.0, 1.0)

        n = cfg.particle_count
        cur = center.as_array() + self.rng.standard_normal((n, 3)) * cfg.motion.noise_std
        cur[:, 2] = np.clip(cur[:, 2], SCALE_MIN, SCALE_MAX)
        self.particles = fc.ParticleSet.uniform(np.hstack([cur, cur]))
        self.template = TargetTemplate(
            color_initial=color0,
            color_current=color0,
            edge_initial=edge0,
            edge_current=edge0,
            theta_color=theta_c,
            theta_edge=1.0 - theta_c,
            tau_inv=cfg.tau_inv,
            spread_baseline=particle_spread(self.particles, (center.cx, center.cy)),
            window0=(float(region.w), float(region.h)),
        )
        self.estimate = self.confident = center
        self.frame_index = 0
        self._zero_streak = 0
        return FrameResult(
            frame=0,
            state=center,
            rect=center.rect(self.template.window0),
            ess=float(n),
            theta_color=self.template.theta_color,
            d_color=0.0,
            rho_edge=1.0 if edge0 is not None else 0.0,
            resampled=False,
            weights=self.particles.weights.copy(),
        )

    def _rediffuse(self):
        cfg = self.cfg
        n = cfg.particle_count
        c = self.confident.as_array()
        std = cfg.motion.noise_std * 2.0
        cur = c + self.rng.standard_normal((n, 3)) * std
        cur[:, 2] = np.clip(cur[:, 2], SCALE_MIN, SCALE_MAX)
        self.particles = fc.ParticleSet.uniform(np.hstack([cur, cur]))

    def track_frame(self, frame: ft.ImageBuffer) -> FrameResult:
        if self.template is None:
            raise RuntimeError("tracker is not initialized")
        cfg = self.cfg
        n = len(self.particles)
        self.frame_index += 1
        feats = _FrameFeatures(frame, cfg, self.need_edge)

        noise = self.rng.standard_normal((n, 3)) * cfg.motion.noise_std
        resample_seed = int(self.rng.integers(2**32))
        states = propagate_particles(self.particles.states, cfg.motion, noise, cfg.scale_clamp)
        prior = fc.ParticleSet(states, self.particles.weights, normalized=True)

        lik, _, _ = self._likelihoods(feats, states)
        try:
            post = update_particle_weights(prior, lik)
            self._zero_streak = 0
        except AllZeroWeights:
            self._zero_streak += 1
            if self._zero_streak >= 2:
                raise TargetLost(f"all particle weights vanished twice (frame {self.frame_index})")
            log.info("frame %d: all weights zero, re-diffusing particles", self.frame_index)
            self._rediffuse()
            state = self.confident
            return FrameResult(
                frame=self.frame_index,
                state=state,
                rect=state.rect(self.template.window0),
                ess=0.0,
                theta_color=self.template.theta_color,
                d_color=1.0,
                rho_edge=0.0,
                resampled=False,
                lost=True,
                weights=self.particles.weights.copy(),
            )

        est = TargetState(*fc.estimate_posterior(post)[:3])
        ess = fc.effective_sample_size(post)

        resampled = False
        if fc.needs_resampling(post, cfg.resample):
            weight_fn = self._posterior_weight_fn(feats, prior.weights, lik)
            post = fc.resample(post, cfg.resampling, cfg.resample, resample_seed, weight_fn)
            resampled = True
        self.particles = post

        color_est, edge_est = self._estimate_histograms(feats, est)
        t = self.template
        rho_c = hg.bhattacharyya_coefficient(color_est, t.color_current) if color_est is not None else 0.0
        rho_e = 0.0
        if edge_est is not None and t.edge_current is not None:
            rho_e = hg.bhattacharyya_coefficient(edge_est, t.edge_current)
        if cfg.adapt_fusion and t.edge_current is not None:
            self.template = adapt_fusion_weights(t, rho_c, rho_e, cfg.fusion_smoothing)

        est = adapt_window(post, est, self.template, cfg.scale_clamp)
        # the reported window never changes size faster than the clamp allows
        prev_scale = self.estimate.scale
        est = TargetState(
            est.cx, est.cy, float(np.clip(est.scale, prev_scale * cfg.scale_clamp[0], prev_scale * cfg.scale_clamp[1]))
        )
        confident = ess > cfg.update_gate * n
        if confident:
            self.confident = est
            if cfg.update_templates:
                self.template = update_template(self.template, color_est, edge_est)
        self.estimate = est
        log.debug(
            "frame %d: est=(%.1f, %.1f, %.3f) ess=%.1f theta_c=%.3f",
            self.frame_index, est.cx, est.cy, est.scale, ess, self.template.theta_color,
        )
        return FrameResult(
            frame=self.frame_index,
            state=est,
            rect=est.rect(self.template.window0),
            ess=ess,
            theta_color=self.template.theta_color,
            d_color=math.sqrt(max(0.0, 1.0 - rho_c)),
            rho_edge=rho_e,
            resampled=resampled,
            weights=self.particles.weights.copy(),
        )

    def _posterior_weight_fn(self, feats, prior_weights, likelihoods):
        """Weight a proposal would carry after this frame's update.

        Proposals are credited with the average prior mass ``1/N``.
        """
        evidence = float(np.dot(prior_weights, likelihoods))
        n = len(prior_weights)

        def weight_fn(states):
            lik, _, _ = self._likelihoods(feats, np.asarray(states, dtype=float))
            return lik / (n * evidence)

        return weight_fn


def track_sequence(frames, init_rect, cfg: TrackerConfig = TrackerConfig(), threads: int = 1) -> list[FrameResult]:
    """Track over an iterable of :class:`ImageBuffer` frames; frame 0 initializes."""
    tracker = Tracker(cfg, threads=threads)
    results = []
    for k, frame in enumerate(frames):
        if k == 0:
            results.append(tracker.initialize(frame, init_rect))
        else:
            results.append(tracker.track_frame(frame))
    return results
