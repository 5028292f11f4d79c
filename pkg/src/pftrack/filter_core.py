"""Sequential importance sampling with two resampling strategies.

Particle clouds are held in :class:`ParticleSet`, an immutable pair of a
``(N, m)`` state array and a ``(N,)`` weight array.  Every operation returns
a new set.

Effective sample size is reported as ``1 / sum(w**2)`` on normalized weights,
which lies in ``[1, N]``.

The improved strategy sorts particles by weight, splits them into class A
(light and heavy) and class B (medium), then pulls each light particle toward
a randomly chosen heavy one by ``K * L`` of the gap, with
``L = (1 / |A|) ** (1 / m)``.  A pulled particle that scores worse than the
particle it replaces is retried with ``L`` halved; after ``max_halvings``
retries it becomes a copy of its attractor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import AllZeroWeights, LengthMismatch, NoHeavyParticles, NotNormalized

NORMALIZATION_TOL = 1e-9

# maps a (k, m) batch of states to k unnormalized weights
WeightFn = Callable[[np.ndarray], np.ndarray]


class Particle(NamedTuple):
    state: np.ndarray
    weight: float


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """Weighted particle cloud.

    ``states`` is coerced to a float ``(N, m)`` array and ``weights`` to a
    float ``(N,)`` array; both are copied and frozen.
    """

    states: np.ndarray
    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError("states must be a non-empty (N, m) array")
        if weights.shape[0] != states.shape[0]:
            raise LengthMismatch(
                f"{states.shape[0]} states but {weights.shape[0]} weights"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        if self.normalized and abs(weights.sum() - 1.0) > NORMALIZATION_TOL:
            raise NotNormalized(f"weights sum to {weights.sum()!r}, not 1")
        states.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, states) -> "ParticleSet":
        states = np.asarray(states, dtype=float)
        n = states.shape[0]
        return cls(states, np.full(n, 1.0 / n), normalized=True)

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, i) -> Particle:
        return Particle(self.states[i], float(self.weights[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def take(self, index) -> "ParticleSet":
        """Subset/reorder particles; the result is not flagged normalized."""
        index = np.asarray(index, dtype=int)
        return ParticleSet(self.states[index], self.weights[index])


@dataclass(frozen=True)
class ResampleConfig:
    threshold_fraction: float = 2.0 / 3.0
    step_coefficient: float = 0.4
    low_factor: float = 0.5
    high_factor: float = 2.0
    max_halvings: int = 3
    # "likelihood": every output particle is re-weighted by weight_fn;
    # "retain": unmoved particles keep their incoming weights
    reweight: str = "likelihood"

    def __post_init__(self):
        if not 0.0 < self.threshold_fraction <= 1.0:
            raise ValueError("threshold_fraction must lie in (0, 1]")
        if self.step_coefficient <= 0:
            raise ValueError("step_coefficient must be positive")
        if not 0.0 < self.low_factor < 1.0 < self.high_factor:
            raise ValueError("need 0 < low_factor < 1 < high_factor")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be >= 0")
        if self.reweight not in ("likelihood", "retain"):
            raise ValueError(f"unknown reweight policy {self.reweight!r}")


def _require_normalized(pset: ParticleSet):
    if not pset.normalized:
        raise NotNormalized("operation requires a normalized ParticleSet")


def normalize_weights(pset: ParticleSet) -> ParticleSet:
    total = pset.weights.sum()
    if not total > 0:
        raise AllZeroWeights("all particle weights are zero")
    w = pset.weights / total
    # absorb rounding so the sum is 1 to machine precision
    w = w / w.sum()
    return ParticleSet(pset.states, w, normalized=True)


def effective_sample_size(pset: ParticleSet) -> float:
    _require_normalized(pset)
    return float(1.0 / np.sum(pset.weights**2))


def needs_resampling(pset: ParticleSet, cfg: ResampleConfig) -> bool:
    return effective_sample_size(pset) < cfg.threshold_fraction * len(pset)


def sis_weight_update(pset: ParticleSet, likelihoods) -> ParticleSet:
    """Multiply each weight by its observation likelihood, then normalize."""
    lik = np.asarray(likelihoods, dtype=float).reshape(-1)
    if lik.shape[0] != len(pset):
        raise LengthMismatch(f"{lik.shape[0]} likelihoods for {len(pset)} particles")
    if not np.all(np.isfinite(lik)) or np.any(lik < 0):
        raise ValueError("likelihoods must be finite and nonnegative")
    return normalize_weights(ParticleSet(pset.states, pset.weights * lik))


def estimate_posterior(pset: ParticleSet) -> np.ndarray:
    """Weighted mean of the particle states."""
    _require_normalized(pset)
    return pset.weights @ pset.states


def resample_traditional(pset: ParticleSet, rng_seed) -> ParticleSet:
    """Multinomial resampling; every output weight is ``1/N``."""
    _require_normalized(pset)
    rng = np.random.default_rng(rng_seed)
    n = len(pset)
    idx = rng.choice(n, size=n, replace=True, p=pset.weights)
    return ParticleSet.uniform(pset.states[idx])


def classify_particles(pset: ParticleSet, cfg: ResampleConfig):
    """Split indices into class A (light or heavy) and class B (medium).

    Thresholds are ``low_factor / N`` and ``high_factor / N``; a weight equal
    to a threshold belongs to class A.
    """
    _require_normalized(pset)
    mean = 1.0 / len(pset)
    w = pset.weights
    in_a = (w <= cfg.low_factor * mean) | (w >= cfg.high_factor * mean)
    return np.flatnonzero(in_a), np.flatnonzero(~in_a)


def shrink_factor(class_a_size: int, dim: int) -> float:
    return (1.0 / class_a_size) ** (1.0 / dim)


def resample_improved(
    pset: ParticleSet,
    cfg: ResampleConfig,
    weight_fn: WeightFn,
    rng_seed,
) -> ParticleSet:
    """Classified resampling that moves light particles toward heavy ones.

    ``weight_fn`` receives a ``(k, m)`` batch of states and must return their
    weights on the same scale as ``pset.weights`` (the normalized scale), since
    a proposal is accepted only when its weight is at least the weight of the
    particle it replaces.  Class B and heavy particles keep their states.
    With ``cfg.reweight == "likelihood"`` every output particle is then
    weighted by ``weight_fn``, i.e. all are credited the same prior mass;
    with ``"retain"`` only moved particles are, the rest keep their weights.
    The output is sorted by input weight and renormalized.

    Raises :class:`NoHeavyParticles` when there are light particles but no
    heavy ones.
    """
    _require_normalized(pset)
    rng = np.random.default_rng(rng_seed)
    order = np.argsort(pset.weights, kind="stable")
    ranked = ParticleSet(pset.states[order], pset.weights[order], normalized=True)

    class_a, _ = classify_particles(ranked, cfg)
    mean = 1.0 / len(ranked)
    w = ranked.weights
    light = class_a[w[class_a] <= cfg.low_factor * mean]
    heavy = class_a[w[class_a] >= cfg.high_factor * mean]
    if light.size == 0:
        return ranked
    if heavy.size == 0:
        raise NoHeavyParticles(f"{light.size} light particles, no heavy attractor")

    states = ranked.states.copy()
    weights = w.copy()
    x_s = ranked.states[light]
    attractor = rng.choice(heavy, size=light.size)
    x_a = ranked.states[attractor]
    base_weight = w[light]

    step = cfg.step_coefficient * shrink_factor(class_a.size, ranked.dim)
    pending = np.arange(light.size)
    new_states = x_a.copy()
    new_weights = np.empty(light.size)
    for _ in range(cfg.max_halvings + 1):
        proposal = x_s[pending] + step * (x_a[pending] - x_s[pending])
        score = np.asarray(weight_fn(proposal), dtype=float).reshape(-1)
        ok = score >= base_weight[pending]
        new_states[pending[ok]] = proposal[ok]
        new_weights[pending[ok]] = score[ok]
        pending = pending[~ok]
        if pending.size == 0:
            break
        step /= 2.0
    if pending.size:
        new_weights[pending] = np.asarray(
            weight_fn(new_states[pending]), dtype=float
        ).reshape(-1)

    states[light] = new_states
    weights[light] = new_weights
    if cfg.reweight == "likelihood":
        fresh = np.asarray(weight_fn(states), dtype=float).reshape(-1)
        if fresh.sum() > 0:
            weights = fresh
    return normalize_weights(ParticleSet(states, weights))


def resample(
    pset: ParticleSet,
    strategy: str,
    cfg: ResampleConfig,
    rng_seed,
    weight_fn: WeightFn | None = None,
) -> ParticleSet:
    """Dispatch to a resampling strategy.

    ``strategy`` is ``"traditional"`` or ``"improved"``; the improved scheme
    falls back to multinomial resampling when it has no heavy attractor.
    """
    if strategy == "traditional":
        return resample_traditional(pset, rng_seed)
    if strategy == "improved":
        if weight_fn is None:
            raise ValueError("improved resampling needs a weight_fn")
        try:
            return resample_improved(pset, cfg, weight_fn, rng_seed)
        except NoHeavyParticles:
            return resample_traditional(pset, rng_seed)
    raise ValueError(f"unknown resampling strategy {strategy!r}")
