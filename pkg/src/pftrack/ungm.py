"""Univariate nonstationary growth model benchmark.

Runs a bootstrap particle filter twice on each simulated trajectory, once with
multinomial resampling (TRPF) and once with classified resampling (IRPF), and
compares their RMSE.  Both filters see the same observations, start from the
same particle cloud and draw process noise from identically seeded streams, so
the only difference between them is the resampling step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import filter_core as fc
from .errors import LengthMismatch


@dataclass(frozen=True)
class UngmParams:
    particle_count: int = 100
    steps: int = 50
    process_noise_std: float = math.sqrt(10.0)
    measurement_noise_var: float = 1.0
    step_coefficient: float = 0.4
    runs: int = 50
    seed: int = 0
    initial_state: float = 0.0
    initial_spread: float = 1.0
    # overrides for the control experiment where both sides use the same scheme
    trpf_strategy: str = "traditional"
    irpf_strategy: str = "improved"


@dataclass
class RunResult:
    true_states: np.ndarray
    estimates_trpf: np.ndarray
    estimates_irpf: np.ndarray
    rmse_trpf: float
    rmse_irpf: float
    resample_counts: dict = field(default_factory=dict)


def ungm_transition(x_prev, n, noise=0.0):
    x_prev = np.asarray(x_prev, dtype=float)
    return (
        0.5 * x_prev
        + 25.0 * x_prev / (1.0 + x_prev**2)
        + 8.0 * np.cos(1.2 * (n - 1))
        + noise
    )


def ungm_observe(x, noise=0.0):
    return np.asarray(x, dtype=float) ** 2 / 20.0 + noise


def ungm_likelihood(y_observed, x_particle, var):
    if var <= 0:
        raise ValueError("measurement variance must be positive")
    innovation = y_observed - np.asarray(x_particle, dtype=float) ** 2 / 20.0
    return np.exp(-0.5 * innovation**2 / var) / math.sqrt(2.0 * math.pi * var)


def rmse(truth, estimate) -> float:
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape or truth.size == 0:
        raise LengthMismatch(f"cannot compare shapes {truth.shape} and {estimate.shape}")
    return float(np.sqrt(np.mean((truth - estimate) ** 2)))


def simulate(params: UngmParams, rng: np.random.Generator):
    """Draw one trajectory and its observations (length ``params.steps``)."""
    xs = np.empty(params.steps)
    ys = np.empty(params.steps)
    x = params.initial_state
    for k in range(params.steps):
        n = k + 1
        x = float(ungm_transition(x, n, params.process_noise_std * rng.standard_normal()))
        xs[k] = x
        ys[k] = float(
            ungm_observe(x, math.sqrt(params.measurement_noise_var) * rng.standard_normal())
        )
    return xs, ys


def run_filter(observations, initial_particles, params: UngmParams, strategy, seed):
    """Filter one observation sequence; returns (estimates, resample count).

    The estimate at each step is the weighted mean before resampling.
    """
    rng = np.random.default_rng(seed)
    cfg = fc.ResampleConfig(step_coefficient=params.step_coefficient)
    var = params.measurement_noise_var
    pset = fc.ParticleSet.uniform(np.asarray(initial_particles, dtype=float)[:, None])
    n_particles = len(pset)
    estimates = np.empty(len(observations))
    resamples = 0
    for k, y in enumerate(observations):
        n = k + 1
        noise = params.process_noise_std * rng.standard_normal(n_particles)
        # drawn every step so both filters consume their streams in lockstep
        resample_seed = int(rng.integers(2**32))
        moved = ungm_transition(pset.states[:, 0], n, noise)
        prior = fc.ParticleSet(moved[:, None], pset.weights, normalized=True)
        lik = ungm_likelihood(y, moved, var)
        try:
            post = fc.sis_weight_update(prior, lik)
        except fc.AllZeroWeights:
            # observation incompatible with every particle: keep the prior cloud
            post = prior
        estimates[k] = fc.estimate_posterior(post)[0]

        if fc.needs_resampling(post, cfg):
            weight_fn = _posterior_weight_fn(y, var, prior.weights, lik)
            post = fc.resample(post, strategy, cfg, resample_seed, weight_fn)
            resamples += 1
        pset = post
    return estimates, resamples


def _posterior_weight_fn(y, var, prior_weights, likelihoods):
    """Weight a fresh particle would get after this step's update.

    A proposal is credited with the average prior mass ``1/N`` and weighted by
    its likelihood, on the same normalized scale as the updated set.
    """
    evidence = float(np.dot(prior_weights, likelihoods))
    n = len(prior_weights)
    if evidence <= 0:
        return lambda states: np.zeros(len(states))

    def weight_fn(states):
        return ungm_likelihood(y, states[:, 0], var) / (n * evidence)

    return weight_fn


def run_single(params: UngmParams, run_seed) -> RunResult:
    if not isinstance(run_seed, np.random.SeedSequence):
        run_seed = np.random.SeedSequence(run_seed)
    seeds = run_seed.spawn(3)
    sim_rng = np.random.default_rng(seeds[0])
    truth, obs = simulate(params, sim_rng)
    init_rng = np.random.default_rng(seeds[1])
    cloud = params.initial_state + params.initial_spread * init_rng.standard_normal(
        params.particle_count
    )
    filter_seed = seeds[2]
    est_t, n_t = run_filter(obs, cloud, params, params.trpf_strategy, filter_seed)
    est_i, n_i = run_filter(obs, cloud, params, params.irpf_strategy, filter_seed)
    return RunResult(
        true_states=truth,
        estimates_trpf=est_t,
        estimates_irpf=est_i,
        rmse_trpf=rmse(truth, est_t),
        rmse_irpf=rmse(truth, est_i),
        resample_counts={"trpf": n_t, "irpf": n_i},
    )


def run_comparison(params: UngmParams) -> list[RunResult]:
    """Run ``params.runs`` paired TRPF/IRPF experiments, seeded from ``params.seed``."""
    run_seeds = np.random.SeedSequence(params.seed).spawn(params.runs)
    return [run_single(params, s) for s in run_seeds]


def summarize(results: list[RunResult]) -> dict:
    t = np.array([r.rmse_trpf for r in results])
    i = np.array([r.rmse_irpf for r in results])
    return {
        "mean_rmse_trpf": float(t.mean()),
        "mean_rmse_irpf": float(i.mean()),
        "irpf_win_rate": float(np.mean(i < t)),
    }


def write_runs_csv(results: list[RunResult], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["run", "rmse_trpf", "rmse_irpf"])
        for k, r in enumerate(results):
            out.writerow([k, repr(r.rmse_trpf), repr(r.rmse_irpf)])


def write_trace_csv(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "truth", "est_trpf", "est_irpf"])
        for k in range(len(result.true_states)):
            out.writerow(
                [
                    k + 1,
                    repr(float(result.true_states[k])),
                    repr(float(result.estimates_trpf[k])),
                    repr(float(result.estimates_irpf[k])),
                ]
            )


def write_outputs(results: list[RunResult], out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs_path = out_dir / "ungm_runs.csv"
    trace_path = out_dir / "ungm_trace.csv"
    write_runs_csv(results, runs_path)
    write_trace_csv(results[0], trace_path)
    return runs_path, trace_path
