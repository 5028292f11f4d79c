import numpy as np
import pytest

from pftrack import filter_core as fc
from pftrack.errors import AllZeroWeights, LengthMismatch, NoHeavyParticles, NotNormalized


def pset(weights, states=None, normalized=True):
    weights = np.asarray(weights, dtype=float)
    if states is None:
        states = np.arange(len(weights), dtype=float)
    return fc.ParticleSet(np.asarray(states, dtype=float), weights, normalized=normalized)


# -- ParticleSet -----------------------------------------------------------------


def test_particle_set_coerces_1d_states():
    p = pset([0.5, 0.5], [1.0, 2.0])
    assert p.states.shape == (2, 1)
    assert p.dim == 1
    assert len(p) == 2
    assert p[1].weight == 0.5


def test_particle_set_rejects_bad_input():
    with pytest.raises(LengthMismatch):
        fc.ParticleSet(np.zeros((3, 1)), np.ones(2))
    with pytest.raises(ValueError):
        fc.ParticleSet(np.zeros((2, 1)), [1.0, -1.0])
    with pytest.raises(NotNormalized):
        fc.ParticleSet(np.zeros((2, 1)), [0.5, 0.6], normalized=True)
    with pytest.raises(ValueError):
        fc.ParticleSet(np.zeros((0, 1)), [])


def test_particle_set_is_immutable():
    p = pset([0.5, 0.5])
    with pytest.raises(ValueError):
        p.weights[0] = 1.0


def test_resample_config_validation():
    with pytest.raises(ValueError):
        fc.ResampleConfig(low_factor=1.5)
    with pytest.raises(ValueError):
        fc.ResampleConfig(threshold_fraction=0)
    with pytest.raises(ValueError):
        fc.ResampleConfig(reweight="bogus")
    cfg = fc.ResampleConfig()
    assert cfg.threshold_fraction == pytest.approx(2 / 3)
    assert (cfg.step_coefficient, cfg.low_factor, cfg.high_factor, cfg.max_halvings) == (0.4, 0.5, 2.0, 3)


# -- normalization, ESS, SIS, estimate ---------------------------------------------


@pytest.mark.parametrize(
    "raw, expected",
    [
        ([1, 1, 1, 1], [0.25, 0.25, 0.25, 0.25]),
        ([0, 0, 2], [0, 0, 1]),
        ([0.2, 0.2, 0.6], [0.2, 0.2, 0.6]),
    ],
)
def test_normalize_weights(raw, expected):
    out = fc.normalize_weights(pset(raw, normalized=False))
    assert out.normalized
    np.testing.assert_allclose(out.weights, expected, atol=1e-15)


def test_normalize_all_zero_raises():
    with pytest.raises(AllZeroWeights):
        fc.normalize_weights(pset([0, 0, 0], normalized=False))


@pytest.mark.parametrize(
    "weights, expected",
    [
        (np.full(100, 0.01), 100.0),
        ([1.0] + [0.0] * 9, 1.0),
        ([0.5, 0.5, 0, 0], 2.0),
    ],
)
def test_effective_sample_size(weights, expected):
    assert fc.effective_sample_size(pset(weights)) == pytest.approx(expected)


def test_ess_requires_normalized():
    with pytest.raises(NotNormalized):
        fc.effective_sample_size(pset([1.0, 1.0], normalized=False))


def test_needs_resampling_threshold():
    cfg = fc.ResampleConfig()
    assert not fc.needs_resampling(pset(np.full(3, 1 / 3)), cfg)
    # ESS = 1/(0.5^2 + 0.25^2 * 2) = 2.67 > 2 -> no
    assert not fc.needs_resampling(pset([0.5, 0.25, 0.25]), cfg)
    assert fc.needs_resampling(pset([0.9, 0.05, 0.05]), cfg)


@pytest.mark.parametrize(
    "w, lik, expected",
    [
        ([0.5, 0.5], [2, 2], [0.5, 0.5]),
        ([0.5, 0.5], [1, 0], [1, 0]),
        ([0.25, 0.75], [3, 1], [0.5, 0.5]),
    ],
)
def test_sis_weight_update(w, lik, expected):
    out = fc.sis_weight_update(pset(w), lik)
    np.testing.assert_allclose(out.weights, expected, atol=1e-15)


def test_sis_all_zero_and_length_errors():
    with pytest.raises(AllZeroWeights):
        fc.sis_weight_update(pset([0.5, 0.5]), [0, 0])
    with pytest.raises(LengthMismatch):
        fc.sis_weight_update(pset([0.5, 0.5]), [1, 1, 1])


@pytest.mark.parametrize(
    "states, w, expected",
    [
        ([1.0, 3.0], [0.5, 0.5], 2.0),
        ([7.0], [1.0], 7.0),
        ([5.0, 9.0], [1.0, 0.0], 5.0),
    ],
)
def test_estimate_posterior(states, w, expected):
    assert fc.estimate_posterior(pset(w, states))[0] == pytest.approx(expected)


# -- resampling ------------------------------------------------------------------


def test_traditional_degenerate_support():
    out = fc.resample_traditional(pset([1, 0, 0], [3.0, 4.0, 5.0]), rng_seed=1)
    np.testing.assert_array_equal(out.states[:, 0], [3.0, 3.0, 3.0])
    np.testing.assert_allclose(out.weights, 1 / 3)


def test_traditional_uniform_output_and_determinism():
    p = pset(np.random.default_rng(0).dirichlet(np.ones(20)))
    a = fc.resample_traditional(p, 42)
    b = fc.resample_traditional(p, 42)
    np.testing.assert_allclose(a.weights, 1 / 20)
    np.testing.assert_array_equal(a.states, b.states)


@pytest.mark.parametrize(
    "w, a_expected, b_expected",
    [
        (np.full(4, 0.25), [], [0, 1, 2, 3]),
        ([0.01, 0.49, 0.50], [0], [1, 2]),
        ([0.9, 0.1], [1], [0]),
    ],
)
def test_classify_particles(w, a_expected, b_expected):
    a, b = fc.classify_particles(pset(w), fc.ResampleConfig())
    assert a.tolist() == a_expected
    assert b.tolist() == b_expected


def test_shrink_factor():
    assert fc.shrink_factor(2, 1) == 0.5
    assert fc.shrink_factor(4, 2) == 0.5


def accept_all(states):
    return np.ones(len(states))


def test_improved_single_move_matches_hand_value():
    # light particle at 0, heavy at 10; class A = {light, heavy} so N_AW = 2, m = 1
    p = pset([0.05, 0.175, 0.175, 0.6], [0.0, 3.0, 4.0, 10.0])
    cfg = fc.ResampleConfig(reweight="retain")
    out = fc.resample_improved(p, cfg, accept_all, rng_seed=0)
    # sorted ascending by weight: the light particle is first
    assert out.states[0, 0] == pytest.approx(2.0)
    np.testing.assert_array_equal(out.states[1:, 0], [3.0, 4.0, 10.0])


def test_improved_halves_step_until_accepted():
    p = pset([0.05, 0.175, 0.175, 0.6], [0.0, 3.0, 4.0, 10.0])

    def only_small_steps(states):
        # a proposal beyond 0.6 scores below the light particle's weight
        return np.where(states[:, 0] <= 0.6, 1.0, 0.0)

    out = fc.resample_improved(p, fc.ResampleConfig(reweight="retain"), only_small_steps, 0)
    # steps 2.0 -> 1.0 -> 0.5 accepted on the second halving
    assert out.states[0, 0] == pytest.approx(0.5)


def test_improved_falls_back_to_attractor_copy():
    p = pset([0.05, 0.175, 0.175, 0.6], [0.0, 3.0, 4.0, 10.0])

    def reject_all_but_attractor(states):
        return np.where(states[:, 0] == 10.0, 1.0, 0.0)

    out = fc.resample_improved(p, fc.ResampleConfig(), reject_all_but_attractor, 0)
    assert out.states[0, 0] == 10.0


def test_improved_all_medium_returns_sorted_input():
    p = pset([0.3, 0.2, 0.25, 0.25], [1.0, 2.0, 3.0, 4.0])
    out = fc.resample_improved(p, fc.ResampleConfig(), accept_all, 0)
    np.testing.assert_array_equal(out.states[:, 0], [2.0, 3.0, 4.0, 1.0])
    np.testing.assert_allclose(out.weights, [0.2, 0.25, 0.25, 0.3])


def test_improved_no_heavy_raises_and_dispatcher_falls_back():
    # four particles: 0.1 is light (<= 0.125), none reaches 0.5
    p = pset([0.1, 0.3, 0.3, 0.3])
    with pytest.raises(NoHeavyParticles):
        fc.resample_improved(p, fc.ResampleConfig(), accept_all, 0)
    out = fc.resample(p, "improved", fc.ResampleConfig(), 0, accept_all)
    np.testing.assert_allclose(out.weights, 0.25)


def test_improved_reweight_policies():
    p = pset([0.05, 0.175, 0.175, 0.6], [0.0, 3.0, 4.0, 10.0])

    def weight_by_state(states):
        return states[:, 0] + 1.0

    retained = fc.resample_improved(p, fc.ResampleConfig(reweight="retain"), weight_by_state, 0)
    # moved particle at 2.0 gets weight 3.0, the rest keep theirs, then renormalize
    np.testing.assert_allclose(retained.weights, np.array([3.0, 0.175, 0.175, 0.6]) / 3.95)
    fresh = fc.resample_improved(p, fc.ResampleConfig(reweight="likelihood"), weight_by_state, 0)
    np.testing.assert_allclose(fresh.weights, np.array([3.0, 4.0, 5.0, 11.0]) / 23.0)


def test_improved_is_deterministic_given_seed():
    rng = np.random.default_rng(3)
    p = pset(rng.dirichlet(np.full(30, 0.3)), rng.normal(size=(30, 2)))

    def wf(states):
        return np.exp(-np.sum(states**2, axis=1))

    a = fc.resample_improved(p, fc.ResampleConfig(), wf, 9)
    b = fc.resample_improved(p, fc.ResampleConfig(), wf, 9)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_resample_dispatch_errors():
    p = pset([0.5, 0.5])
    with pytest.raises(ValueError):
        fc.resample(p, "systematic", fc.ResampleConfig(), 0)
    with pytest.raises(ValueError):
        fc.resample(p, "improved", fc.ResampleConfig(), 0, None)
