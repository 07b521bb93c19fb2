import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from gchp.errors import (
    NonPositiveHorizon,
    SupercriticalParams,
    TimeBeforeHistory,
    ValidationError,
    ZeroIntensityAtEvent,
)
from gchp.events import EventSequence
from gchp.graph import KernelSpec
from gchp.hawkes import (
    HawkesParams,
    NmhpParams,
    compensator,
    intensity_at,
    log_likelihood,
    log_likelihood_terms,
    nmhp_intensity,
    nmhp_log_likelihood,
    rescaled_interarrivals,
    sample_params,
    simulate_corpus,
    simulate_hawkes,
)


def _quadrature_compensator(p, seq):
    edges = np.concatenate([[0.0], seq.times, [seq.horizon]])
    total = 0.0
    for i in range(len(edges) - 1):
        hist = seq.prefix(i)
        total += quad(lambda t: intensity_at(p, hist, t), edges[i], edges[i + 1], epsabs=1e-13, epsrel=1e-13)[0]
    return total


class TestParams:
    def test_supercritical_rejected_at_simulation(self):
        with pytest.raises(SupercriticalParams):
            simulate_hawkes(HawkesParams([0.1], [[1.2]], 1.0), 10.0, 0)

    def test_shape_checked(self):
        with pytest.raises(ValidationError):
            HawkesParams([0.1, 0.2], [[0.1]], 1.0)

    @pytest.mark.parametrize("structure", ["paired", "dense"])
    def test_sampled_branching(self, structure):
        p = sample_params(10, 4, structure=structure, branching=0.8)
        assert p.branching_ratio == pytest.approx(0.8, rel=1e-9)
        assert np.all(p.alpha >= 0) and np.all((p.mu >= 0.05) & (p.mu <= 0.15))

    def test_paired_layout(self):
        p = sample_params(10, 0)
        # each trigger column has exactly one strong response
        strong = p.alpha[5:, :5] > 0
        assert np.all(strong.sum(axis=0) == 1) and np.all(strong.sum(axis=1) == 1)

    def test_dict_round_trip(self):
        p = sample_params(4, 1)
        q = HawkesParams.from_dict(p.to_dict())
        np.testing.assert_array_equal(p.alpha, q.alpha)


class TestSimulation:
    def test_zero_intensity_no_events(self):
        seq = simulate_hawkes(HawkesParams([0.0, 0.0], np.zeros((2, 2)), 1.0), 100.0, 0)
        assert len(seq) == 0

    def test_poisson_count(self):
        n = len(simulate_hawkes(HawkesParams([1.0], [[0.0]], 1.0), 1000.0, 7))
        assert abs(n - 1000) <= 4 * math.sqrt(1000)

    def test_mean_count_matches_stationary_rate(self):
        p = HawkesParams([0.5], [[0.8]], 1.6)
        counts = np.array([len(simulate_hawkes(p, 1000.0, s)) for s in range(20)])
        assert abs(counts.mean() - 1000.0) < 60

    def test_bad_horizon(self):
        with pytest.raises(NonPositiveHorizon):
            simulate_hawkes(HawkesParams([1.0], [[0.0]], 1.0), 0.0, 0)

    def test_deterministic(self):
        p = sample_params(5, 2)
        assert simulate_hawkes(p, 20.0, 3) == simulate_hawkes(p, 20.0, 3)

    def test_times_in_range(self):
        seq = simulate_hawkes(sample_params(5, 2), 20.0, 5)
        assert np.all(np.diff(seq.times) > 0) and seq.times[0] > 0 and seq.times[-1] <= 20.0

    def test_corpus_order_independent(self):
        p = sample_params(3, 2)
        serial = simulate_corpus(p, 10.0, 6, 42)
        threaded = simulate_corpus(p, 10.0, 6, 42, workers=3)
        assert serial == threaded
        assert [s.id for s in serial] == [f"s{i:04d}" for i in range(6)]

    def test_corpus_prefix_stable(self):
        p = sample_params(3, 2)
        assert simulate_corpus(p, 10.0, 3, 42).sequences == simulate_corpus(p, 10.0, 5, 42).sequences[:3]


class TestIntensity:
    def test_empty_history(self):
        p = HawkesParams([0.3, 0.7], [[0.1, 0.2], [0.3, 0.4]], 1.0)
        assert intensity_at(p, EventSequence("e", 5.0, [], []), 1.0, 1) == 0.7

    def test_single_event(self):
        p = HawkesParams([1.0], [[1.0]], 1.0)
        hist = EventSequence("h", 5.0, [0.0], [0])
        assert intensity_at(p, hist, math.log(2.0), 0) == pytest.approx(1.5, rel=1e-15)

    def test_additive(self):
        p = HawkesParams([0.2, 0.1], [[0.3, 0.5], [0.2, 0.4]], 1.3)
        both = EventSequence("h", 9.0, [1.0, 2.0], [0, 1])
        one = EventSequence("h", 9.0, [1.0], [0])
        two = EventSequence("h", 9.0, [2.0], [1])
        base = p.mu[0]
        t = 3.1
        assert intensity_at(p, both, t, 0) - base == pytest.approx(
            (intensity_at(p, one, t, 0) - base) + (intensity_at(p, two, t, 0) - base), rel=1e-14
        )

    def test_before_history(self):
        p = HawkesParams([1.0], [[0.5]], 1.0)
        with pytest.raises(TimeBeforeHistory):
            intensity_at(p, EventSequence("h", 5.0, [2.0], [0]), 1.0, 0)

    def test_decays_between_events(self):
        p = sample_params(4, 1)
        seq = simulate_hawkes(p, 10.0, 1)
        hist = seq.prefix(5)
        # left-continuous: the jump from event 4 lands just after its time
        grid = np.linspace(seq.times[4], seq.times[5], 20)[1:]
        vals = [intensity_at(p, hist, t) for t in grid]
        assert np.all(np.diff(vals) <= 1e-15)


class TestLikelihood:
    def test_poisson_closed_form(self):
        lam = 0.7
        seq = EventSequence("p", 10.0, [1.0, 2.0, 4.5], [0, 0, 0])
        terms = log_likelihood_terms(HawkesParams([lam], [[0.0]], 1.0), seq)
        assert terms.ground == pytest.approx(3 * math.log(lam) - lam * 10.0, rel=1e-14)
        assert terms.mark == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("seed", range(4))
    def test_compensator_matches_quadrature(self, seed):
        p = sample_params(4, seed, structure="dense", branching=0.7)
        seq = simulate_hawkes(p, 25.0, seed)
        closed = compensator(p, seq, seq.horizon)
        assert closed == pytest.approx(_quadrature_compensator(p, seq), rel=1e-8)

    def test_mark_term_is_normalized_intensity(self):
        p = sample_params(3, 5, structure="dense")
        seq = simulate_hawkes(p, 10.0, 1)
        expected = sum(
            math.log(intensity_at(p, seq.prefix(i), t, k) / intensity_at(p, seq.prefix(i), t))
            for i, (t, k) in enumerate(zip(seq.times, seq.marks))
        )
        assert log_likelihood_terms(p, seq).mark == pytest.approx(expected, rel=1e-12)

    def test_zero_intensity_event(self):
        p = HawkesParams([1.0, 0.0], [[0.0, 0.0], [0.0, 0.0]], 1.0)
        with pytest.raises(ZeroIntensityAtEvent):
            log_likelihood(p, EventSequence("z", 3.0, [1.0], [1]))


class TestRescaling:
    def test_poisson_residuals(self):
        seq = EventSequence("p", 10.0, [1.0, 2.5, 2.75], [0, 0, 0])
        r = rescaled_interarrivals(HawkesParams([2.0], [[0.0]], 1.0), seq)
        np.testing.assert_allclose(r, 2.0 * seq.interarrivals(), rtol=1e-15)

    def test_residuals_sum_to_compensator(self):
        p = sample_params(4, 1)
        seq = simulate_hawkes(p, 30.0, 2)
        assert rescaled_interarrivals(p, seq).sum() == pytest.approx(compensator(p, seq, seq.times[-1]), rel=1e-12)

    def test_true_params_pass_ks(self):
        p = sample_params(4, 3)
        seq = simulate_hawkes(p, 1500.0, 4)
        assert len(seq) > 5000
        assert stats.kstest(rescaled_interarrivals(p, seq), "expon").pvalue > 0.01

    def test_wrong_params_fail_ks(self):
        p = sample_params(4, 3)
        seq = simulate_hawkes(p, 1500.0, 4)
        wrong = HawkesParams(2 * p.mu, p.alpha, p.beta)
        assert stats.kstest(rescaled_interarrivals(wrong, seq), "expon").pvalue < 0.01


class TestNmhp:
    def test_base_term(self):
        p = NmhpParams(2.0, [0.25, 0.75])
        assert nmhp_intensity(p, EventSequence("e", 5.0, [], []), 1.0, 1) == 1.5

    def test_single_past_event(self):
        p = NmhpParams(2.0, [0.25, 0.75], phi=KernelSpec(0.5), kappa=lambda a, b: 0.3 if a != b else 1.0)
        hist = EventSequence("h", 5.0, [1.0], [0])
        expected = 2.0 * 0.75 + math.exp(-(0.4**2) / (2 * 0.25)) * 0.3
        assert nmhp_intensity(p, hist, 1.4, 1) == pytest.approx(expected, rel=1e-15)

    def test_relu_clamps(self):
        p = NmhpParams(1e-12, [1.0], phi=lambda lag: -0.3, h="relu")
        hist = EventSequence("h", 5.0, [1.0], [0])
        assert nmhp_intensity(p, hist, 2.0, 0) == pytest.approx(0.0, abs=1e-11)

    @pytest.mark.parametrize("h", ["softplus", "sigmoid-scaled"])
    def test_nonnegative_links(self, h):
        p = NmhpParams(0.5, [1.0], phi=lambda lag: -5.0, h=h, h_scale=2.0)
        hist = EventSequence("h", 5.0, [1.0, 1.5], [0, 0])
        assert nmhp_intensity(p, hist, 2.0, 0) >= 0.0

    def test_identity_poisson_likelihood(self):
        # phi = 0: a homogeneous Poisson with rate mu split by p(m)
        p = NmhpParams(1.5, [0.4, 0.6], phi=lambda lag: 0.0)
        seq = EventSequence("p", 4.0, [0.5, 1.2, 3.0], [0, 1, 1])
        expected = math.log(1.5 * 0.4) + 2 * math.log(1.5 * 0.6) - 1.5 * 4.0
        assert nmhp_log_likelihood(p, seq, 2) == pytest.approx(expected, rel=1e-10)

    def test_invalid_density(self):
        with pytest.raises(ValidationError):
            NmhpParams(1.0, [0.5, 0.6])
