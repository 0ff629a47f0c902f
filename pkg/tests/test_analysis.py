import math

import numpy as np
import pytest

from stabgame import analysis as an
from stabgame.environment import EnvConfig
from stabgame.runner import TurnRecord


class TestTransientDefaults:
    def test_reference_values(self):
        # independent evaluation of the cubic transient rules
        assert an.transient_turns_default("random", 16) == math.ceil(0.2 * 16**3)
        assert an.transient_turns_default("random", 16) == 820
        assert an.transient_turns_default("greedy", 16) == math.ceil(0.04 * 16**3)
        assert an.transient_turns_default("greedy", 16) == 164
        assert an.transient_turns_default("greedy", 128) == math.ceil(0.02 * 128**3)
        assert an.transient_turns_default("greedy", 128) == 41944

    def test_informed_kinds_share_rule(self):
        for kind in ("pyramid", "external"):
            assert an.transient_turns_default(kind, 32) == \
                an.transient_turns_default("greedy", 32)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            an.transient_turns_default("psychic", 16)


class TestDetectSteadyState:
    def test_constant_series(self):
        assert an.detect_steady_state(np.full(100, 5.0), 20) == 0

    def test_ramp_then_plateau(self):
        window = 40
        onset = 300
        series = np.concatenate([
            np.linspace(1.0, 100.0, onset),
            np.full(700, 100.0),
        ])
        found = an.detect_steady_state(series, window)
        assert abs(found - onset) <= window

    def test_definitional_minimum(self):
        rng = np.random.default_rng(1)
        series = np.abs(np.cumsum(rng.normal(1, 3, 400))) + 1.0
        window = 30
        idx = an.detect_steady_state(series, window)
        m = len(series) - window
        csum = np.concatenate(([0.0], np.cumsum(series)))
        crit = (csum[window:window + m] - csum[:m]) / window / series[:m] - 1
        assert (crit[idx] <= crit).all()

    def test_too_short(self):
        with pytest.raises(ValueError):
            an.detect_steady_state(np.ones(10), 10)


class TestEnsembleEstimate:
    def test_p_one_greedy_mean_zero(self):
        cfg = EnvConfig(n_qubits=6, p=1.0, seed=9)
        spec = an.EnsembleSpec(n_realizations=5, samples_per_realization=3,
                               sample_spacing=5, transient_turns=10)
        est = an.ensemble_estimate(cfg, "greedy", spec)
        assert est.mean == 0.0
        assert (est.s_tot_samples == 0).all()

    def test_reproducible(self):
        cfg = EnvConfig(n_qubits=8, p=0.4, seed=77)
        spec = an.EnsembleSpec(n_realizations=6, samples_per_realization=4,
                               sample_spacing=10, transient_turns=30)
        a = an.ensemble_estimate(cfg, "random", spec)
        b = an.ensemble_estimate(cfg, "random", spec)
        assert np.array_equal(a.s_tot_samples, b.s_tot_samples)
        assert a.mean == b.mean and a.stderr == b.stderr
        assert a.seeds == [77 ^ i for i in range(6)]

    def test_worker_count_does_not_change_results(self):
        cfg = EnvConfig(n_qubits=6, p=0.5, seed=13)
        spec = an.EnsembleSpec(n_realizations=4, samples_per_realization=3,
                               sample_spacing=8, transient_turns=20)
        serial = an.ensemble_estimate(cfg, "greedy", spec, workers=1)
        parallel = an.ensemble_estimate(cfg, "greedy", spec, workers=2)
        assert np.array_equal(serial.s_tot_samples, parallel.s_tot_samples)
        assert serial.mean == parallel.mean

    def test_mean_in_unit_interval_and_stderr_scaling(self):
        rng = np.random.default_rng(5)
        pool = rng.integers(0, 37, size=8000)
        small = an.summarize_samples(pool[:2000], 36)
        large = an.summarize_samples(pool, 36)
        assert 0.0 <= small.mean <= 1.0
        ratio = small.stderr / large.stderr
        assert abs(ratio - 2.0) < 0.2  # stderr ~ 1/sqrt(count)


class TestBinder:
    def test_constant_samples(self):
        assert an.binder_cumulant(np.full(10, 0.37)) == pytest.approx(2 / 3)

    def test_symmetric_pair(self):
        assert an.binder_cumulant(np.array([1.0, -1.0] * 8)) == pytest.approx(2 / 3)

    def test_gaussian_kurtosis(self):
        rng = np.random.default_rng(6)
        x = rng.normal(0.0, 1.0, 10**6)
        assert abs(an.binder_cumulant(x)) < 0.01

    def test_reorder_invariant(self):
        rng = np.random.default_rng(7)
        x = rng.random(500)
        assert an.binder_cumulant(x) == pytest.approx(
            an.binder_cumulant(np.sort(x)), rel=1e-12)

    def test_rescale_invariant(self):
        rng = np.random.default_rng(8)
        x = rng.random(500) + 0.1
        assert an.binder_cumulant(3.7 * x) == pytest.approx(
            an.binder_cumulant(x), rel=1e-12)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            an.binder_cumulant([1.0])

    def test_all_zero_is_nan(self):
        assert math.isnan(an.binder_cumulant(np.zeros(10)))


class TestBinderCrossing:
    def test_identical_curves_error(self):
        p = np.linspace(0.1, 0.2, 11)
        u = np.linspace(0.6, 0.3, 11)
        with pytest.raises(ValueError, match="no unique crossing"):
            an.binder_crossing(p, u, u.copy())

    def test_planted_crossing(self):
        p = np.arange(0.10, 0.1601, 0.005)
        u_small = 0.6 - 2.0 * (p - 0.135)
        u_large = 0.6 + 1.5 * (p - 0.135)
        est = an.binder_crossing(p, u_small, u_large)
        assert est.p == pytest.approx(0.135, abs=0.005)
        assert not est.multiple

    def test_multiple_crossings_leftmost_with_flag(self):
        p = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        d_a = np.array([-1.0, 1.0, -1.0, 1.0, 1.0])
        est = an.binder_crossing(p, d_a, np.zeros(5))
        assert est.p == pytest.approx(0.5)
        assert est.multiple and est.n_crossings == 3

    def test_no_crossing_error(self):
        p = np.linspace(0, 1, 5)
        with pytest.raises(ValueError, match="do not cross"):
            an.binder_crossing(p, np.ones(5), np.zeros(5))


class TestBottleneckModel:
    def test_direct_substitution(self):
        n_b, pred = an.bottleneck_model(0.5, 10)
        assert n_b == pytest.approx(10.0)
        assert pred == pytest.approx(1.0 / 11.0)

    def test_limit_p_to_one(self):
        assert an.bottleneck_model(0.999, 100)[1] < 1e-4

    def test_algebraic_identity(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            p = float(rng.uniform(0.01, 0.99))
            n = int(rng.integers(2, 300))
            n_b, pred = an.bottleneck_model(p, n)
            assert abs(pred * (p * n / (1 - p) + 1) - 1.0) < 1e-12

    def test_thermodynamic_scaling(self):
        p = 0.3
        pred = an.bottleneck_model(p, 10**7)[1]
        assert pred / ((1 - p) / (p * 10**7)) == pytest.approx(1.0, rel=1e-5)

    def test_domain(self):
        for p in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                an.bottleneck_model(p, 16)


def _record(profile, action, observation):
    prof = np.asarray(profile, dtype=np.int32)
    return TurnRecord(0, action, prof, int(prof.sum()), observation)


class TestBellPairStats:
    def _obs_with_pair(self, n, bond, keep=True):
        obs = np.zeros((n, 2 * n), dtype=np.int8)
        if keep:
            row = -np.ones(2 * n, dtype=np.int8)
            row[2 * bond] = 1
            row[2 * (bond + 1)] = 1
            obs[0] = row
        return obs

    def test_zero_profile_all_zero_counts(self):
        recs = [_record(np.zeros(7), 3, self._obs_with_pair(8, 3))
                for _ in range(5)]
        stats = an.bell_pair_stats(recs, 8)
        assert not stats.observed.any() and not stats.targeted.any()

    def test_single_pair_targeted(self):
        profile = np.zeros(7)
        profile[3] = 1
        recs = [_record(profile, 3, self._obs_with_pair(8, 3))]
        stats = an.bell_pair_stats(recs, 8)
        assert stats.observed[3] == 1 and stats.targeted[3] == 1
        assert stats.ratio[3] == 1.0 and stats.total_ratio == 1.0

    def test_pair_missed_by_action(self):
        profile = np.zeros(7)
        profile[3] = 1
        recs = [_record(profile, 0, self._obs_with_pair(8, 3))]
        stats = an.bell_pair_stats(recs, 8)
        assert stats.observed[3] == 1 and stats.targeted[3] == 0

    def test_q_zero_hides_everything(self):
        profile = np.zeros(7)
        profile[3] = 1
        recs = [_record(profile, 3, self._obs_with_pair(8, 3, keep=False))]
        stats = an.bell_pair_stats(recs, 8)
        assert not stats.observed.any()
        assert math.isnan(stats.total_ratio)

    def test_support_must_be_exactly_the_pair(self):
        profile = np.zeros(7)
        profile[3] = 1
        obs = self._obs_with_pair(8, 3)
        obs[0, 2 * 6] = 1  # row also touches site 6: not a pair witness
        stats = an.bell_pair_stats([_record(profile, 3, obs)], 8)
        assert stats.observed[3] == 0

    def test_neighbor_entanglement_disqualifies(self):
        profile = np.zeros(7)
        profile[3] = 1
        profile[4] = 1
        recs = [_record(profile, 3, self._obs_with_pair(8, 3))]
        stats = an.bell_pair_stats(recs, 8)
        assert not stats.observed.any()

    def test_boundary_bond_counts(self):
        profile = np.zeros(7)
        profile[0] = 1
        recs = [_record(profile, 0, self._obs_with_pair(8, 0))]
        stats = an.bell_pair_stats(recs, 8)
        assert stats.observed[0] == 1 and stats.targeted[0] == 1
