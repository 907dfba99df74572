"""Estimator recursion: hand-worked steps, determinism, ensembles, metrics."""

import warnings

import numpy as np
import pytest

from cinest.errors import ParameterError
from cinest.estimator import (EstimatorConfig, error_metrics, initial_state,
                              run, run_ensemble, snapshot_times, step,
                              _run_batch)
from cinest.graphs import Graph, ring_khop_graph
from cinest.noise import NoiseModel
from cinest.nonlinearities import Clip, Identity, Sign


@pytest.fixture(scope="module")
def heavy():
    return NoiseModel.heavy_tail(2.05)


@pytest.fixture(scope="module")
def zero():
    return NoiseModel.zero()


def ring_config(**overrides):
    base = dict(a=1.0, b=1.0, delta=1.0, horizon=256, replicates=4, seed=42,
                theta_star=[1.0], obs_vectors=np.ones((10, 1)))
    base.update(overrides)
    return EstimatorConfig(**base)


class TestConfigValidation:
    def test_delta_range(self):
        with pytest.raises(ParameterError, match=r"\(0.5, 1\]"):
            ring_config(delta=0.5)
        with pytest.raises(ParameterError):
            ring_config(delta=1.2)
        ring_config(delta=0.75)  # fine

    def test_positive_gains(self):
        with pytest.raises(ParameterError):
            ring_config(a=0.0)
        with pytest.raises(ParameterError):
            ring_config(b=-1.0)

    def test_nonzero_observation_vectors(self):
        obs = np.ones((10, 1))
        obs[3] = 0.0
        with pytest.raises(ParameterError, match="nonzero"):
            ring_config(obs_vectors=obs)

    def test_dimension_mismatch(self):
        with pytest.raises(ParameterError):
            ring_config(theta_star=[1.0, 2.0])


class TestSnapshotSchedule:
    def test_contains_powers_and_decades(self):
        ts = snapshot_times(100_000)
        for t in (1, 2, 4, 1024, 65536, 10, 100, 1000, 10000, 100000):
            assert t in ts
        assert ts[-1] == 100_000
        assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_horizon_always_included(self):
        assert snapshot_times(777)[-1] == 777
        assert snapshot_times(1) == (1,)


class TestSingleSteps:
    def test_scalar_innovation_hand_iteration(self, zero):
        # one agent, no edges: x1 = x0 + alpha_0 psi_o(theta - x0) = 1
        g = Graph(1, [])
        cfg = EstimatorConfig(a=1.0, b=1.0, delta=1.0, horizon=1,
                              replicates=1, seed=0, theta_star=[1.0],
                              obs_vectors=[[1.0]])
        st = step(initial_state(cfg), cfg, g, Sign(), Identity(), zero, zero,
                  np.random.default_rng(0))
        assert st.x[0, 0] == 1.0
        assert st.t == 1

    def test_fixed_point_at_truth(self, zero):
        # all agents at theta with zero noise: the update is exactly null
        g = ring_khop_graph(10, 2)
        cfg = ring_config(init=np.ones((10, 1)))
        st = initial_state(cfg)
        rng = np.random.default_rng(0)
        for nl in (Sign(), Clip(0.5)):
            state = st
            for _ in range(5):
                state = step(state, cfg, g, nl, nl, zero, zero, rng)
            np.testing.assert_array_equal(state.x, np.ones((10, 1)))

    def test_step_matches_run(self, heavy):
        g = ring_khop_graph(10, 1)
        cfg = ring_config(horizon=32)
        rec = run(cfg, g, Sign(), Sign(), heavy, heavy, replicate_index=2)
        st = initial_state(cfg)
        rng = np.random.default_rng([42, 2])
        for _ in range(32):
            st = step(st, cfg, g, Sign(), Sign(), heavy, heavy, rng)
        dev = st.x - cfg.theta_star
        np.testing.assert_array_equal((dev ** 2).sum(axis=1),
                                      rec.per_agent_sq[-1])


class TestDeterminism:
    def test_same_seed_bit_identical(self, heavy):
        g = ring_khop_graph(10, 1)
        cfg = ring_config()
        a = run(cfg, g, Sign(), Sign(), heavy, heavy, 0)
        b = run(cfg, g, Sign(), Sign(), heavy, heavy, 0)
        np.testing.assert_array_equal(a.per_agent_sq, b.per_agent_sq)
        np.testing.assert_array_equal(a.network_mse, b.network_mse)

    def test_replicates_differ(self, heavy):
        g = ring_khop_graph(10, 1)
        cfg = ring_config()
        a = run(cfg, g, Sign(), Sign(), heavy, heavy, 0)
        b = run(cfg, g, Sign(), Sign(), heavy, heavy, 1)
        assert not np.array_equal(a.per_agent_sq, b.per_agent_sq)

    def test_chunking_does_not_change_trajectories(self, heavy):
        g = ring_khop_graph(6, 1)
        cfg = ring_config(obs_vectors=np.ones((6, 1)), horizon=100)
        outs = []
        for chunk in (1, 7, 64, None):
            _, dev, _, _ = _run_batch(cfg, g, Sign(), Sign(), heavy, heavy,
                                      [0, 1], chunk_steps=chunk)
            outs.append(dev)
        for other in outs[1:]:
            np.testing.assert_array_equal(outs[0], other)

    def test_batching_matches_single_runs(self, heavy):
        # replicate trajectories are independent of which batch they ran in
        g = ring_khop_graph(6, 1)
        cfg = ring_config(obs_vectors=np.ones((6, 1)), horizon=64)
        _, dev_all, _, _ = _run_batch(cfg, g, Sign(), Sign(), heavy, heavy,
                                      [0, 1, 2])
        for rep in range(3):
            _, dev_one, _, _ = _run_batch(cfg, g, Sign(), Sign(), heavy,
                                          heavy, [rep])
            np.testing.assert_array_equal(dev_all[rep], dev_one[0])

    def test_backends_agree(self, heavy):
        from cinest import _kernels
        if "compiled" not in _kernels.available_backends():
            pytest.skip("compiled kernel not built")
        g = ring_khop_graph(5, 2)
        cfg = EstimatorConfig(a=0.8, b=1.3, delta=0.75, horizon=200,
                              replicates=2, seed=9,
                              theta_star=[0.5, -1.0],
                              obs_vectors=np.random.default_rng(1).normal(size=(5, 2)))
        for nl in (Sign(), Clip(0.6)):
            a = run(cfg, g, nl, nl, heavy, heavy, 0, backend="python")
            b = run(cfg, g, nl, nl, heavy, heavy, 0, backend="compiled")
            np.testing.assert_array_equal(a.per_agent_sq, b.per_agent_sq)


class TestArcNoise:
    def test_opposite_arcs_use_independent_draws(self, heavy):
        # correlate the per-arc noise consumed on (i,j) versus (j,i) by
        # replaying the stream exactly as the driver does
        g = Graph(2, [(0, 1)])
        rng = np.random.default_rng([42, 0])
        steps = 20_000
        u = rng.random((steps, 2 + 2))  # 2 obs draws then 2 arc draws
        arc_noise = heavy.ppf(u[:, 2:])
        forward, backward = np.sign(arc_noise[:, 0]), np.sign(arc_noise[:, 1])
        assert abs(np.corrcoef(forward, backward)[0, 1]) < 0.02


class TestRun:
    def test_zero_noise_from_truth_is_flat_zero(self, zero):
        g = ring_khop_graph(10, 1)
        cfg = ring_config(init=np.ones((10, 1)))
        rec = run(cfg, g, Sign(), Sign(), zero, zero, 0)
        np.testing.assert_array_equal(rec.network_mse, 0.0)
        assert rec.diverged_at is None

    def test_mse_decreases_across_decades(self, heavy):
        g = ring_khop_graph(10, 1)
        cfg = ring_config(horizon=10_000)
        rec = run(cfg, g, Sign(), Sign(), heavy, heavy, 0)
        t = list(rec.times)
        assert rec.network_mse[t.index(10_000)] < rec.network_mse[t.index(100)]

    def test_disconnected_graph_rejected(self, heavy):
        g = Graph(4, [(0, 1), (2, 3)])
        cfg = ring_config(obs_vectors=np.ones((4, 1)))
        with pytest.raises(ParameterError, match="disconnected"):
            run(cfg, g, Sign(), Sign(), heavy, heavy, 0)

    def test_graph_size_mismatch(self, heavy):
        with pytest.raises(ParameterError, match="agents"):
            run(ring_config(), ring_khop_graph(5, 1), Sign(), Sign(),
                heavy, heavy, 0)

    def test_recorded_states(self, heavy):
        g = ring_khop_graph(10, 1)
        cfg = ring_config(horizon=16)
        rec = run(cfg, g, Sign(), Sign(), heavy, heavy, 0, record_states=True)
        assert rec.states.shape == (len(rec.times), 10, 1)
        dev = rec.states[-1] - cfg.theta_star
        np.testing.assert_allclose((dev ** 2).sum(axis=1),
                                   rec.per_agent_sq[-1], atol=0)


class TestEnsemble:
    def test_zero_noise_zero_variance(self, zero):
        g = ring_khop_graph(10, 1)
        cfg = ring_config(replicates=5)
        stats = run_ensemble(cfg, g, Sign(), Sign(), zero, zero)
        np.testing.assert_array_equal(stats.scaled_var, 0.0)
        assert stats.n_divergent == 0

    def test_needs_two_replicates(self, heavy):
        g = ring_khop_graph(10, 1)
        with pytest.raises(ParameterError):
            run_ensemble(ring_config(replicates=1), g, Sign(), Sign(),
                         heavy, heavy)

    def test_statistics_shape_and_consistency(self, heavy):
        g = ring_khop_graph(10, 1)
        cfg = ring_config(replicates=6, horizon=128)
        stats = run_ensemble(cfg, g, Sign(), Sign(), heavy, heavy)
        s = len(stats.times)
        assert stats.scaled_mean.shape == (s, 10, 1)
        assert stats.scaled_var.shape == (s, 10, 1)
        assert stats.per_replicate_network_mse.shape == (6, s)
        # network scaled second moment == (t+1) * mean over reps of mse
        expect = (stats.times + 1.0) * stats.per_replicate_network_mse.mean(axis=0)
        np.testing.assert_allclose(stats.network_scaled_second_moment,
                                   expect, rtol=1e-12)

    def test_ensemble_matches_individual_runs(self, heavy):
        g = ring_khop_graph(10, 1)
        cfg = ring_config(replicates=3, horizon=64)
        stats = run_ensemble(cfg, g, Sign(), Sign(), heavy, heavy)
        for rep in range(3):
            rec = run(cfg, g, Sign(), Sign(), heavy, heavy, rep)
            np.testing.assert_array_equal(
                stats.per_replicate_network_mse[rep], rec.network_mse)

    def test_linear_baseline_blows_up(self, heavy):
        g = ring_khop_graph(10, 1)
        cfg = ring_config(replicates=16, horizon=4096, seed=7)
        sign_stats = run_ensemble(cfg, g, Sign(), Sign(), heavy, heavy)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            lin_stats = run_ensemble(cfg, g, Identity(), Identity(),
                                     heavy, heavy)
        ratio = (np.nanmean(lin_stats.scaled_var[-1])
                 / np.nanmean(sign_stats.scaled_var[-1]))
        assert lin_stats.n_divergent > 0 or ratio >= 10.0

    def test_divergent_replicates_warned_and_counted(self, heavy):
        # gigantic gains force divergence deterministically
        g = ring_khop_graph(4, 1)
        cfg = EstimatorConfig(a=1e9, b=1e9, delta=1.0, horizon=64,
                              replicates=3, seed=0, theta_star=[1.0],
                              obs_vectors=np.ones((4, 1)))
        with pytest.warns(RuntimeWarning, match="diverged"):
            stats = run_ensemble(cfg, g, Identity(), Identity(), heavy, heavy)
        assert stats.n_divergent == 3
        assert np.all(stats.diverged_at >= 0)


class TestMetrics:
    def test_all_at_truth_is_zero(self):
        from cinest.estimator import TrajectoryRecord
        rec = TrajectoryRecord(replicate=0, times=np.array([1, 2, 4]),
                               per_agent_sq=np.zeros((3, 5)),
                               network_mse=np.zeros(3))
        table = error_metrics(rec)
        np.testing.assert_array_equal(table.network_mse, 0.0)
        np.testing.assert_array_equal(table.scaled_second_moment, 0.0)

    def test_single_offset_agent(self):
        from cinest.estimator import TrajectoryRecord
        per_agent = np.zeros((2, 3))
        per_agent[:, 1] = 1.0  # one agent sits at theta + 1, M = 1
        rec = TrajectoryRecord(replicate=0, times=np.array([9, 99]),
                               per_agent_sq=per_agent,
                               network_mse=per_agent.mean(axis=1))
        table = error_metrics(rec)
        np.testing.assert_array_equal(table.per_agent_mse[:, 1], 1.0)
        np.testing.assert_allclose(table.scaled_second_moment,
                                   [10 / 3, 100 / 3])

    def test_concatenation_linearity(self, heavy):
        from cinest.estimator import TrajectoryRecord
        g = ring_khop_graph(10, 1)
        cfg = ring_config(horizon=64)
        rec = run(cfg, g, Sign(), Sign(), heavy, heavy, 0)
        full = error_metrics(rec)
        half = len(rec.times) // 2
        first = error_metrics(TrajectoryRecord(
            replicate=0, times=rec.times[:half],
            per_agent_sq=rec.per_agent_sq[:half],
            network_mse=rec.network_mse[:half]))
        second = error_metrics(TrajectoryRecord(
            replicate=0, times=rec.times[half:],
            per_agent_sq=rec.per_agent_sq[half:],
            network_mse=rec.network_mse[half:]))
        np.testing.assert_array_equal(
            np.concatenate([first.scaled_second_moment,
                            second.scaled_second_moment]),
            full.scaled_second_moment)
