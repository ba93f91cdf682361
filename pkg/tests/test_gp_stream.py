import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpcbf import gp_batch, gp_stream
from gpcbf.errors import NumericalFailure, UsageError
from gpcbf.gp_stream import ModelConfig
from gpcbf.kernel import KernelParams, kernel_vector, regularized_gram

KP = KernelParams(scale=100.0, bandwidth=0.5)


def small_config(budget=8, local=4, noise=1.0, **kw):
    return ModelConfig(budget=budget, local_budget=local, noise=noise,
                       rkhs_bound=100.0, kernel=KP, **kw)


def streamed(rng, cfg, steps, n_out=2, scale=1.0):
    model = gp_stream.init(rng.normal(size=2), rng.normal(size=n_out), cfg)
    for _ in range(steps):
        model = gp_stream.update(model, scale * rng.normal(size=2),
                                 rng.normal(size=n_out))
    return model


def state_errors(model):
    oi, wts, cs = gp_stream.direct_state(model.X, model.Y, model.config)
    return (np.abs(model.omega_inv - oi).max() / np.abs(oi).max(),
            np.abs(model.weights - wts).max() / np.abs(wts).max(),
            np.abs(model.corr_sums - cs).max() / np.abs(cs).max())


class TestInit:
    def test_study_scale_inverse_identity(self):
        cfg = ModelConfig(budget=100, local_budget=50, noise=1.0,
                          rkhs_bound=100.0, kernel=KP)
        m = gp_stream.init(np.array([0.1745, 0.0]), np.array([0.0, -7.9]), cfg)
        Om = regularized_gram(m.X, KP, 1.0)
        assert np.abs(m.omega_inv @ Om - np.eye(100)).max() < 1e-8

    def test_two_point_analytic_inverse(self):
        cfg = small_config(budget=2, local=1, noise=1.3)
        m = gp_stream.init(np.array([0.5, -0.5]), np.array([1.0]), cfg)
        s, r2 = KP.scale, 1.3 ** 2
        # inverse of [[s+r2, s], [s, s+r2]]
        det = (s + r2) ** 2 - s ** 2
        expected = np.array([[s + r2, -s], [-s, s + r2]]) / det
        np.testing.assert_allclose(m.omega_inv, expected, rtol=1e-10)

    def test_identical_rows_corr_sums(self):
        cfg = small_config(budget=6, local=3)
        m = gp_stream.init(np.zeros(2), np.zeros(1), cfg)
        np.testing.assert_allclose(m.corr_sums, 6 * KP.scale)

    def test_flag_layout(self):
        cfg = small_config(budget=7, local=3)
        m = gp_stream.init(np.zeros(2), np.zeros(1), cfg)
        np.testing.assert_array_equal(m.flags, [1, 1, 1, 1, 0, 0, 0])

    def test_config_validation(self):
        with pytest.raises(UsageError):
            small_config(budget=4, local=4)
        with pytest.raises(UsageError):
            small_config(budget=4, local=0)
        with pytest.raises(UsageError):
            ModelConfig(budget=4, local_budget=2, noise=1.0, rkhs_bound=100.0,
                        kernel=KP, blend_rate=0.5)


class TestSelection:
    def test_identical_local_points_tie_break(self):
        cfg = small_config(budget=6, local=3)
        m = gp_stream.init(np.zeros(2), np.zeros(1), cfg)
        # all duals equal: lowest local index wins
        assert gp_stream.select_local_victim(m, np.array([0.2, 0.1])) == 3

    def test_local_victim_matches_brute_force(self, rng):
        cfg = small_config(budget=4, local=2)
        m = streamed(rng, cfg, 12)
        for _ in range(10):
            x = rng.normal(size=2)
            dual = m.omega_inv @ kernel_vector(x, m.X, KP)
            locals_ = np.flatnonzero(m.flags == 0)
            best = min(locals_, key=lambda i: (abs(dual[i]), i))
            assert gp_stream.select_local_victim(m, x) == best

    def test_local_victim_unique_minimum(self, rng):
        cfg = small_config(budget=5, local=2)
        m = streamed(rng, cfg, 9)
        dual = m.omega_inv @ kernel_vector(np.array([0.1, 0.2]), m.X, KP)
        locals_ = np.flatnonzero(m.flags == 0)
        chosen = gp_stream.select_local_victim(m, np.array([0.1, 0.2]))
        assert abs(dual[chosen]) == min(abs(dual[i]) for i in locals_)

    def test_removal_identical_rows_tie_break(self):
        cfg = small_config(budget=6, local=3)
        m = gp_stream.init(np.zeros(2), np.zeros(1), cfg)
        assert gp_stream.select_removal(m, j_k=3) == 0

    def test_removal_matches_brute_force(self, rng):
        cfg = small_config(budget=4, local=2)
        m = streamed(rng, cfg, 15)
        locals_ = np.flatnonzero(m.flags == 0)
        j_k = int(locals_[0])
        cand = sorted(set(np.flatnonzero(m.flags == 1)) | {j_k})
        best = max(cand, key=lambda i: (m.corr_sums[i], -i))
        assert gp_stream.select_removal(m, j_k) == best

    def test_removal_prefers_clustered_point(self, rng):
        # one preserve-pool point sits inside a cluster, others isolated
        cfg = small_config(budget=5, local=1, noise=0.5)
        m = gp_stream.init(np.array([0.0, 0.0]), np.zeros(1), cfg)
        cluster = [np.array([0.01, 0.0]), np.array([0.0, 0.01]),
                   np.array([-0.01, 0.0]), np.array([8.0, 8.0]),
                   np.array([-8.0, 8.0])]
        for x in cluster:
            m = gp_stream.update(m, x, np.zeros(1))
        corr = m.corr_sums
        cand = sorted(set(np.flatnonzero(m.flags == 1)) | {gp_stream.select_local_victim(m, np.zeros(2))})
        l_k = gp_stream.select_removal(m, cand[0] if m.flags[cand[0]] == 0 else cand[0])
        assert corr[l_k] == max(corr[i] for i in cand)


class TestUpdate:
    def test_single_update_inverse_identity(self, rng):
        cfg = small_config()
        m = streamed(rng, cfg, 1)
        Om = regularized_gram(m.X, KP, cfg.noise)
        assert np.abs(m.omega_inv @ Om - np.eye(cfg.budget)).max() < 1e-6

    def test_reinsert_removed_point_is_permutation(self, rng):
        cfg = small_config(budget=5, local=2)
        m = streamed(rng, cfg, 6)
        x_k = rng.normal(size=2)
        j = gp_stream.select_local_victim(m, x_k)
        l = gp_stream.select_removal(m, j)
        old_rows = [tuple(r) for i, r in enumerate(m.X) if i != l]
        m2 = gp_stream.update(m, x_k, rng.normal(size=2))
        new_rows = [tuple(r) for r in m2.X]
        assert sorted(new_rows) == sorted(old_rows + [tuple(x_k)])

    def test_long_stream_matches_direct_recomputation(self, rng):
        cfg = small_config(budget=10, local=5)
        model = gp_stream.init(rng.normal(size=2), rng.normal(size=2), cfg)
        worst = 0.0
        for _ in range(120):
            model = gp_stream.update(model, rng.normal(size=2), rng.normal(size=2))
            worst = max(worst, max(state_errors(model)))
        assert worst < 1e-6

    def test_budget_conservation_and_newest_flag(self, rng):
        cfg = small_config(budget=7, local=3)
        model = gp_stream.init(rng.normal(size=2), rng.normal(size=1), cfg)
        for _ in range(40):
            model = gp_stream.update(model, rng.normal(size=2), rng.normal(size=1))
            assert int((model.flags == 0).sum()) == 3
            assert int((model.flags == 1).sum()) == 4
            assert model.flags[-1] == 0
            assert model.X.shape == (7, 2)

    def test_update_does_not_mutate_previous(self, rng):
        cfg = small_config()
        m1 = streamed(rng, cfg, 3)
        X_copy = m1.X.copy()
        inv_copy = m1.omega_inv.copy()
        gp_stream.update(m1, rng.normal(size=2), rng.normal(size=2))
        np.testing.assert_array_equal(m1.X, X_copy)
        np.testing.assert_array_equal(m1.omega_inv, inv_copy)

    def test_corrupted_pivot_raises(self, rng):
        cfg = small_config()
        m = streamed(rng, cfg, 3)
        m.omega_inv[:] = -np.eye(cfg.budget)
        with pytest.raises(NumericalFailure):
            gp_stream.update(m, rng.normal(size=2), rng.normal(size=2))

    def test_non_finite_rejected(self, rng):
        cfg = small_config()
        m = streamed(rng, cfg, 2)
        with pytest.raises(UsageError):
            gp_stream.update(m, np.array([np.nan, 0.0]), np.zeros(2))

    def test_printed_tail_variant_breaks_row_sums(self, rng):
        # regression guard: the alternative tail (removed point's correlation
        # sum instead of the new point's) violates the row-sum identity
        cfg = small_config(budget=6, local=3)
        m = streamed(rng, cfg, 4)
        x_k = rng.normal(size=2)
        q_full = kernel_vector(x_k, m.X, KP)
        j = gp_stream._select_local_victim(m, m.omega_inv @ q_full)
        l = gp_stream.select_removal(m, j)
        q_small = np.delete(q_full, l)
        good = gp_stream._next_corr_sums(m, x_k, l, q_full, q_small)
        bad = gp_stream._next_corr_sums(m, x_k, l, q_full, q_small, printed_tail=True)
        m2 = gp_stream.update(m, x_k, rng.normal(size=2))
        _, _, cs = gp_stream.direct_state(m2.X, m2.Y, cfg)
        np.testing.assert_allclose(good, cs, rtol=1e-9)
        assert np.abs(bad - cs).max() > 1e-3

    def test_refresh_interval_resets_state(self, rng):
        cfg = small_config(refresh_interval=5)
        model = gp_stream.init(rng.normal(size=2), rng.normal(size=2), cfg)
        for _ in range(10):
            model = gp_stream.update(model, rng.normal(size=2), rng.normal(size=2))
        assert max(state_errors(model)) < 1e-12

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=10)
    def test_deterministic_victims(self, seed):
        rng1 = np.random.default_rng(seed)
        rng2 = np.random.default_rng(seed)
        cfg = small_config(budget=6, local=3)
        m1 = streamed(rng1, cfg, 10)
        m2 = streamed(rng2, cfg, 10)
        np.testing.assert_array_equal(m1.X, m2.X)
        np.testing.assert_array_equal(m1.flags, m2.flags)
        np.testing.assert_array_equal(m1.omega_inv, m2.omega_inv)


class TestPredict:
    def test_matches_batch_model(self, rng):
        cfg = small_config(budget=9, local=4)
        m = streamed(rng, cfg, 20)
        bm = gp_batch.fit(m.X, m.Y, KP, cfg.noise, cfg.rkhs_bound)
        for _ in range(10):
            x = rng.normal(size=2)
            est = gp_stream.predict(m, x)
            np.testing.assert_allclose(est.mean, gp_batch.batch_mean(x, bm), rtol=1e-8)
            assert est.sigma == pytest.approx(gp_batch.batch_sigma(x, bm), rel=1e-8)
            np.testing.assert_allclose(est.bound_factor,
                                       gp_batch.batch_bound_factor(bm), rtol=1e-8)
            np.testing.assert_allclose(est.phi, est.bound_factor * est.sigma)

    def test_zero_targets(self, rng):
        cfg = small_config(budget=6, local=3)
        m = gp_stream.init(rng.normal(size=2), np.zeros(2), cfg)
        est = gp_stream.predict(m, rng.normal(size=2))
        np.testing.assert_allclose(est.mean, 0.0)
        np.testing.assert_allclose(est.bound_factor,
                                   np.sqrt(cfg.rkhs_bound ** 2 + cfg.budget))

    def test_predict_many_matches_scalar(self, rng):
        cfg = small_config(budget=7, local=3)
        m = streamed(rng, cfg, 15)
        Xq = rng.normal(size=(9, 2))
        means, sigmas, phis = gp_stream.predict_many(m, Xq, chunk=4)
        for i, x in enumerate(Xq):
            est = gp_stream.predict(m, x)
            np.testing.assert_allclose(means[i], est.mean, rtol=1e-10)
            assert sigmas[i] == pytest.approx(est.sigma, rel=1e-10)
            np.testing.assert_allclose(phis[i], est.phi, rtol=1e-10)


class TestSnapshotIO:
    def test_round_trip(self, rng, tmp_path):
        cfg = small_config(budget=6, local=2)
        m = streamed(rng, cfg, 8)
        path = tmp_path / "snap.npz"
        gp_stream.save_snapshot(m, path)
        m2 = gp_stream.load_snapshot(path)
        np.testing.assert_array_equal(m.X, m2.X)
        np.testing.assert_array_equal(m.Y, m2.Y)
        np.testing.assert_array_equal(m.flags, m2.flags)
        np.testing.assert_array_equal(m.omega_inv, m2.omega_inv)
        np.testing.assert_array_equal(m.weights, m2.weights)
        np.testing.assert_array_equal(m.corr_sums, m2.corr_sums)
        assert m2.step == m.step
        assert m2.config == m.config
        # loaded model keeps streaming
        m3 = gp_stream.update(m2, rng.normal(size=2), rng.normal(size=2))
        assert max(state_errors(m3)) < 1e-8

    def test_version_check(self, rng, tmp_path):
        cfg = small_config(budget=4, local=2)
        m = streamed(rng, cfg, 2)
        path = tmp_path / "snap.npz"
        gp_stream.save_snapshot(m, path)
        data = dict(np.load(path))
        data["format_version"] = np.int64(99)
        np.savez(path, **data)
        with pytest.raises(UsageError):
            gp_stream.load_snapshot(path)

    def test_snapshot_view_is_cheap_and_frozen(self, rng):
        cfg = small_config()
        m = streamed(rng, cfg, 2)
        snap = gp_stream.snapshot(m)
        assert snap.X is m.X and snap.omega_inv is m.omega_inv
        m2 = gp_stream.update(m, rng.normal(size=2), rng.normal(size=2))
        assert m2.X is not snap.X
