import dataclasses
import json
from fractions import Fraction

import numpy as np
import pytest

import kanaft.trainers as trainers
from kanaft.data import SurvivalDataset, SyntheticSpec, generate, split
from kanaft.errors import ConfigError, DegenerateError, DivergenceError, ShapeError
from kanaft.metrics import c_index, mse_log
from kanaft.network import RegConfig, edge_l1_norms, forward_batch, init_network, prune
from kanaft.trainers import (
    FitConfig,
    compute_ipcw_weights,
    fit,
    load_model,
    predict_time,
    save_model,
    train_weighted_mse,
    transform_times,
)

NO_REG = RegConfig(0.0, 0.0, 0.0)


def dataset(times, events, p=1, seed=0):
    rng = np.random.default_rng(seed)
    n = len(times)
    return SurvivalDataset(np.asarray(times, float), np.asarray(events, bool), rng.normal(size=(n, p)),
                           [f"z{i + 1}" for i in range(p)])


def step_transform_oracle(times, events):
    """alpha and T* from an explicit rational step function for G(u-)."""
    times = [Fraction(t) for t in times]
    n = len(times)
    jumps = {}
    for u in sorted(set(times)):
        censored = sum(1 for t, e in zip(times, events) if t == u and not e)
        at_risk = sum(1 for t in times if t >= u)
        if censored:
            jumps[u] = Fraction(censored, at_risk)

    def g_left(u):
        g = Fraction(1)
        for v, h in sorted(jumps.items()):
            if v < u:
                g *= 1 - h
        return g

    def integral(T):
        # G(u-) is constant on (a, b] between consecutive jump points
        cuts = sorted({Fraction(0), T, *(v for v in jumps if v < T)})
        return sum((b - a) / g_left(b) for a, b in zip(cuts, cuts[1:]))

    ratios = []
    for t, e in zip(times, events):
        if e:
            num = integral(t) - t
            den = t / g_left(t) - integral(t)
            if den != 0:
                ratios.append(num / den)
    alpha = min(ratios) if ratios else Fraction(0)
    out = []
    for t, e in zip(times, events):
        base = (1 + alpha) * integral(t)
        out.append(base - alpha * t / g_left(t) if e else base)
    assert len(out) == n
    return float(alpha), [float(v) for v in out]


class TestConfig:
    def test_budgets(self):
        assert FitConfig().round_epochs == 200 and FitConfig().epochs == 1500
        assert FitConfig(epochs=40, epochs_per_round=None).round_epochs == 40

    def test_alias(self):
        assert FitConfig(strategy="bj").strategy == "buckley_james"

    @pytest.mark.parametrize("kw", [{"strategy": "cox"}, {"bj_tolerance": 0}, {"max_bj_rounds": 0},
                                    {"learning_rate": -1.0}, {"epochs": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            FitConfig(**kw)

    def test_dict_round_trip(self):
        cfg = FitConfig(strategy="ipcw", epochs=7, reg=RegConfig(0.1, 0.2, 0.3), hidden=(2,))
        assert FitConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            FitConfig.from_dict({"epoch": 3})


class TestTrainWeightedMse:
    def test_fixed_point_without_regularization(self):
        net = init_network([2, 1], seed=1, input_ranges=[(-2, 2)] * 2)
        X = np.random.default_rng(0).uniform(-2, 2, (20, 2))
        targets, _ = forward_batch(net, X)
        trained, _ = train_weighted_mse(net, X, targets, np.ones(20), FitConfig(reg=NO_REG), epochs=50)
        assert trained.param_vector().tobytes() == net.param_vector().tobytes()

    def test_fixed_point_moves_only_by_regularizer(self):
        net = init_network([2, 1], seed=1, input_ranges=[(-2, 2)] * 2)
        X = np.random.default_rng(0).uniform(-2, 2, (20, 2))
        targets, _ = forward_batch(net, X)
        trained, _ = train_weighted_mse(net, X, targets, np.ones(20), FitConfig(), epochs=1)
        assert not np.array_equal(trained.param_vector(), net.param_vector())

    def test_single_point_interpolation(self):
        net = init_network([1, 1], seed=0, input_ranges=[(-1, 1)])
        _, trace = train_weighted_mse(net, [[0.3]], [0.7], [1.0], FitConfig(reg=NO_REG), epochs=500)
        assert trace[-1] < 1e-4

    def test_input_network_untouched(self):
        net = init_network([1, 1], seed=0)
        before = net.param_vector().copy()
        train_weighted_mse(net, [[0.3]], [0.7], [1.0], FitConfig(), epochs=5)
        assert np.array_equal(net.param_vector(), before)

    def test_weight_scale_invariance(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 2))
        y = X @ [0.5, -1.0] + 0.1 * rng.normal(size=40)
        w = rng.uniform(0, 3, 40)
        net = init_network([2, 1], seed=3, input_ranges=[(-3, 3)] * 2)
        a, _ = train_weighted_mse(net, X, y, w, FitConfig(), epochs=200)
        b, _ = train_weighted_mse(net, X, y, 2 * w, FitConfig(), epochs=200)
        np.testing.assert_allclose(forward_batch(a, X)[0], forward_batch(b, X)[0], atol=1e-6, rtol=0)

    def test_zero_weights(self):
        with pytest.raises(DegenerateError):
            train_weighted_mse(init_network([1, 1]), [[0.1]], [1.0], [0.0], FitConfig())

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            train_weighted_mse(init_network([1, 1]), [[0.1], [0.2]], [1.0], [1.0], FitConfig())

    def test_divergence_reports_epoch(self):
        net = init_network([1, 1], seed=0, input_ranges=[(-1, 1)])
        cfg = FitConfig(learning_rate=1e300, reg=NO_REG)
        with pytest.raises(DivergenceError) as info:
            train_weighted_mse(net, [[0.5], [-0.5]], [1e200, -1e200], [1.0, 1.0], cfg, epochs=20)
        assert info.value.epoch >= 0


class TestIpcwWeights:
    def test_hand_example(self):
        np.testing.assert_allclose(compute_ipcw_weights(dataset([1, 2, 3], [1, 0, 1])), [1, 0, 2])

    def test_no_censoring(self):
        np.testing.assert_array_equal(compute_ipcw_weights(dataset([1, 2, 3], [1, 1, 1])), 1.0)

    def test_all_censored(self):
        with pytest.raises(DegenerateError):
            compute_ipcw_weights(dataset([1, 2, 3], [0, 0, 0]))

    def test_zero_iff_censored(self):
        d = generate(SyntheticSpec(n=300, seed=4))
        w, clamped = compute_ipcw_weights(d, return_clamped=True)
        assert clamped == 0
        np.testing.assert_array_equal(w == 0, ~d.events)
        assert w.sum() > 0


class TestTransform:
    def test_hand_example(self):
        T_star, alpha = transform_times(dataset([1, 2, 3, 4], [1, 0, 1, 1]))
        a_ref, t_ref = step_transform_oracle([1, 2, 3, 4], [1, 0, 1, 1])
        assert alpha == pytest.approx(a_ref, abs=1e-9) and a_ref == 0.5
        np.testing.assert_allclose(T_star, t_ref, atol=1e-9)
        np.testing.assert_allclose(t_ref, [1.0, 3.0, 3.0, 4.5])

    def test_oracle_on_random_small_sets(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n = int(rng.integers(3, 9))
            t = rng.integers(1, 20, n).astype(float)
            e = rng.random(n) < 0.6
            e[np.argmax(t)] = True
            e[np.argmin(t)] = True
            T_star, alpha = transform_times(dataset(t, e))
            a_ref, t_ref = step_transform_oracle(t, e)
            assert alpha == pytest.approx(a_ref, abs=1e-9)
            np.testing.assert_allclose(T_star, t_ref, atol=1e-9)

    def test_no_censoring(self):
        T_star, alpha = transform_times(dataset([1.5, 2, 3], [1, 1, 1]))
        assert alpha == 0.0
        np.testing.assert_array_equal(T_star, [1.5, 2, 3])

    def test_nonnegative_on_random_censored_sets(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            n = int(rng.integers(5, 60))
            latent = rng.lognormal(size=n)
            censor = rng.exponential(rng.uniform(0.5, 5), n)
            events = latent <= censor
            if not events.any():
                events[0] = True
            times = np.where(events, latent, np.minimum(latent, censor))
            # keep the largest time an event so G stays positive before every event
            events[np.argmax(times)] = True
            T_star, _ = transform_times(dataset(times, events))
            assert np.all(T_star >= -1e-9)

    def test_linear_synthetic_nonnegative(self):
        T_star, alpha = transform_times(generate(SyntheticSpec(seed=0)))
        assert np.all(T_star >= 0) and alpha >= 0


@pytest.fixture(scope="module")
def uncensored():
    d = generate(SyntheticSpec(n=200, seed=11, censor_scale=1e300))
    assert d.events.all()
    return d


class TestStrategies:
    def test_bj_round_one_targets_are_log_times(self, uncensored, monkeypatch):
        seen = []
        real = trainers.train_weighted_mse

        def spy(net, inputs, targets, weights, cfg, epochs=None):
            seen.append(np.array(targets))
            return real(net, inputs, targets, weights, cfg, epochs)

        monkeypatch.setattr(trainers, "train_weighted_mse", spy)
        trainers.fit_buckley_james(uncensored, FitConfig(epochs_per_round=20, max_bj_rounds=2))
        np.testing.assert_array_equal(seen[0], np.log(uncensored.times))

    def test_uncensored_strategies_agree(self, uncensored):
        preds = []
        for s in ("buckley_james", "ipcw", "transform"):
            # shared budget: each BJ round trains as long as a one-shot fit
            m = fit(uncensored, FitConfig(strategy=s, epochs=300, epochs_per_round=None, seed=5))
            preds.append(m.predict_log_time(uncensored.covariates))
        for p in preds[1:]:
            np.testing.assert_allclose(p, preds[0], atol=1e-6, rtol=0)

    def test_bj_trace_finite_and_terminates(self):
        d = generate(SyntheticSpec(n=300, seed=1))
        m = fit(d, FitConfig(strategy="bj", epochs_per_round=100, max_bj_rounds=4))
        tr = m.bj_convergence_trace
        assert 1 <= len(tr) <= 4 and np.all(np.isfinite(tr))
        assert tr[-1] < m.config.bj_tolerance or len(tr) == 4
        assert m.extras["bj_rounds"] == len(tr)

    def test_non_bj_has_empty_trace(self):
        m = fit(generate(SyntheticSpec(n=100, seed=1)), FitConfig(strategy="ipcw", epochs=10))
        assert m.bj_convergence_trace.size == 0


@pytest.fixture(scope="module")
def linear_split():
    return split(generate(SyntheticSpec(seed=0)), 0.25, seed=0)


class TestLinearSynthetic:
    def test_loss_decreases(self, linear_split):
        m = fit(linear_split[0], FitConfig(strategy="ipcw"))
        assert m.loss_trace[-1] < m.loss_trace[0]
        assert np.all(np.isfinite(m.loss_trace))

    def test_ipcw_train_c_index_band(self, linear_split):
        m = fit(linear_split[0], FitConfig(strategy="ipcw"))
        assert 0.84 <= m.final_train_metrics.c_index <= 0.89

    def test_bj_test_mse(self, linear_split):
        tr, te = linear_split
        m = fit(tr, FitConfig(strategy="bj"))
        assert mse_log(te.times, te.events, m.predict_times(te.covariates)) <= 0.40
        assert c_index(te.times, te.events, m.predict_times(te.covariates)) > 0.8


class TestPredict:
    def _model(self):
        d = generate(SyntheticSpec(n=60, seed=2))
        return fit(d, FitConfig(strategy="ipcw", epochs=5))

    def test_zero_predictor_gives_one(self):
        m = self._model()
        for p in m.network.parameters():
            p[...] = 0
        assert predict_time(m, [0.1, 2.0, -1.0]) == 1.0

    def test_monotone_in_positive_linear_edge(self):
        net = init_network([1, 1], input_ranges=[(-3, 3)])
        layer = net.layers[0]
        layer.w_b[...] = 0
        layer.coef[0, 0] = layer.knotvec(0, 0).greville()
        m = self._model()
        m = dataclasses.replace(m, network=net, standardization=type(m.standardization).identity(1))
        vals = [predict_time(m, [z]) for z in np.linspace(-2, 2, 9)]
        assert np.all(np.diff(vals) > 0)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            predict_time(self._model(), [1.0, 2.0])

    def test_positive_finite(self):
        m = self._model()
        out = m.predict_times(np.random.default_rng(0).normal(size=(50, 3)))
        assert np.all(out > 0) and np.all(np.isfinite(out))


def test_model_save_load_round_trip(tmp_path):
    d = generate(SyntheticSpec(n=80, seed=3))
    m = fit(d, FitConfig(strategy="transform", epochs=20))
    save_model(m, tmp_path / "m.json", note="x")
    back = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(back.predict_log_time(d.covariates), m.predict_log_time(d.covariates))
    assert back.config == m.config and back.strategy == "transform"
    np.testing.assert_array_equal(back.probe_domains, m.probe_domains)


def test_prune_drops_noise_covariate():
    d = generate(SyntheticSpec(seed=0))
    rng = np.random.default_rng(0)
    noisy = SurvivalDataset(d.times, d.events, np.column_stack([d.covariates, rng.normal(size=len(d))]),
                            [*d.covariate_names, "noise"])
    m = fit(noisy, FitConfig(strategy="ipcw", seed=0))
    Z = m.standardization.apply(noisy.covariates)
    pruned = prune(m.network, 0.05, Z)
    assert pruned.layers[0].mask[0].tolist() == [True, True, True, False]
    _, cache = forward_batch(m.network, Z)
    assert edge_l1_norms(cache)[0][0, 3] < 0.05
