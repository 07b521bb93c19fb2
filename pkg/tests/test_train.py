import numpy as np
import pytest

from gchp.errors import EmptyData, ValidationError
from gchp.events import Dataset, split
from gchp.hawkes import sample_params, simulate_corpus
from gchp.losses import LossSpec
from gchp.model import GchpConfig, param_count
from gchp.train import (
    METRICS_HEADER,
    SWEEP_HEADER,
    EpochRecord,
    SweepRow,
    TrainConfig,
    baseline_metrics,
    evaluate,
    evaluate_predictions,
    metrics_csv,
    saturation_sweep,
    sweep_csv,
    train,
)

TINY = GchpConfig(hidden=4, m=4, p_feat=5, K=4)


@pytest.fixture(scope="module")
def toy():
    data = simulate_corpus(sample_params(4, 1), 15.0, 10, 5)
    return split(data, 0.7, 0)


class TestMetrics:
    def test_perfect(self):
        assert evaluate_predictions([1.0, 2.0], [1.0, 2.0], [0, 1], [0, 1]) == (0.0, 1.0)

    def test_constant_mean_rmse_is_std(self, rng):
        tau = rng.exponential(size=1000)
        rmse, _ = evaluate_predictions(tau, np.full_like(tau, tau.mean()), np.zeros(1000), np.zeros(1000))
        assert rmse == pytest.approx(np.std(tau), rel=1e-12)

    def test_random_accuracy(self, rng):
        K, n = 5, 200_000
        _, acc = evaluate_predictions(np.ones(n), np.ones(n), rng.integers(0, K, n), rng.integers(0, K, n))
        assert acc == pytest.approx(1 / K, abs=0.01)

    def test_empty(self):
        with pytest.raises(EmptyData):
            evaluate_predictions([], [], [], [])

    def test_order_independent(self, rng):
        tau, th = rng.exponential(size=50), rng.exponential(size=50)
        m, mp = rng.integers(0, 3, 50), rng.integers(0, 3, 50)
        perm = rng.permutation(50)
        a = evaluate_predictions(tau, th, m, mp)
        b = evaluate_predictions(tau[perm], th[perm], m[perm], mp[perm])
        assert a[0] == pytest.approx(b[0], rel=1e-14) and a[1] == b[1]

    def test_baseline(self, toy):
        rmse, acc = baseline_metrics(*toy)
        assert rmse > 0 and 0 <= acc <= 1


class TestTrain:
    def test_zero_epochs(self, toy):
        report = train(*toy, TrainConfig(TINY, epochs=0))
        assert [r.epoch for r in report.records] == [0]

    def test_deterministic(self, toy):
        cfg = TrainConfig(TINY, epochs=2, seed=3)
        a, b = train(*toy, cfg), train(*toy, cfg)
        assert metrics_csv(a.records) == metrics_csv(b.records)
        for k in a.model.params:
            np.testing.assert_array_equal(a.model.params[k], b.model.params[k])

    def test_loss_decreases_on_toy_runs(self):
        # 10 sequences, 5 epochs: epoch 5 below epoch 1 in at least 4 of 5 seeds
        wins = 0
        for seed in range(5):
            data = simulate_corpus(sample_params(4, seed), 15.0, 10, seed)
            tr, te = split(data, 0.7, seed)
            recs = train(tr, te, TrainConfig(TINY, epochs=5, seed=seed, lr=3e-3)).records
            wins += recs[5].train_loss < recs[1].train_loss
        assert wins >= 4

    def test_metrics_finite(self, toy):
        report = train(*toy, TrainConfig(TINY, epochs=1))
        for r in report.records:
            assert np.isfinite(r.train_loss) and np.isfinite(r.test_rmse) and 0 <= r.test_accuracy <= 1

    def test_patience_stops(self, toy):
        report = train(*toy, TrainConfig(TINY, epochs=50, lr=1.0, patience=1))
        assert len(report.records) < 51

    def test_lr_score_present(self, toy):
        report = train(*toy, TrainConfig(GchpConfig(layers=1, hidden=1, m=2, p_feat=5, K=4, readout="mean_pool"), epochs=1))
        assert report.lr is not None and report.lr.d_xi == param_count(report.model.config)

    def test_overparameterized_score_is_none(self, toy):
        big = GchpConfig(hidden=64, m=4, p_feat=5, K=4)
        assert param_count(big) >= toy[0].n_events
        assert train(*toy, TrainConfig(big, epochs=0)).lr is None

    def test_wrong_K(self, toy):
        with pytest.raises(ValidationError):
            train(*toy, TrainConfig(GchpConfig(hidden=4, m=4, p_feat=4, K=3), epochs=0))

    @pytest.mark.parametrize("family", ["gaussian", "gamma", "laplacian"])
    @pytest.mark.filterwarnings("ignore:.*mass on tau:RuntimeWarning")
    def test_other_families_run(self, toy, family):
        report = train(*toy, TrainConfig(TINY, LossSpec(family, sigma=0.8, theta=0.5), epochs=1))
        assert np.isfinite(report.final().train_loss)

    def test_evaluate_matches_report(self, toy):
        report = train(*toy, TrainConfig(TINY, epochs=1))
        rmse, acc = evaluate(report.model, toy[1])
        assert rmse == report.final().test_rmse and acc == report.final().test_accuracy


class TestSweep:
    def test_bookkeeping(self, toy, monkeypatch):
        import gchp.train as tr

        calls = []
        real = tr.train

        def counting(*a, **k):
            calls.append(1)
            return real(*a, **k)

        monkeypatch.setattr(tr, "train", counting)
        rows = saturation_sweep(*toy, TrainConfig(TINY, epochs=0), [8], [0, 1])
        assert len(calls) == 2 and len(rows) == 1 and rows[0].width == 8

    def test_d_xi_increasing(self, toy):
        rows = saturation_sweep(*toy, TrainConfig(TINY, epochs=0), [2, 4, 8], [0])
        assert np.all(np.diff([r.d_xi for r in rows]) > 0)

    def test_rejects_unsorted_widths(self, toy):
        with pytest.raises(ValidationError):
            saturation_sweep(*toy, TrainConfig(TINY, epochs=0), [8, 4], [0])


class TestCsv:
    def test_metrics_header_and_blank_seconds(self):
        text = metrics_csv([EpochRecord(0, 1.5, 0.25, 0.5, 3.2)])
        lines = text.splitlines()
        assert lines[0] == ",".join(METRICS_HEADER)
        assert lines[1] == "0,1.5,0.25,0.5,"

    def test_metrics_with_seconds(self):
        assert metrics_csv([EpochRecord(0, 1.5, 0.25, 0.5, 3.2)], include_seconds=True).splitlines()[1].endswith(",3.2")

    def test_sweep(self):
        text = sweep_csv([SweepRow(4, 100, 0.5, 0.01, 0.3)])
        assert text.splitlines() == [",".join(SWEEP_HEADER), "4,100,0.5,0.01,0.3"]
