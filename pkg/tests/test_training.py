"""Training loop tests at toy scale."""

import numpy as np
import pytest

from tracefill.nn import NetConfig
from tracefill.preprocess import TimeSeriesSet, transform
from tracefill.training import (
    TrainConfig,
    evaluate_model,
    reconstruct_series,
    train,
)

TOY_NET = NetConfig(n_features=4, seq_len=3, lstm_hidden=4, latent_dim=2)


class TestTrainConfig:
    def test_defaults(self):
        config = TrainConfig()
        assert config.epochs == 1000
        assert config.learning_rate == 0.001
        assert config.net.seq_len == 3

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=-1.0)


class TestTrain:
    def test_loss_drops_and_history_is_complete(self, toy_datasets):
        config = TrainConfig(epochs=25, seed=0, net=TOY_NET)
        model, history = train(toy_datasets, config)
        assert len(history) == 25 * len(toy_datasets)
        first = np.mean([r.loss for r in history[: len(toy_datasets)]])
        last = np.mean([r.loss for r in history[-len(toy_datasets) :]])
        assert last < first
        assert all(np.isfinite(r.loss) for r in history)
        assert len(model.final_losses) == len(toy_datasets)

    def test_dataset_rotation_order(self, toy_datasets):
        config = TrainConfig(epochs=3, seed=0, net=TOY_NET)
        _, history = train(toy_datasets, config)
        order = [r.dataset_index for r in history]
        # epoch e starts at dataset e % D and wraps around
        assert order == [0, 1, 2, 1, 2, 0, 2, 0, 1]
        epochs = [r.epoch for r in history]
        assert epochs == [0, 0, 0, 1, 1, 1, 2, 2, 2]

    def test_training_is_deterministic(self, toy_datasets):
        config = TrainConfig(epochs=8, seed=4, net=TOY_NET)
        model_a, hist_a = train(toy_datasets, config)
        model_b, hist_b = train(toy_datasets, config)
        for name, arr in model_a.params.as_dict().items():
            np.testing.assert_array_equal(arr, model_b.params.as_dict()[name])
        assert [r.loss for r in hist_a] == [r.loss for r in hist_b]

    def test_seed_changes_the_result(self, toy_datasets):
        config_a = TrainConfig(epochs=5, seed=1, net=TOY_NET)
        config_b = TrainConfig(epochs=5, seed=2, net=TOY_NET)
        model_a, _ = train(toy_datasets, config_a)
        model_b, _ = train(toy_datasets, config_b)
        assert any(
            not np.array_equal(
                model_a.params.as_dict()[n], model_b.params.as_dict()[n]
            )
            for n in model_a.params.as_dict()
        )

    def test_scaler_covers_all_training_data(self, toy_datasets):
        config = TrainConfig(epochs=2, seed=0, net=TOY_NET)
        model, _ = train(toy_datasets, config)
        stacked = np.vstack([d.values for d in toy_datasets])
        np.testing.assert_array_equal(model.scaler.mins, stacked.min(axis=0))
        np.testing.assert_array_equal(model.scaler.maxs, stacked.max(axis=0))

    def test_mismatched_feature_names_raise(self, toy_datasets):
        bad = TimeSeriesSet(
            ("a", "b", "c", "d"),
            0.0,
            1e-8,
            np.zeros((40, 4)) + np.linspace(0, 1, 40)[:, None],
        )
        with pytest.raises(ValueError):
            train([toy_datasets[0], bad], TrainConfig(epochs=1, net=TOY_NET))

    def test_too_short_series_raises(self, toy_datasets):
        short = toy_datasets[0].replace_values(toy_datasets[0].values[:2])
        with pytest.raises(ValueError):
            train([short], TrainConfig(epochs=1, net=TOY_NET))

    def test_feature_count_must_match_net(self, toy_datasets):
        config = TrainConfig(epochs=1, net=NetConfig(n_features=3, lstm_hidden=4, latent_dim=2))
        with pytest.raises(ValueError):
            train(toy_datasets, config)

    def test_constant_series_reconstructs_well(self):
        # an autoencoder trained on constants should reproduce them closely
        values = np.full((30, 4), 1.0) * np.array([2.0, 0.5, -1.0, 3.0])
        noise = np.linspace(0, 0.05, 30)[:, None] * np.array([1.0, -1.0, 1.0, -1.0])
        data = TimeSeriesSet(("a", "b", "c", "d"), 0.0, 1.0, values + noise)
        config = TrainConfig(epochs=300, seed=0, learning_rate=0.03, net=TOY_NET)
        model, _ = train([data], config)
        report = evaluate_model(model, data)
        assert max(report.mse_scaled.values()) < 1e-3


class TestEvaluation:
    def test_reconstruction_shape_and_determinism(self, toy_model, toy_datasets):
        model, _ = toy_model
        data = toy_datasets[0]
        report_a = evaluate_model(model, data)
        report_b = evaluate_model(model, data)
        assert report_a.reconstruction.values.shape == data.values.shape
        np.testing.assert_array_equal(
            report_a.reconstruction.values, report_b.reconstruction.values
        )
        assert report_a.mse_scaled == report_b.mse_scaled

    def test_reconstruct_series_round_trip_scale(self, toy_model, toy_datasets):
        model, _ = toy_model
        scaled = transform(model.scaler, toy_datasets[0])
        out = reconstruct_series(model, scaled.values)
        assert out.shape == scaled.values.shape
        assert np.isfinite(out).all()
