"""Acceptance gate: ten numbered criteria, one printed verdict line each.

The heavy end-to-end path (criteria 6 through 9) runs the real command-line
pipeline once per seed at full scale: suite seed 7, train seed 2, reduced
training profile (300 epochs, hidden 16), T = 2000. Verdict lines are
written past pytest's capture so they always appear in the run log.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from tracefill.autodiff import Tape
from tracefill.circuit import CircuitParams, Dc, WaveformSpec, simulate
from tracefill.cli import main
from tracefill.fileio import load_model, read_dataset_csv, save_model
from tracefill.nn import NetConfig
from tracefill.preprocess import (
    coverage_counts,
    fit_scaler,
    inverse_transform,
    overlap_mean,
    sliding_windows,
    transform,
    window_stack,
)
from tracefill.reconstruct import ReconstructionSpec, reconstruct
from tracefill.training import TrainConfig, train

SUITE_SEED = 7
TRAIN_SEED = 2
REDUCED_EPOCHS = 300
HIDDEN = 16
FEATURES = ("u1", "i1", "u2", "i2")

# criterion 6 bounds
REL_RMSE_BOUND = 0.5
LOSS_RATIO_BOUND = 0.1
MIN_PASSING_FEATURES = 3
RUNTIME_BOUND_S = 15 * 60

# criterion 8 bounds
TWO_MISSING_PAIR = ("u1", "u2")
TWO_MISSING_RATIO_BOUND = 0.5
TWO_MISSING_REL_BOUND = 0.7


@pytest.fixture
def verdict(request):
    """Reporter printing one pass/fail line per criterion.

    Lines are collected on the pytest config and re-emitted in the
    terminal summary (see conftest), where output capture cannot
    swallow them.
    """

    def report(criterion: int, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines = getattr(request.config, "acceptance_lines", None)
        if lines is None:
            lines = []
            request.config.acceptance_lines = lines
        lines.append(line)
        print(line, flush=True)
        assert ok, line

    return report


def run_pipeline(root: Path) -> dict:
    """simulate + train + reconstruct each feature, via the real CLI."""
    started = time.perf_counter()
    data_dir = root / "data"
    model_path = root / "model.json"
    config = root / "sim.json"
    config.write_text(json.dumps({"seed": SUITE_SEED}))
    assert main(["simulate", "--config", str(config), "--out", str(data_dir)]) == 0
    assert (
        main(
            [
                "train",
                "--data", str(data_dir),
                "--out", str(model_path),
                "--epochs", str(REDUCED_EPOCHS),
                "--hidden", str(HIDDEN),
                "--seed", str(TRAIN_SEED),
            ]
        )
        == 0
    )
    recon_dir = root / "recon"
    for feature in FEATURES:
        assert (
            main(
                [
                    "reconstruct",
                    "--model", str(model_path),
                    "--data", str(data_dir / "test_1.csv"),
                    "--missing", feature,
                    "--out", str(recon_dir),
                ]
            )
            == 0
        )
    elapsed = time.perf_counter() - started

    truth = read_dataset_csv(data_dir / "test_1.csv")
    per_feature = {}
    for feature in FEATURES:
        result = read_dataset_csv(recon_dir / f"reconstruction_test_1_{feature}.csv")
        # curve rows: loss before each update, then the loss after the final
        # update as the last row
        losses = np.loadtxt(
            recon_dir / f"loss_test_1_{feature}.csv", delimiter=",", skiprows=1
        )[:, 1]
        ref = truth.column(feature)
        raw = result.column(f"{feature}_xmiss")
        hat = result.column(f"{feature}_xhatmiss")
        per_feature[feature] = {
            "rel_raw": float(np.sqrt(np.mean((raw - ref) ** 2)) / ref.std()),
            "rel_hat": float(np.sqrt(np.mean((hat - ref) ** 2)) / ref.std()),
            "rmse_raw": float(np.sqrt(np.mean((raw - ref) ** 2))),
            "rmse_hat": float(np.sqrt(np.mean((hat - ref) ** 2))),
            "loss_ratio": float(losses[-1] / losses[0]),
        }
    return {
        "root": root,
        "data_dir": data_dir,
        "model_path": model_path,
        "recon_dir": recon_dir,
        "elapsed": elapsed,
        "per_feature": per_feature,
        "truth": truth,
    }


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("acceptance"))


@pytest.fixture(scope="session")
def toy_suite():
    params = CircuitParams()
    rng_specs = [
        WaveformSpec((Dc(2.0),)),
        WaveformSpec((Dc(-1.5),)),
    ]
    data = [simulate(params, s, 1e-8, 60) for s in rng_specs]
    net = NetConfig(n_features=4, seq_len=3, lstm_hidden=4, latent_dim=2)
    model, _ = train(data, TrainConfig(epochs=10, seed=0, net=net))
    return model, data


class TestCriterion1:
    def test_gradient_correctness(self, verdict):
        started = time.perf_counter()
        code = main(["gradcheck"])
        elapsed = time.perf_counter() - started
        ok = code == 0 and elapsed < 30.0
        verdict(
            1,
            ok,
            f"op sweep + end-to-end vs central differences (tol 1e-5) "
            f"in {elapsed:.1f}s (bound 30s)",
        )


class TestCriterion2:
    def test_frozen_parameters_bitwise(self, toy_suite, verdict):
        model, data = toy_suite
        before = {k: v.copy() for k, v in model.params.as_dict().items()}
        reconstruct(
            model, data[0], ReconstructionSpec(missing=("u2",), epochs=8)
        )
        after = model.params.as_dict()
        ok = all(np.array_equal(before[k], after[k]) for k in before)
        verdict(2, ok, "model parameters bitwise unchanged by reconstruction")


class TestCriterion3:
    def test_exclusion_property(self, toy_suite, verdict):
        model, data = toy_suite
        spec = ReconstructionSpec(missing=("i1",), epochs=6)
        res_a = reconstruct(model, data[1], spec)

        poisoned = data[1].values.copy()
        poisoned[:, 1] = 7.0 + np.arange(len(poisoned)) * 13.0
        res_b = reconstruct(model, data[1].replace_values(poisoned), spec)

        ok = (
            res_a.loss_history == res_b.loss_history
            and res_a.final_loss == res_b.final_loss
            and np.array_equal(res_a.x_miss["i1"], res_b.x_miss["i1"])
        )
        verdict(
            3, ok, "loss and trajectory identical to the last bit under "
            "arbitrary perturbation of the missing data column"
        )


class TestCriterion4:
    def test_window_overlap_gradient(self, verdict):
        T, s = 17, 3
        tape = Tape()
        x = tape.leaf(np.linspace(0.0, 1.0, T).reshape(T, 1), requires_grad=True)
        num = T - s + 1
        total = None
        for t in range(s):
            part = tape.sum(tape.slice_rows(x, t, t + num))
            total = part if total is None else tape.add(total, part)
        grads = tape.backward(total)
        expected = coverage_counts(T, s).astype(float).reshape(T, 1)
        ok = np.array_equal(grads[x], expected)
        verdict(
            4, ok,
            "d(sum over windows)/dx equals per-sample coverage counts exactly",
        )


class TestCriterion5:
    def test_circuit_physics(self, pipeline, verdict):
        from tracefill.circuit import SUITE_PARAMS, kcl_residual

        # KCL on every dataset the pipeline generated
        kcl_ok = True
        for csv_path in sorted(pipeline["data_dir"].glob("*.csv")):
            data = read_dataset_csv(csv_path)
            residual = np.max(np.abs(kcl_residual(data, SUITE_PARAMS)))
            bound = 1e-6 * np.max(np.abs(data.column("i1")))
            kcl_ok = kcl_ok and residual < bound

        # RK4 order under step halving against a fine reference
        from tracefill.circuit import Sine

        spec = WaveformSpec((Sine(3.0, 2e5, 0.3), Dc(1.0)))
        t_end = 4e-6

        def endpoint(dt):
            n = int(round(t_end / dt)) + 1
            return simulate(SUITE_PARAMS, spec, dt, n).values[-1, :3]

        reference = endpoint(1.25e-9)
        ratio = float(
            np.abs(endpoint(2e-8) - reference).max()
            / np.abs(endpoint(1e-8) - reference).max()
        )
        rk4_ok = 12.0 <= ratio <= 20.0

        # DC steady state vs the closed-form divider, 0.1 %
        level = 5.0
        dc_data = simulate(SUITE_PARAMS, WaveformSpec((Dc(level),)), 1e-8, 4000)
        i1_expect = level / (SUITE_PARAMS.r1 + SUITE_PARAMS.rload)
        u2_expect = level * SUITE_PARAMS.rload / (SUITE_PARAMS.r1 + SUITE_PARAMS.rload)
        tail = dc_data.values[-100:]
        dc_ok = (
            abs(tail[:, 1].mean() - i1_expect) / i1_expect < 1e-3
            and abs(tail[:, 2].mean() - u2_expect) / u2_expect < 1e-3
        )

        ok = kcl_ok and rk4_ok and dc_ok
        verdict(
            5, ok,
            f"KCL < 1e-6*max|i1| on all sets ({kcl_ok}), RK4 halving ratio "
            f"{ratio:.1f} in [12, 20] ({rk4_ok}), DC divider within 0.1% ({dc_ok})",
        )


class TestCriterion6:
    def test_single_missing_reconstruction(self, pipeline, verdict):
        passing = []
        details = []
        for feature in FEATURES:
            stats = pipeline["per_feature"][feature]
            ok = (
                stats["rel_hat"] < REL_RMSE_BOUND
                and stats["loss_ratio"] < LOSS_RATIO_BOUND
            )
            passing.append(ok)
            details.append(
                f"{feature}: rel {stats['rel_hat']:.3f} ratio "
                f"{stats['loss_ratio']:.3f} {'ok' if ok else 'miss'}"
            )
        count = sum(passing)
        ok = count >= MIN_PASSING_FEATURES and pipeline["elapsed"] < RUNTIME_BOUND_S
        verdict(
            6, ok,
            f"{count}/4 features pass (need {MIN_PASSING_FEATURES}); "
            + "; ".join(details)
            + f"; runtime {pipeline['elapsed']:.0f}s (bound {RUNTIME_BOUND_S}s)",
        )


class TestCriterion7:
    def test_refined_beats_raw(self, pipeline, verdict):
        checked = []
        ok = True
        for feature in FEATURES:
            stats = pipeline["per_feature"][feature]
            if (
                stats["rel_hat"] < REL_RMSE_BOUND
                and stats["loss_ratio"] < LOSS_RATIO_BOUND
            ):
                good = stats["rmse_hat"] <= stats["rmse_raw"]
                ok = ok and good
                checked.append(
                    f"{feature}: hat {stats['rmse_hat']:.4g} vs raw "
                    f"{stats['rmse_raw']:.4g} {'ok' if good else 'WORSE'}"
                )
        verdict(
            7, ok,
            "RMSE(x_hat) <= RMSE(x_miss) on successful features; "
            + "; ".join(checked),
        )


class TestCriterion8:
    def test_two_missing_features(self, pipeline, verdict):
        model = load_model(pipeline["model_path"])
        truth = pipeline["truth"]
        spec = ReconstructionSpec(missing=TWO_MISSING_PAIR)
        res = reconstruct(model, truth, spec)
        ratio = res.final_loss / res.initial_loss
        rels = {}
        for feature in TWO_MISSING_PAIR:
            ref = truth.column(feature)
            err = np.sqrt(np.mean((res.x_hat_miss[feature] - ref) ** 2))
            rels[feature] = float(err / ref.std())
        ok = ratio < TWO_MISSING_RATIO_BOUND and min(rels.values()) < TWO_MISSING_REL_BOUND
        verdict(
            8, ok,
            f"missing {TWO_MISSING_PAIR}: loss ratio {ratio:.4f} "
            f"(bound {TWO_MISSING_RATIO_BOUND}), rel RMSE "
            + ", ".join(f"{k} {v:.3f}" for k, v in rels.items())
            + f" (best must beat {TWO_MISSING_REL_BOUND})",
        )


class TestCriterion9:
    def test_determinism_bytes(self, pipeline, tmp_path_factory, verdict):
        repeat = run_pipeline(tmp_path_factory.mktemp("acceptance_repeat"))
        first_root = pipeline["root"]
        second_root = repeat["root"]
        mismatches = []
        def listing(root):
            return sorted(
                p.relative_to(root)
                for p in root.rglob("*")
                if p.suffix in (".csv", ".json") and p.is_file()
            )

        first_files = listing(first_root)
        for rel in first_files:
            if (first_root / rel).read_bytes() != (second_root / rel).read_bytes():
                mismatches.append(str(rel))
        ok = (
            not mismatches
            and first_files == listing(second_root)
            and len(first_files) > 10
        )
        verdict(
            9, ok,
            f"{len(first_files)} output files byte-identical across "
            f"repeated runs" + (f"; mismatches: {mismatches}" if mismatches else ""),
        )


class TestCriterion10:
    def test_round_trips(self, pipeline, tmp_path, verdict):
        # scaler round trip within 1e-12 on the real suite data
        datasets = [
            read_dataset_csv(p) for p in sorted(pipeline["data_dir"].glob("*.csv"))
        ]
        scaler = fit_scaler(datasets)
        scaler_ok = True
        for data in datasets:
            back = inverse_transform(scaler, transform(scaler, data))
            scaler_ok = scaler_ok and np.allclose(
                back.values, data.values, atol=1e-12, rtol=0
            )

        # model file round trip, bit-exact
        model = load_model(pipeline["model_path"])
        clone_path = tmp_path / "clone.json"
        save_model(clone_path, model)
        clone = load_model(clone_path)
        model_ok = all(
            np.array_equal(a, clone.params.as_dict()[k])
            for k, a in model.params.as_dict().items()
        )
        model_ok = model_ok and (
            clone_path.read_bytes() == Path(pipeline["model_path"]).read_bytes()
        )

        # overlap_mean after sliding_windows restores the series
        data = datasets[0]
        batch = sliding_windows(data, 3)
        merged = overlap_mean(batch)
        overlap_ok = np.allclose(merged.values, data.values, atol=1e-12, rtol=0)
        # and the plain array path is exact for exact window copies
        w = window_stack(data.values, 3)
        from tracefill.preprocess import overlap_mean_values

        overlap_ok = overlap_ok and np.allclose(
            overlap_mean_values(w, data.values.shape[0]),
            data.values,
            atol=1e-12,
            rtol=0,
        )

        ok = scaler_ok and model_ok and overlap_ok
        verdict(
            10, ok,
            f"scaler round trip 1e-12 ({scaler_ok}), model save/load "
            f"bit-exact ({model_ok}), overlap_mean inverts windowing ({overlap_ok})",
        )
