"""Command-line interface.

Subcommands cover the full experiment loop: ``simulate`` writes the
synthetic circuit suite, ``train`` fits the autoencoder, ``reconstruct``
recovers missing feature columns against a frozen model, ``evaluate``
compares results with ground truth (plus amplitude spectra), and
``gradcheck`` verifies every derivative rule against finite differences.

Exit codes: 0 success, 2 validation/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import circuit, fileio, metrics, preprocess
from .autodiff import NonFiniteError, ShapeError, Tape, grad_check, run_op_checks
from .nn import NetConfig, forward_steps, init_params, lift_params
from .optim import reduced_loss
from .reconstruct import ReconstructionSpec, reconstruct
from .rng import Xoshiro256
from .training import DivergenceError, TrainConfig, train

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

GRADCHECK_TOL = 1e-5


class CliError(ValueError):
    """User-facing validation problem; maps to exit code 2."""


def _load_simulate_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: not valid JSON: {exc}") from None
    known = {"seed", "dt", "n_samples", "circuit"}
    unknown = set(cfg) - known
    if unknown:
        raise CliError(f"{path}: unknown config keys {sorted(unknown)}")
    return cfg


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_simulate_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    dt = float(cfg.get("dt", 1e-8))
    n_samples = args.n_samples if args.n_samples is not None else int(
        cfg.get("n_samples", 2000)
    )
    # absent circuit section means the bundled-suite component values, not
    # the CircuitParams defaults; overriding any component goes through the
    # config's "circuit" table
    circuit_cfg = cfg.get("circuit")
    params = (
        circuit.CircuitParams(**circuit_cfg) if circuit_cfg
        else circuit.SUITE_PARAMS
    )
    suite = circuit.generate_suite(seed, params, dt, n_samples)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for entry in suite.entries:
        filename = f"{entry.name}.csv"
        fileio.write_dataset_csv(out / filename, entry.data)
        entries.append({
            "file": filename,
            "role": entry.role,
            "waveform": [circuit.term_to_dict(t) for t in entry.waveform.terms],
        })
    fileio.write_manifest(out / "manifest.json", {
        "seed": seed,
        "dt": dt,
        "n_samples": n_samples,
        "circuit": {
            "r1": params.r1, "l": params.l, "c0": params.c0,
            "v0": params.v0, "rload": params.rload,
        },
        "datasets": entries,
    })
    print(f"wrote {len(entries)} datasets to {out}")
    return EXIT_OK


def _load_suite_datasets(data_dir: Path, role: str) -> list[preprocess.TimeSeriesSet]:
    manifest_path = data_dir / "manifest.json"
    if manifest_path.exists():
        manifest = fileio.read_manifest(manifest_path)
        files = [d["file"] for d in manifest["datasets"] if d["role"] == role]
    else:
        files = sorted(p.name for p in data_dir.glob(f"{role}_*.csv"))
    if not files:
        raise CliError(f"no {role} datasets found in {data_dir}")
    return [fileio.read_dataset_csv(data_dir / f) for f in files]


def cmd_train(args: argparse.Namespace) -> int:
    data_dir = Path(args.data)
    if not data_dir.is_dir():
        raise CliError(f"data directory {data_dir} does not exist")
    datasets = _load_suite_datasets(data_dir, "train")
    net = NetConfig(
        n_features=datasets[0].n_features,
        seq_len=args.seq_len,
        lstm_hidden=args.hidden,
        latent_dim=args.latent,
    )
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=args.seed,
        net=net,
    )
    started = time.perf_counter()
    model, history = train(datasets, config)
    elapsed = time.perf_counter() - started
    fileio.save_model(args.out, model)
    history_path = args.history or str(Path(args.out).with_suffix(".losses.csv"))
    fileio.write_history_csv(history_path, history)
    mean_final = float(np.mean(model.final_losses))
    print(
        f"trained {config.epochs} epochs on {len(datasets)} datasets "
        f"in {elapsed:.1f}s; mean final loss {mean_final:.3e}"
    )
    print(f"model: {args.out}")
    print(f"history: {history_path}")
    return EXIT_OK


def _parse_weights(text: str | None) -> dict[str, float]:
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise CliError(f"weights must look like name=value, got {part!r}")
        name, value = part.split("=", 1)
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise CliError(f"bad weight value in {part!r}") from None
    return out


def cmd_reconstruct(args: argparse.Namespace) -> int:
    model = fileio.load_model(args.model)
    data = fileio.read_dataset_csv(args.data)
    missing = tuple(m.strip() for m in args.missing.split(",") if m.strip())
    spec = ReconstructionSpec(
        missing=missing,
        epochs=args.epochs,
        learning_rate=args.lr,
        init=args.init,
        weights=_parse_weights(args.weights) or None,
    )
    started = time.perf_counter()
    result = reconstruct(model, data, spec)
    elapsed = time.perf_counter() - started

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    times = data.times()[: data.n_samples]
    header = ["time_s"]
    columns = [times]
    for m in missing:
        header += [f"{m}_xmiss", f"{m}_xhatmiss"]
        columns += [result.x_miss[m], result.x_hat_miss[m]]
    stem = f"{Path(args.data).stem}_{'_'.join(missing)}"
    result_path = out / f"reconstruction_{stem}.csv"
    with open(result_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(times)):
            writer.writerow([repr(float(c[k])) for c in columns])
    # history rows hold the loss before each update; the extra last row is
    # the loss after the final update, so the curve file is self-contained
    fileio.write_loss_curve_csv(
        out / f"loss_{stem}.csv",
        list(result.loss_history) + [result.final_loss],
    )

    ratio = (result.final_loss / result.initial_loss
             if result.initial_loss > 0 else float("nan"))
    print(
        f"reconstructed {', '.join(missing)} in {elapsed:.1f}s over "
        f"{spec.resolved_epochs()} epochs"
    )
    print(
        f"loss {result.initial_loss:.4e} -> {result.final_loss:.4e} "
        f"(ratio {ratio:.3f})"
    )
    print(f"result: {result_path}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    result = fileio.read_dataset_csv(args.result)
    truth = fileio.read_dataset_csv(args.truth)
    if result.n_samples != truth.n_samples:
        raise CliError(
            f"length mismatch: result {result.n_samples} vs truth {truth.n_samples}"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def truth_name(column: str) -> str | None:
        for suffix in ("_xmiss", "_xhatmiss"):
            if column.endswith(suffix):
                column = column[: -len(suffix)]
                break
        return column if column in truth.feature_names else None

    rows = []
    for column in result.feature_names:
        ref_name = truth_name(column)
        if ref_name is None:
            continue
        report = metrics.rmse_report(
            ref_name, truth.column(ref_name), result.column(column)
        )
        rows.append((column, ref_name, report))
        freqs, mags = metrics.amplitude_spectrum(result.column(column), result.dt)
        fileio.write_spectrum_csv(out / f"spectrum_{column}.csv", freqs, mags)
        freqs_t, mags_t = metrics.amplitude_spectrum(truth.column(ref_name), truth.dt)
        fileio.write_spectrum_csv(out / f"spectrum_{column}_ref.csv", freqs_t, mags_t)
    if not rows:
        raise CliError(
            "no result column matches a truth feature "
            f"(result: {result.feature_names}, truth: {truth.feature_names})"
        )

    report_path = out / "report.csv"
    with open(report_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "truth_feature", "mse", "rmse", "rel_rmse"])
        for column, ref_name, rep in rows:
            writer.writerow(
                [column, ref_name, repr(rep.mse), repr(rep.rmse), repr(rep.rel_rmse)]
            )
    for column, ref_name, rep in rows:
        print(
            f"{column} vs {ref_name}: rmse {rep.rmse:.4e} "
            f"(relative {rep.rel_rmse:.3f})"
        )
    print(f"report: {report_path}")
    return EXIT_OK


def end_to_end_gradcheck(seed: int = 0, n_samples: int = 12) -> float:
    """Reduced-loss gradient w.r.t. a missing column vs finite differences.

    Builds a small untrained model and random available columns, then
    differentiates the windowed reconstruction loss by the missing-column
    leaf, exactly as the reconstruction loop does.
    """
    net_cfg = NetConfig(n_features=4, seq_len=3, lstm_hidden=8, latent_dim=2)
    params = init_params(net_cfg, seed)
    rng = Xoshiro256(seed + 1)
    avail = [rng.uniform(0.0, 1.0, n_samples) for _ in range(3)]
    missing0 = rng.uniform(0.0, 1.0, n_samples)
    num_windows = n_samples - net_cfg.seq_len + 1

    def f(tape: Tape, x):
        net = lift_params(tape, params, requires_grad=False)
        columns = [x if j == 1 else tape.leaf(avail[j if j == 0 else j - 1][:, None])
                   for j in range(4)]
        series = tape.concat_cols(columns)
        xs = [tape.slice_rows(series, t, t + num_windows)
              for t in range(net_cfg.seq_len)]
        detail = forward_steps(tape, net, xs)
        target = tape.concat_rows(xs)
        output = tape.concat_rows(detail.outputs)
        avail_idx = (0, 2, 3)
        return reduced_loss(
            tape, tape.slice_cols(target, avail_idx),
            tape.slice_cols(output, avail_idx), None,
        )

    return grad_check(f, missing0[:, None], eps=1e-5)


def cmd_gradcheck(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    worst = run_op_checks(seed=args.seed, samples_per_op=args.samples)
    failures = []
    for op in sorted(worst):
        status = "ok" if worst[op] < GRADCHECK_TOL else "FAIL"
        print(f"{op:15s} max relative error {worst[op]:.3e}  {status}")
        if worst[op] >= GRADCHECK_TOL:
            failures.append(op)
    e2e = end_to_end_gradcheck(seed=args.seed)
    status = "ok" if e2e < GRADCHECK_TOL else "FAIL"
    print(f"{'reduced loss':15s} max relative error {e2e:.3e}  {status}")
    if e2e >= GRADCHECK_TOL:
        failures.append("reduced loss")
    elapsed = time.perf_counter() - started
    print(f"checked {len(worst)} ops + end-to-end in {elapsed:.1f}s")
    if failures:
        print(f"FAILED: {', '.join(failures)}", file=sys.stderr)
        return EXIT_NUMERICAL
    print("all gradients match finite differences")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracefill",
        description="Reconstruct missing channels of a multivariate time "
        "series with a frozen LSTM autoencoder.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate the synthetic circuit suite")
    p.add_argument("--config", help="JSON config (seed, dt, n_samples, circuit)")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--n-samples", type=int, help="override samples per dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the autoencoder on a suite directory")
    p.add_argument("--data", required=True, help="directory with train_*.csv")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=16, help="LSTM hidden size")
    p.add_argument("--latent", type=int, default=2, help="latent size per step")
    p.add_argument("--seq-len", type=int, default=3, help="window length")
    p.add_argument("--history", help="loss history CSV (default: <model>.losses.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="recover missing features")
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--data", required=True, help="dataset CSV (missing cols ignored)")
    p.add_argument("--missing", required=True,
                   help="comma-separated missing feature names")
    p.add_argument("--epochs", type=int,
                   help="default 300 for one missing feature, 3000 for several")
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--init", choices=["zeros", "midpoint"], default="zeros")
    p.add_argument("--weights",
                   help="per-available-feature loss weights, e.g. u2=2.0,i1=1.5")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="compare a result CSV against ground truth")
    p.add_argument("--result", required=True, help="reconstruction or dataset CSV")
    p.add_argument("--truth", required=True, help="ground-truth dataset CSV")
    p.add_argument("--out", required=True, help="output directory for reports")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="verify gradients by finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100,
                   help="random inputs per op")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, fileio.FormatError, ShapeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NonFiniteError, DivergenceError, circuit.SimulationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
