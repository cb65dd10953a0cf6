"""Command-line interface: ``mfrom <command> [--config PATH] [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bench, io
from . import deeponet as dn
from .config import ConfigError, RunConfig, load_config
from .gappy import UnderdeterminedPlacementWarning
from .pipeline import GappyLF, MultiFidelityROM, PODRBF, lf_predict
from .pod import POD, SnapshotSet


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# config -> objects

def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out) if args.out else Path(cfg.get("output", "dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _generate(cfg: RunConfig):
    d = cfg["data"]
    if d["benchmark"] == "algebraic":
        snaps = bench.algebraic_snapshots(d["n_spatial"], d["n_lhs"], d["seed"])
        tp = bench.grid_params(bench.ALGEBRAIC_BOUNDS, d["test_grid"])
        return snaps, tp, bench.algebraic_fields(snaps.coordinates, tp)
    if d["benchmark"] == "synthetic_flow":
        snaps = bench.synthetic_flow_snapshots(d["flow_side"], d["n_train"])
        rng = np.random.default_rng(d["seed"])
        lo, hi = bench.FLOW_BOUNDS[0]
        tp = np.sort(rng.uniform(lo, hi, d["n_test"]))[:, None]
        return snaps, tp, bench.synthetic_flow_field(snaps.coordinates, tp)
    raise CliError("[data] benchmark = none requires coords, params and values files")


def _training_snapshots(cfg: RunConfig, out: Path) -> SnapshotSet:
    d = cfg["data"]
    given = [d[k] for k in ("coords", "params", "values")]
    if any(given):
        if not all(given):
            raise CliError("[data] needs all of coords, params and values")
        return io.read_snapshots(*given)
    local = [out / f"{k}.csv" for k in ("coords", "params", "values")]
    if all(p.exists() for p in local):
        return io.read_snapshots(*local)
    return _generate(cfg)[0]


def _test_set(cfg: RunConfig, out: Path):
    d = cfg["data"]
    if d["test_params"] or d["test_values"]:
        if not (d["test_params"] and d["test_values"]):
            raise CliError("[data] needs both test_params and test_values")
        return io.read_matrix_csv(d["test_params"]), io.read_matrix_csv(d["test_values"])
    local = out / "test_params.csv", out / "test_values.csv"
    if all(p.exists() for p in local):
        return io.read_matrix_csv(local[0]), io.read_matrix_csv(local[1])
    _, tp, tv = _generate(cfg)
    return tp, tv


def _architecture(cfg: RunConfig) -> dn.Architecture:
    n = cfg["net"]
    return dn.Architecture(n["branch_hidden"], n["trunk_hidden"], n["latent_dim"],
                           n["branch_activation"], n["trunk_activation"])


def _comparison(cfg: RunConfig, methods=None) -> bench.ComparisonConfig:
    p, r, s, t, m = cfg["pod"], cfg["rbf"], cfg["sensors"], cfg["train"], cfg["model"]
    label = cfg.get("evaluate", "label") or f"{m['low_fidelity']}"
    return bench.ComparisonConfig(
        low_fidelity=m["low_fidelity"], energy=p["energy"], rank=p["rank"],
        energy_power=p["energy_power"], kernel=r["kernel"], shape=r["shape"],
        n_sensors=s["count"], sensor_rank=s["rank"], underdetermined=s["underdetermined"],
        architecture=_architecture(cfg), epochs=t["epochs"], learning_rate=t["learning_rate"],
        l2_weight=t["l2_weight"], seed=t["seed"], methods=methods, label=label)


def _check_consistent(snaps: SnapshotSet, test_params, test_values):
    if test_values.shape[0] != snaps.n_points:
        raise CliError(f"dimension mismatch: test values have {test_values.shape[0]} rows, "
                       f"snapshots have {snaps.n_points} points")
    if test_values.shape[1] != test_params.shape[0]:
        raise CliError(f"dimension mismatch: {test_values.shape[1]} test fields but "
                       f"{test_params.shape[0]} test parameter rows")
    if test_params.shape[1] != snaps.parameters.shape[1]:
        raise CliError(f"dimension mismatch: test parameters have {test_params.shape[1]} columns, "
                       f"training parameters have {snaps.parameters.shape[1]}")


# --------------------------------------------------------------------------
# commands

def cmd_gen_data(cfg, args):
    out = _out_dir(cfg, args)
    snaps, tp, tv = _generate(cfg)
    io.write_snapshots(out, snaps)
    io.write_matrix_csv(out / "test_params.csv", tp)
    io.write_matrix_csv(out / "test_values.csv", tv)
    print(f"gen-data: values {snaps.n_points}x{snaps.n_snapshots}, {tp.shape[0]} test points -> {out}")


def cmd_pod(cfg, args):
    out = _out_dir(cfg, args)
    snaps = _training_snapshots(cfg, out)
    p = cfg["pod"]
    pod = POD(rank=p["rank"], energy=p["energy"], energy_power=p["energy_power"]).fit(snaps.values.T)
    io.save_basis(out / "basis.txt", pod.basis_)
    print(f"pod: rank {pod.basis_.rank} of {pod.basis_.singular_values.size} -> {out / 'basis.txt'}")


def cmd_sensors(cfg, args):
    out = _out_dir(cfg, args)
    snaps = _training_snapshots(cfg, out)
    s = cfg["sensors"]
    lf = GappyLF(n_sensors=s["count"], rank=s["rank"], underdetermined=s["underdetermined"]).fit(
        snaps.parameters, snaps.values.T)
    io.save_sensors(out / "sensors.txt", lf.sensors_)
    io.save_low_fidelity(out / "gappy.txt", lf.low_)
    idx = " ".join(str(i) for i in lf.sensors_.indices)
    print(f"sensors: {lf.sensors_.n_sensors} sensors on rank {lf.basis_.rank} basis [{idx}]")


def _make_lf(cfg):
    m, p, r, s = cfg["model"], cfg["pod"], cfg["rbf"], cfg["sensors"]
    if m["low_fidelity"] == "gappy":
        return GappyLF(n_sensors=s["count"], rank=s["rank"], underdetermined=s["underdetermined"])
    return PODRBF(rank=p["rank"], energy=p["energy"], energy_power=p["energy_power"],
                  kernel=r["kernel"], shape=r["shape"], smoothing=r["smoothing"])


def _make_net(cfg):
    t = cfg["train"]
    return dn.DeepONetRegressor.from_architecture(
        _architecture(cfg), epochs=t["epochs"], learning_rate=t["learning_rate"],
        l2_weight=t["l2_weight"], random_state=t["seed"], normalize=cfg.get("net", "normalize"))


def cmd_train(cfg, args):
    out = _out_dir(cfg, args)
    snaps = _training_snapshots(cfg, out)
    method = cfg.get("model", "method")
    fields = snaps.values.T
    path = out / "model.txt"
    if method == "lf":
        lf = _make_lf(cfg).fit(snaps.parameters, fields, coords=snaps.coordinates)
        io.save_low_fidelity(path, lf.low_)
        print(f"train: low-fidelity {cfg.get('model', 'low_fidelity')} -> {path}")
        return
    if method == "deeponet":
        lf = _make_lf(cfg).fit(snaps.parameters, fields, coords=snaps.coordinates)
        q = lf.lf_inputs(snaps.parameters, fields)
        net = _make_net(cfg).fit(q, fields, coords=snaps.coordinates)
        io.save_deeponet(path, net.model_, snaps.coordinates, lf.input_kind)
        history = net.loss_history_
    else:
        mf = MultiFidelityROM(_make_lf(cfg), _make_net(cfg)).fit(snaps.parameters, fields, snaps.coordinates)
        io.save_mf_model(path, mf.model_)
        history = mf.loss_history_
    io.write_matrix_csv(out / "loss_history.csv", history)
    print(f"train: {method}, {history.size} epochs, loss {history[0]:.6g} -> {history[-1]:.6g} -> {path}")


def _predict_fields(path: Path, inputs: np.ndarray, lf_only: bool) -> np.ndarray:
    kind, _, _ = io.read_artifact(path)
    if kind == "mf_model":
        model = io.load_mf_model(path)
        if lf_only:
            return np.column_stack([lf_predict(model.low, q) for q in inputs])
        return model.predict_many(inputs)
    if kind == "low_fidelity":
        low = io.load_low_fidelity(path)
        return low.predict_many(inputs)
    if kind == "deeponet":
        net, coords, _ = io.load_deeponet(path)
        if coords is None:
            raise CliError(f"{path}: DeepONet artifact has no coordinates")
        return dn.forward_grid(net, coords, inputs)
    raise CliError(f"{path}: cannot predict with a {kind} artifact")


def cmd_predict(cfg, args):
    out = _out_dir(cfg, args)
    model_path = Path(args.model) if args.model else out / "model.txt"
    if not args.inputs:
        raise CliError("predict needs --inputs <csv> (one parameter or sensor vector per row)")
    inputs = io.read_matrix_csv(args.inputs)
    try:
        preds = _predict_fields(model_path, inputs, args.lf_only)
    except ValueError as exc:
        if isinstance(exc, io.FormatError):
            raise
        raise CliError(f"{args.inputs}: {exc}") from None
    dest = Path(args.output) if args.output else out / "predictions.csv"
    io.write_matrix_csv(dest, preds)
    print(f"predict: {preds.shape[1]} fields of length {preds.shape[0]} -> {dest}")


def cmd_evaluate(cfg, args):
    out = _out_dir(cfg, args)
    snaps = _training_snapshots(cfg, out)
    tp, tv = _test_set(cfg, out)
    _check_consistent(snaps, tp, tv)
    comp = _comparison(cfg, cfg.get("evaluate", "methods"))
    report = bench.run_comparison(snaps, tp, tv, comp)
    stem = f"{comp.label}_e{comp.epochs}_s{comp.seed}".replace(" ", "_")
    io.write_report(out, stem, report)
    means = ", ".join(f"{m} {v:.4f}" for m, v in report.mean().items())
    print(f"evaluate: {report.test_points.shape[0]} test points, mean rel. error: {means}")


def cmd_report(cfg, args):
    out = _out_dir(cfg, args)
    paths = [Path(p) for p in args.reports] if args.reports else sorted(out.glob("*_points.csv"))
    if not paths:
        raise CliError(f"no *_points.csv reports found in {out}")
    table = bench.summarize_table(io.read_report(p) for p in paths)
    (out / "summary.csv").write_text(table.to_csv())
    (out / "summary.txt").write_text(table.to_text())
    sys.stdout.write(table.to_text())
    print(f"report: {len(paths)} reports, {len(table.rows)} rows -> {out / 'summary.csv'}")


COMMANDS = {
    "gen-data": cmd_gen_data, "pod": cmd_pod, "sensors": cmd_sensors, "train": cmd_train,
    "predict": cmd_predict, "evaluate": cmd_evaluate, "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfrom", description="Multi-fidelity POD + DeepONet toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--seed", type=int, help="overrides [data] seed and [train] seed")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        if name == "predict":
            p.add_argument("--inputs", help="CSV of input vectors, one per row")
            p.add_argument("--model", help="model artifact (default <out>/model.txt)")
            p.add_argument("--output", help="prediction CSV (default <out>/predictions.csv)")
            p.add_argument("--lf-only", action="store_true", help="low-fidelity prediction only")
        if name == "report":
            p.add_argument("reports", nargs="*", help="*_points.csv files (default: all in --out)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["data"]["seed"] = args.seed
            cfg["train"]["seed"] = args.seed
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnderdeterminedPlacementWarning)
            COMMANDS[args.command](cfg, args)
    except (ConfigError, CliError, io.FormatError) as exc:
        print(f"mfrom {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, dn.TrainingDivergedError) as exc:
        print(f"mfrom {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
