"""File formats: headerless numeric CSV and the versioned artifact container.

Numeric CSV
    Comma-separated, one matrix row per line, no header, every value written
    with 17 significant digits (``%.17g``) so a read-back is bit-exact.
    ``values.csv`` holds ``n`` rows x ``N`` columns, ``params.csv`` ``N x p``,
    ``coords.csv`` ``n x d``.

Artifact container (basis, sensors, models)::

    MFROM-ARTIFACT 1
    kind <kind>
    meta <single-line JSON, sorted keys>
    array <name> <f8|i8> <rows> <cols>
    <rows lines of comma-separated values>
    ...
    end

Arrays appear in the order they were given. Floats use ``%.17g``, integers
``%d``. Writing the same content twice yields identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import deeponet as dn
from .gappy import SensorArray
from .pipeline import GappyLowFidelity, MfModel, PodRbfLowFidelity
from .pod import PodBasis, SnapshotSet
from .rbf import RbfSurrogate

MAGIC = "MFROM-ARTIFACT"
VERSION = 1


class FormatError(ValueError):
    """Malformed input file; the message names the file and line."""


def _fmt_row(row, dtype: str) -> str:
    if dtype == "i8":
        return ",".join("%d" % v for v in row)
    return ",".join("%.17g" % v for v in row)


def write_matrix_csv(path, arr) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    Path(path).write_text("".join(_fmt_row(r, "f8") + "\n" for r in arr))


def _parse_row(text: str, path, lineno: int, dtype=float):
    try:
        return [dtype(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: cannot parse numeric value ({exc})") from None


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: file not found")
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        row = _parse_row(line, path, lineno)
        if rows and len(row) != len(rows[0]):
            raise FormatError(f"{path}:{lineno}: expected {len(rows[0])} columns, found {len(row)}")
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no data")
    arr = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0, 0]) + 1
        raise FormatError(f"{path}:{bad}: non-finite value")
    return arr


def write_snapshots(directory, snapshots: SnapshotSet) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {k: directory / f"{k}.csv" for k in ("coords", "params", "values")}
    write_matrix_csv(paths["coords"], snapshots.coordinates)
    write_matrix_csv(paths["params"], snapshots.parameters)
    write_matrix_csv(paths["values"], snapshots.values)
    return paths


def read_snapshots(coords, params, values, field_name=None) -> SnapshotSet:
    c, p, v = read_matrix_csv(coords), read_matrix_csv(params), read_matrix_csv(values)
    if v.shape[0] != c.shape[0]:
        raise FormatError(
            f"{values}: {v.shape[0]} rows but {coords} has {c.shape[0]} points (values must be n x N)")
    if v.shape[1] != p.shape[0]:
        raise FormatError(
            f"{values}: {v.shape[1]} columns but {params} has {p.shape[0]} parameter rows")
    return SnapshotSet(c, p, v, field_name)


# --------------------------------------------------------------------------
# artifact container

def dumps_artifact(kind: str, meta: dict, arrays: dict) -> str:
    lines = [f"{MAGIC} {VERSION}", f"kind {kind}", "meta " + json.dumps(meta, sort_keys=True)]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        dtype = "i8" if np.issubdtype(arr.dtype, np.integer) else "f8"
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ValueError(f"array {name} must be 1-D or 2-D")
        lines.append(f"array {name} {dtype} {arr.shape[0]} {arr.shape[1]}")
        lines.extend(_fmt_row(r, dtype) for r in arr)
    lines.append("end")
    return "\n".join(lines) + "\n"


def write_artifact(path, kind: str, meta: dict, arrays: dict) -> None:
    Path(path).write_text(dumps_artifact(kind, meta, arrays))


def read_artifact(path, expect_kind: str | None = None):
    """Return ``(kind, meta, arrays)``; 1-D arrays come back as ``(1, k)`` rows."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: file not found")
    lines = path.read_text().splitlines()

    def line(i):
        if i >= len(lines):
            raise FormatError(f"{path}:{i + 1}: unexpected end of file")
        return lines[i]

    head = line(0).split()
    if len(head) != 2 or head[0] != MAGIC:
        raise FormatError(f"{path}:1: not an artifact file (missing {MAGIC} header)")
    if head[1] != str(VERSION):
        raise FormatError(f"{path}:1: unsupported artifact version {head[1]}")
    kind_line = line(1)
    if not kind_line.startswith("kind "):
        raise FormatError(f"{path}:2: expected 'kind <name>'")
    kind = kind_line[5:].strip()
    if expect_kind is not None and kind != expect_kind:
        raise FormatError(f"{path}:2: expected a {expect_kind} artifact, found {kind}")
    meta_line = line(2)
    if not meta_line.startswith("meta "):
        raise FormatError(f"{path}:3: expected 'meta <json>'")
    try:
        meta = json.loads(meta_line[5:])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:3: bad metadata JSON ({exc.msg})") from None
    arrays, i = {}, 3
    while line(i) != "end":
        parts = line(i).split()
        if len(parts) != 5 or parts[0] != "array" or parts[2] not in ("f8", "i8"):
            raise FormatError(f"{path}:{i + 1}: expected 'array <name> <f8|i8> <rows> <cols>'")
        name, dtype = parts[1], parts[2]
        try:
            rows, cols = int(parts[3]), int(parts[4])
        except ValueError:
            raise FormatError(f"{path}:{i + 1}: bad array shape") from None
        conv = int if dtype == "i8" else float
        data = []
        for r in range(rows):
            vals = _parse_row(line(i + 1 + r), path, i + 2 + r, conv)
            if len(vals) != cols:
                raise FormatError(f"{path}:{i + 2 + r}: expected {cols} values, found {len(vals)}")
            data.append(vals)
        arrays[name] = np.array(data, dtype=np.int64 if dtype == "i8" else np.float64).reshape(rows, cols)
        i += rows + 1
    return kind, meta, arrays


# --------------------------------------------------------------------------
# typed artifacts

def _basis_arrays(basis: PodBasis, prefix=""):
    return {prefix + "modes": basis.modes, prefix + "singular_values": basis.singular_values}


def _basis_from(arrays, prefix=""):
    return PodBasis(np.ascontiguousarray(arrays[prefix + "modes"]), arrays[prefix + "singular_values"][0])


def save_basis(path, basis: PodBasis) -> None:
    write_artifact(path, "pod_basis", {"rank": basis.rank}, _basis_arrays(basis))


def load_basis(path) -> PodBasis:
    _, _, arrays = read_artifact(path, "pod_basis")
    return _basis_from(arrays)


def save_sensors(path, sensors: SensorArray) -> None:
    write_artifact(path, "sensors", {"ambient_dim": sensors.ambient_dim},
                   {"indices": sensors.indices.astype(np.int64)})


def load_sensors(path) -> SensorArray:
    _, meta, arrays = read_artifact(path, "sensors")
    return SensorArray(arrays["indices"][0], meta["ambient_dim"])


def _net_meta(model: dn.DeepOnetModel) -> dict:
    s = model.spec
    return {"branch_in": s.branch_in, "trunk_in": s.trunk_in, "branch_hidden": list(s.branch_hidden),
            "trunk_hidden": list(s.trunk_hidden), "latent_dim": s.latent_dim,
            "branch_activation": s.branch_activation, "trunk_activation": s.trunk_activation}


def _net_arrays(model: dn.DeepOnetModel, prefix="net_"):
    return {prefix + "theta": model.theta, prefix + "x_scale": model.x_map.scale,
            prefix + "x_shift": model.x_map.shift, prefix + "q_scale": model.q_map.scale,
            prefix + "q_shift": model.q_map.shift}


def _net_from(meta, arrays, prefix="net_") -> dn.DeepOnetModel:
    spec = dn.NetSpec(**meta)
    return dn.DeepOnetModel(
        spec, arrays[prefix + "theta"][0],
        dn.AffineMap(arrays[prefix + "x_scale"][0], arrays[prefix + "x_shift"][0]),
        dn.AffineMap(arrays[prefix + "q_scale"][0], arrays[prefix + "q_shift"][0]))


def save_deeponet(path, model: dn.DeepOnetModel, coordinates=None, input_kind: str = "parameters") -> None:
    """Stand-alone DeepONet (optionally with the coordinates it predicts on)."""
    meta = {"net": _net_meta(model), "input_kind": input_kind}
    arrays = _net_arrays(model)
    if coordinates is not None:
        arrays["coordinates"] = coordinates
    write_artifact(path, "deeponet", meta, arrays)


def load_deeponet(path):
    """Return ``(model, coordinates or None, input_kind)``."""
    _, meta, arrays = read_artifact(path, "deeponet")
    return _net_from(meta["net"], arrays), arrays.get("coordinates"), meta["input_kind"]


def _lf_payload(low):
    if isinstance(low, PodRbfLowFidelity):
        meta = {"variant": "pod_rbf", "kernel": low.surrogate.kernel}
        arrays = {**_basis_arrays(low.basis, "lf_"), "rbf_centers": low.surrogate.centers,
                  "rbf_weights": low.surrogate.weights, "rbf_shape": np.array([low.surrogate.shape])}
    elif isinstance(low, GappyLowFidelity):
        meta = {"variant": "gappy", "ambient_dim": low.sensors.ambient_dim}
        arrays = {**_basis_arrays(low.basis, "lf_"), "sensor_indices": low.sensors.indices.astype(np.int64)}
    else:
        raise TypeError(f"unsupported low-fidelity model {type(low).__name__}")
    return meta, arrays


def _lf_from(meta, arrays):
    basis = _basis_from(arrays, "lf_")
    if meta["variant"] == "pod_rbf":
        sur = RbfSurrogate(arrays["rbf_centers"], arrays["rbf_weights"], meta["kernel"],
                           float(arrays["rbf_shape"][0, 0]))
        return PodRbfLowFidelity(basis, sur)
    if meta["variant"] == "gappy":
        return GappyLowFidelity(basis, SensorArray(arrays["sensor_indices"][0], meta["ambient_dim"]))
    raise FormatError(f"unknown low-fidelity variant {meta['variant']!r}")


def save_low_fidelity(path, low) -> None:
    meta, arrays = _lf_payload(low)
    write_artifact(path, "low_fidelity", {"low": meta}, arrays)


def load_low_fidelity(path):
    _, meta, arrays = read_artifact(path, "low_fidelity")
    return _lf_from(meta["low"], arrays)


def save_mf_model(path, model: MfModel) -> None:
    lf_meta, lf_arrays = _lf_payload(model.low)
    arrays = {**lf_arrays, **_net_arrays(model.residual_net), "coordinates": model.coordinates}
    write_artifact(path, "mf_model", {"low": lf_meta, "net": _net_meta(model.residual_net)}, arrays)


def load_mf_model(path) -> MfModel:
    _, meta, arrays = read_artifact(path, "mf_model")
    return MfModel(_lf_from(meta["low"], arrays), _net_from(meta["net"], arrays), arrays["coordinates"])


# --------------------------------------------------------------------------
# error reports

def write_report(directory, stem: str, report) -> dict:
    """Per-point CSV (with header), aggregate CSV and a JSON sidecar with run metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    p = report.test_points.shape[1]
    header = [f"mu_{k}" for k in range(p)] + list(report.methods) + ["best_method"]
    lines = [",".join(header)]
    best = report.best_method
    for i in range(report.test_points.shape[0]):
        vals = [*report.test_points[i], *report.rel_errors[i]]
        lines.append(",".join("%.17g" % v for v in vals) + "," + report.methods[best[i]])
    points = directory / f"{stem}_points.csv"
    points.write_text("\n".join(lines) + "\n")

    agg_lines = ["method,mean,median,q1,q3,min,max,wins"]
    for m, a in report.aggregates().items():
        agg_lines.append(",".join([m] + ["%.17g" % a[k] for k in ("mean", "median", "q1", "q3", "min", "max")]
                                  + ["%d" % a["wins"]]))
    agg = directory / f"{stem}_aggregate.csv"
    agg.write_text("\n".join(agg_lines) + "\n")

    meta = directory / f"{stem}_meta.json"
    meta.write_text(json.dumps({"label": report.label, "epochs": report.epochs, "seed": report.seed,
                                "snapshot_checksum": report.snapshot_checksum,
                                "methods": list(report.methods)}, sort_keys=True, indent=1) + "\n")
    return {"points": points, "aggregate": agg, "meta": meta}


def read_report(points_path):
    """Rebuild an :class:`~mfrom.bench.ErrorReport` from ``<stem>_points.csv`` (+ sidecar)."""
    from .bench import ErrorReport

    points_path = Path(points_path)
    meta_path = points_path.with_name(points_path.name.replace("_points.csv", "_meta.json"))
    if not meta_path.exists():
        raise FormatError(f"{meta_path}: metadata sidecar not found")
    meta = json.loads(meta_path.read_text())
    lines = points_path.read_text().splitlines()
    if not lines:
        raise FormatError(f"{points_path}: empty report")
    header = lines[0].split(",")
    methods = tuple(meta["methods"])
    p = len(header) - len(methods) - 1
    if p < 1 or tuple(header[p:p + len(methods)]) != methods:
        raise FormatError(f"{points_path}:1: header does not match methods {methods}")
    pts, errs = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        vals = _parse_row(line.rsplit(",", 1)[0], points_path, lineno)
        if len(vals) != p + len(methods):
            raise FormatError(f"{points_path}:{lineno}: expected {p + len(methods)} numeric columns")
        pts.append(vals[:p])
        errs.append(vals[p:])
    return ErrorReport(methods, np.array(pts), np.array(errs), label=meta["label"], epochs=meta["epochs"],
                       seed=meta["seed"], snapshot_checksum=meta["snapshot_checksum"])
