"""Benchmark protocol: the algebraic test function, samplers, error metrics and comparisons."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import deeponet as dn
from .pipeline import (
    GappyLF,
    MultiFidelityROM,
    PODRBF,
    snapshot_checksum,
)
from .pod import SnapshotSet

ALGEBRAIC_BOUNDS = ((2.0, 15.0), (3.0, 20.0))
FLOW_BOUNDS = ((1.0, 80.0),)


def f_high(x, mu):
    """Algebraic benchmark ``0.5 (mu1 x - 2)^2 sin(12x - 4) + sin(mu2 cos(5x))``.

    Broadcasts ``x`` against the leading axes of ``mu`` (last axis has length 2).
    """
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    return 0.5 * (mu[..., 0] * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0) + np.sin(mu[..., 1] * np.cos(5.0 * x))


def sample_spatial(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError(f"need at least 2 spatial samples, got {n}")
    return np.linspace(0.0, 1.0, int(n))


def sample_params_lhs_corners(count_lhs: int, bounds=ALGEBRAIC_BOUNDS, seed: int = 0) -> np.ndarray:
    """Plain Latin hypercube design plus the ``2**p`` corners of the box.

    ``count_lhs = 0`` returns only the corners.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    lo, hi = bounds[:, 0], bounds[:, 1]
    corners = np.array(list(itertools.product(*bounds)), dtype=np.float64)
    if count_lhs < 0:
        raise ValueError("count_lhs must be >= 0")
    if count_lhs == 0:
        return corners
    unit = qmc.LatinHypercube(d=bounds.shape[0], scramble=True, optimization=None,
                              seed=np.random.default_rng(seed)).random(int(count_lhs))
    return np.vstack([lo + unit * (hi - lo), corners])


def grid_params(bounds=ALGEBRAIC_BOUNDS, per_dim: int = 20) -> np.ndarray:
    """Equispaced tensor grid (endpoints included), first parameter varying slowest."""
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def algebraic_snapshots(n: int = 500, count_lhs: int = 36, seed: int = 0,
                        bounds=ALGEBRAIC_BOUNDS) -> SnapshotSet:
    x = sample_spatial(n)
    mus = sample_params_lhs_corners(count_lhs, bounds, seed)
    return SnapshotSet(x[:, None], mus, f_high(x[:, None], mus[None, :, :]), "f_high")


def algebraic_fields(x, mus) -> np.ndarray:
    """``(n, T)`` high-fidelity values at coordinates ``x`` for parameter rows ``mus``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return f_high(x[:, None], np.asarray(mus, dtype=np.float64)[None, :, :])


def synthetic_flow_field(coords, mus) -> np.ndarray:
    """Smooth 2-D parametric field on the unit square for ``mu`` in [1, 80].

    A parabolic channel profile whose amplitude and streamwise modulation
    grow with ``mu`` plus a Gaussian bump that travels with ``mu``; the moving
    bump gives a slowly decaying singular spectrum.
    """
    coords = np.asarray(coords, dtype=np.float64)
    s = (np.asarray(mus, dtype=np.float64).reshape(-1) - 1.0) / 79.0
    x0, x1 = coords[:, :1], coords[:, 1:2]
    profile = 4.0 * x1 * (1.0 - x1) * (0.2 + s) * (1.0 + 0.3 * np.sin(2.0 * np.pi * x0 + np.pi * s))
    bump = 0.4 * np.exp(-((x0 - 0.15 - 0.7 * s) ** 2 + (x1 - 0.5) ** 2) / 0.01)
    return profile + bump


def synthetic_flow_snapshots(side: int = 40, n_train: int = 20) -> SnapshotSet:
    """``side**2`` points on the unit square, ``n_train`` equispaced ``mu`` in [1, 80]."""
    g = np.linspace(0.0, 1.0, side)
    x0, x1 = np.meshgrid(g, g, indexing="ij")
    coords = np.column_stack([x0.ravel(), x1.ravel()])
    mus = np.linspace(1.0, 80.0, n_train)[:, None]
    return SnapshotSet(coords, mus, synthetic_flow_field(coords, mus), "synthetic_u")


def rel_error(pred, truth) -> float:
    """Discrete L2 relative error ``||pred - truth|| / ||truth||``."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        raise ValueError("relative error undefined for a zero-norm reference")
    return float(np.linalg.norm(pred - truth) / denom)


def rel_errors_columns(pred, truth) -> np.ndarray:
    """Per-column relative errors for ``(n, T)`` blocks."""
    return np.array([rel_error(pred[:, k], truth[:, k]) for k in range(truth.shape[1])])


# --------------------------------------------------------------------------
# comparisons

@dataclass(frozen=True)
class ComparisonConfig:
    """One experimental configuration.

    ``low_fidelity`` is ``"pod_rbf"`` or ``"gappy"``. The compared methods
    are the low-fidelity model alone (named ``"pod"`` or ``"gappy"``), a
    DeepONet trained directly on the fields (``"deeponet"``) and the
    residual-corrected model (``"mfdeeponet"``); ``methods`` selects a
    subset.
    """

    low_fidelity: str = "pod_rbf"
    energy: float | None = 0.99
    rank: int | None = None
    energy_power: int = 2
    kernel: str = "thin_plate"
    shape: float = 1.0
    n_sensors: int = 5
    sensor_rank: int = 10
    underdetermined: str = "truncate"
    architecture: dn.Architecture = dn.ALGEBRAIC_ARCHITECTURE
    epochs: int = 10000
    learning_rate: float = 0.005
    l2_weight: float = 1e-4
    seed: int = 0
    methods: tuple | None = None
    label: str = ""

    @property
    def lf_name(self) -> str:
        return "gappy" if self.low_fidelity == "gappy" else "pod"

    def method_names(self) -> tuple:
        full = (self.lf_name, "deeponet", "mfdeeponet")
        if self.methods is None:
            return full
        unknown = set(self.methods) - set(full)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)} for {self.low_fidelity}; choose from {full}")
        return tuple(m for m in full if m in self.methods)

    def make_low_fidelity(self):
        if self.low_fidelity == "pod_rbf":
            return PODRBF(rank=self.rank, energy=self.energy, energy_power=self.energy_power,
                          kernel=self.kernel, shape=self.shape)
        if self.low_fidelity == "gappy":
            return GappyLF(n_sensors=self.n_sensors, rank=self.sensor_rank,
                           underdetermined=self.underdetermined)
        raise ValueError(f"unknown low_fidelity {self.low_fidelity!r}")

    def make_net(self) -> dn.DeepONetRegressor:
        return dn.DeepONetRegressor.from_architecture(
            self.architecture, epochs=self.epochs, learning_rate=self.learning_rate,
            l2_weight=self.l2_weight, random_state=self.seed)


@dataclass
class ErrorReport:
    methods: tuple
    test_points: np.ndarray
    rel_errors: np.ndarray
    label: str = ""
    epochs: int = 0
    seed: int = 0
    snapshot_checksum: str = ""
    loss_histories: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.rel_errors = np.asarray(self.rel_errors, dtype=np.float64)
        if self.rel_errors.shape != (self.test_points.shape[0], len(self.methods)):
            raise ValueError("rel_errors must have one row per test point and one column per method")
        if not np.all(np.isfinite(self.rel_errors)) or np.any(self.rel_errors < 0):
            raise ValueError("relative errors must be finite and nonnegative")

    @property
    def best_method(self) -> np.ndarray:
        return np.argmin(self.rel_errors, axis=1)

    def mean(self) -> dict:
        return dict(zip(self.methods, self.rel_errors.mean(axis=0)))

    def aggregates(self) -> dict:
        """``{method: {"mean", "median", "q1", "q3", "min", "max", "wins"}}``."""
        wins = np.bincount(self.best_method, minlength=len(self.methods))
        out = {}
        for k, name in enumerate(self.methods):
            e = self.rel_errors[:, k]
            q1, med, q3 = np.percentile(e, [25, 50, 75])
            out[name] = {"mean": float(e.mean()), "median": float(med), "q1": float(q1),
                         "q3": float(q3), "min": float(e.min()), "max": float(e.max()),
                         "wins": int(wins[k])}
        return out


def run_comparison(snapshots: SnapshotSet, test_params, test_values, config: ComparisonConfig) -> ErrorReport:
    """Fit every method on ``snapshots`` and score it on held-out fields.

    ``test_values`` is ``(n, T)``, one column per row of ``test_params``. In
    the gappy setting the only test-time data consumed are the true fields
    sampled at the placed sensors.
    """
    test_params = np.asarray(test_params, dtype=np.float64)
    if test_params.ndim == 1:
        test_params = test_params[:, None]
    test_values = np.asarray(test_values, dtype=np.float64)
    methods = config.method_names()
    fields = snapshots.values.T
    coords = snapshots.coordinates

    lf = config.make_low_fidelity().fit(snapshots.parameters, fields, coords=coords)
    train_q = lf.lf_inputs(snapshots.parameters, fields)
    test_q = lf.lf_inputs(test_params, test_values.T)

    preds, histories = {}, {}
    preds[config.lf_name] = lf.predict(test_q).T
    if "deeponet" in methods:
        net = config.make_net().fit(train_q, fields, coords=coords)
        preds["deeponet"] = net.predict(test_q).T
        histories["deeponet"] = net.loss_history_
    if "mfdeeponet" in methods:
        mf = MultiFidelityROM(config.make_low_fidelity(), config.make_net()).fit(
            snapshots.parameters, fields, coords)
        preds["mfdeeponet"] = mf.predict(test_q).T
        histories["mfdeeponet"] = mf.loss_history_

    errors = np.column_stack([rel_errors_columns(preds[m], test_values) for m in methods])
    return ErrorReport(methods, test_params, errors, label=config.label, epochs=config.epochs,
                       seed=config.seed, snapshot_checksum=snapshot_checksum(snapshots),
                       loss_histories=histories)


def testcase1_data(seed: int = 0, n: int = 500, count_lhs: int = 36, per_dim: int = 20):
    """Training snapshots and the 20 x 20 test grid for the algebraic benchmark."""
    snaps = algebraic_snapshots(n, count_lhs, seed)
    tp = grid_params(ALGEBRAIC_BOUNDS, per_dim)
    return snaps, tp, algebraic_fields(snaps.coordinates, tp)


# --------------------------------------------------------------------------
# summary table

@dataclass
class SummaryTable:
    """Mean relative errors, one row per configuration label.

    Columns are ``(method, epochs)``; the low-fidelity column has
    ``epochs = None`` because it does not train.
    """

    rows: list
    columns: list
    values: np.ndarray

    @property
    def best(self) -> np.ndarray:
        """Column index of the minimum per row (NaN cells ignored)."""
        return np.nanargmin(self.values, axis=1)

    @staticmethod
    def _col_name(col) -> str:
        method, epochs = col
        return method if epochs is None else f"{method}@{epochs}"

    def to_csv(self) -> str:
        header = ["configuration"] + [self._col_name(c) for c in self.columns] + ["best"]
        lines = [",".join(header)]
        for i, row in enumerate(self.rows):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in self.values[i]]
            lines.append(",".join([row, *cells, self._col_name(self.columns[self.best[i]])]))
        return "\n".join(lines) + "\n"

    def to_text(self, digits: int = 3) -> str:
        header = ["configuration"] + [self._col_name(c) for c in self.columns]
        body = []
        for i, row in enumerate(self.rows):
            cells = []
            for j, v in enumerate(self.values[i]):
                cell = "-" if np.isnan(v) else f"{v:.{digits}f}"
                if j == self.best[i]:
                    cell = f"*{cell}*"
                cells.append(cell)
            body.append([row, *cells])
        widths = [max(len(r[k]) for r in [header, *body]) for k in range(len(header))]
        fmt = lambda r: "  ".join(c.ljust(w) if k == 0 else c.rjust(w) for k, (c, w) in enumerate(zip(r, widths)))
        rule = "-" * len(fmt(header))
        return "\n".join([fmt(header), rule, *map(fmt, body)]) + "\n"


def summarize_table(reports) -> SummaryTable:
    """Merge reports by label; means come straight from each report's per-point errors.

    Reports sharing a label and epoch budget (e.g. several seeds) are pooled.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    rows, columns, cells = [], [], {}
    lf_names = {"pod", "gappy"}
    for rep in reports:
        if rep.label not in rows:
            rows.append(rep.label)
        for k, m in enumerate(rep.methods):
            col = (m, None if m in lf_names else rep.epochs)
            if col not in columns:
                columns.append(col)
            cells.setdefault((rep.label, col), []).append(rep.rel_errors[:, k])
    columns.sort(key=lambda c: (c[0] not in lf_names, c[0] != "deeponet", c[1] or 0))
    values = np.full((len(rows), len(columns)), np.nan)
    for (label, col), errs in cells.items():
        values[rows.index(label), columns.index(col)] = float(np.concatenate(errs).mean())
    return SummaryTable(rows, columns, values)
