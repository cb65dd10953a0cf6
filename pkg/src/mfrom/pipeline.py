"""Multi-fidelity residual correction of POD-based reduced models.

A low-fidelity model (POD-RBF or gappy POD) is built from the snapshots; its
pointwise error against those same snapshots is learned by a DeepONet whose
branch sees spatial coordinates and whose trunk sees the low-fidelity input
(a parameter vector, or sensor readings in the gappy case). A corrected
prediction is the low-fidelity field plus the network's residual field.

Training minimizes the mean over all ``n * N`` (point, snapshot) pairs,
i.e. ``(1/(nN)) sum_j ||r_net(mu_j) + u_lf(mu_j) - u(mu_j)||^2``; this is the
per-snapshot squared error averaged over snapshots, divided by ``n``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted

from . import deeponet as dn
from ._validation import check_matrix
from .gappy import GappyPOD, SensorArray, gappy_coefficients, measure
from .pod import POD, PodBasis, SnapshotSet
from .rbf import RbfSurrogate, eval_rbf_many, fit_rbf


# --------------------------------------------------------------------------
# low-fidelity models

@dataclass(frozen=True)
class PodRbfLowFidelity:
    """POD modes with RBF-interpolated modal coefficients; input is a parameter vector."""

    basis: PodBasis
    surrogate: RbfSurrogate
    input_kind = "parameters"

    @property
    def input_dim(self) -> int:
        return self.surrogate.centers.shape[1]

    def inputs_for(self, snapshots: SnapshotSet) -> np.ndarray:
        return snapshots.parameters

    def predict_many(self, Q) -> np.ndarray:
        """``(n, k)`` fields for ``k`` parameter rows ``Q``."""
        return self.basis.modes @ eval_rbf_many(self.surrogate, Q).T


@dataclass(frozen=True)
class GappyLowFidelity:
    """POD modes recovered from point sensors; input is the sensor reading vector."""

    basis: PodBasis
    sensors: SensorArray
    input_kind = "sensors"

    @property
    def input_dim(self) -> int:
        return self.sensors.n_sensors

    def inputs_for(self, snapshots: SnapshotSet) -> np.ndarray:
        return measure(self.sensors, snapshots.values).T

    def predict_many(self, Q) -> np.ndarray:
        Q = check_matrix(Q, "readings", n_cols=self.sensors.n_sensors, allow_1d=self.sensors.n_sensors == 1)
        return self.basis.modes @ gappy_coefficients(self.basis, self.sensors, Q.T)


LowFidelityModel = PodRbfLowFidelity | GappyLowFidelity


def build_pod_rbf(snapshots: SnapshotSet, pod_params: dict | None = None, kernel="thin_plate",
                  shape=1.0, smoothing=0.0) -> PodRbfLowFidelity:
    pod = POD(**(pod_params or {})).fit(snapshots.values.T)
    coeffs = pod.transform(snapshots.values.T)
    return PodRbfLowFidelity(pod.basis_, fit_rbf(snapshots.parameters, coeffs, kernel, shape, smoothing))


def build_gappy(snapshots: SnapshotSet, n_sensors=5, rank=10, underdetermined="truncate",
                sensors=None) -> GappyLowFidelity:
    est = GappyPOD(n_sensors=n_sensors, rank=rank, underdetermined=underdetermined,
                   sensors=sensors).fit(snapshots.values.T)
    return GappyLowFidelity(est.basis_, est.sensors_)


def _as_input_matrix(low, q):
    q = np.asarray(q, dtype=np.float64)
    if q.ndim == 1:
        q = q[None, :]
    return check_matrix(q, low.input_kind, n_cols=low.input_dim)


def lf_predict(low: LowFidelityModel, q) -> np.ndarray:
    """Low-fidelity field for one input vector (parameters or sensor readings)."""
    return low.predict_many(_as_input_matrix(low, q))[:, 0]


# --------------------------------------------------------------------------
# residual data and training

@dataclass(frozen=True)
class ResidualDataset(dn.GridDataset):
    """Residuals ``u - u_lf`` on every (coordinate, snapshot input) pair.

    ``targets[i, j]`` is the residual at point ``i`` for snapshot ``j``;
    :meth:`rows` enumerates the ``n * N`` rows ``(x_i, q_j, r_ij)``.
    """

    @property
    def residuals(self) -> np.ndarray:
        return self.targets


def build_residual_dataset(snapshots: SnapshotSet, low: LowFidelityModel) -> ResidualDataset:
    """Residuals of ``low`` on the snapshots it was built from; no new data is needed."""
    Q = low.inputs_for(snapshots)
    lf = low.predict_many(Q)
    if lf.shape != snapshots.values.shape:
        raise ValueError(
            f"dimension mismatch: low-fidelity fields {lf.shape} vs snapshots {snapshots.values.shape}"
        )
    return ResidualDataset(snapshots.coordinates, Q, snapshots.values - lf)


@dataclass(frozen=True)
class MfModel:
    low: LowFidelityModel
    residual_net: dn.DeepOnetModel
    coordinates: np.ndarray

    def __post_init__(self):
        if self.residual_net.spec.branch_in != self.coordinates.shape[1]:
            raise ValueError("residual net branch input width must equal the coordinate dimension")
        if self.residual_net.spec.trunk_in != self.low.input_dim:
            raise ValueError("residual net trunk input width must equal the low-fidelity input size")

    def residual_many(self, Q) -> np.ndarray:
        return dn.forward_grid(self.residual_net, self.coordinates, Q)

    def predict_many(self, Q) -> np.ndarray:
        Q = _as_input_matrix(self.low, Q)
        return self.low.predict_many(Q) + self.residual_many(Q)


def train_mf(snapshots: SnapshotSet, low: LowFidelityModel,
             architecture: dn.Architecture = dn.ALGEBRAIC_ARCHITECTURE,
             config: dn.TrainConfig = dn.TrainConfig(), normalize: bool = True):
    """Train the residual DeepONet; returns ``(MfModel, loss_history)``."""
    data = build_residual_dataset(snapshots, low)
    net, history = dn.fit_grid(data.coordinates, data.inputs, data.targets, architecture, config,
                               normalize)
    return MfModel(low, net, snapshots.coordinates), history


def mf_predict(model: MfModel, q) -> np.ndarray:
    """Corrected field: low-fidelity prediction plus the residual net at every coordinate."""
    Q = _as_input_matrix(model.low, q)
    return model.predict_many(Q)[:, 0]


def snapshot_checksum(snapshots: SnapshotSet) -> str:
    h = hashlib.sha256()
    for arr in (snapshots.coordinates, snapshots.parameters, snapshots.values):
        h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr(arr.shape).encode())
    return h.hexdigest()


# --------------------------------------------------------------------------
# estimators

class PODRBF(RegressorMixin, BaseEstimator):
    """POD-RBF reduced model: ``fit(params, fields)``, ``predict(params)``.

    Fields are rows, shape ``(N, n)``.
    """

    input_kind = "parameters"

    def __init__(self, rank=None, energy=0.99, energy_power=2, kernel="thin_plate", shape=1.0,
                 smoothing=0.0):
        self.rank = rank
        self.energy = energy
        self.energy_power = energy_power
        self.kernel = kernel
        self.shape = shape
        self.smoothing = smoothing

    def fit(self, X, y, coords=None):
        X = check_matrix(X, "params", allow_1d=True)
        y = check_matrix(y, "fields")
        coords = np.arange(y.shape[1], dtype=np.float64)[:, None] if coords is None else coords
        snaps = SnapshotSet(coords, X, y.T)
        self.low_ = build_pod_rbf(snaps, dict(rank=self.rank, energy=self.energy,
                                             energy_power=self.energy_power),
                                  self.kernel, self.shape, self.smoothing)
        self.n_features_in_ = X.shape[1]
        return self

    def lf_inputs(self, X, y):
        return check_matrix(X, "params", allow_1d=True)

    def predict(self, X):
        check_is_fitted(self, "low_")
        return self.low_.predict_many(_as_input_matrix(self.low_, X)).T


class GappyLF(GappyPOD):
    """:class:`GappyPOD` with the low-fidelity interface used by :class:`MultiFidelityROM`.

    ``fit(params, fields)`` ignores the parameters; inputs are sensor readings.
    """

    input_kind = "sensors"

    def fit(self, X, y=None, coords=None):
        fields = X if y is None else y
        super().fit(fields)
        self.low_ = GappyLowFidelity(self.basis_, self.sensors_)
        return self

    def lf_inputs(self, X, y):
        return self.transform(check_matrix(y, "fields"))


class MultiFidelityROM(RegressorMixin, BaseEstimator):
    """Low-fidelity reduced model corrected by a residual DeepONet.

    Parameters
    ----------
    low_fidelity : PODRBF or GappyLF
        Unfitted low-fidelity estimator (cloned on fit).
    residual_net : DeepONetRegressor
        Unfitted network estimator (cloned on fit).

    ``fit(params, fields, coords)`` fits both stages from the same snapshots.
    ``predict(Q)`` expects the low-fidelity input: parameters for POD-RBF,
    sensor readings for gappy POD (see :meth:`lf_inputs`).
    """

    def __init__(self, low_fidelity=None, residual_net=None):
        self.low_fidelity = low_fidelity
        self.residual_net = residual_net

    def fit(self, X, y, coords):
        lf = clone(self.low_fidelity if self.low_fidelity is not None else PODRBF())
        net = clone(self.residual_net if self.residual_net is not None else dn.DeepONetRegressor())
        X = check_matrix(X, "params", allow_1d=True)
        y = check_matrix(y, "fields")
        coords = check_matrix(coords, "coords", allow_1d=True)
        lf.fit(X, y, coords=coords)
        snaps = SnapshotSet(coords, X, y.T)
        data = build_residual_dataset(snaps, lf.low_)
        net.fit(data.inputs, data.targets.T, coords=coords)
        self.low_fidelity_ = lf
        self.residual_net_ = net
        self.model_ = MfModel(lf.low_, net.model_, coords)
        self.loss_history_ = net.loss_history_
        return self

    def lf_inputs(self, X, y):
        check_is_fitted(self, "model_")
        return self.low_fidelity_.lf_inputs(X, y)

    def predict_low_fidelity(self, Q):
        check_is_fitted(self, "model_")
        return self.model_.low.predict_many(_as_input_matrix(self.model_.low, Q)).T

    def predict(self, Q):
        check_is_fitted(self, "model_")
        return self.model_.predict_many(Q).T
