"""Gappy POD: sensor placement, point measurements and least-squares recovery."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import linalg
from ._validation import check_matrix, check_vector
from .pod import POD, PodBasis


class UnderdeterminedPlacementWarning(UserWarning):
    """Fewer sensors than modes: reconstruction falls back to minimum norm."""


@dataclass(frozen=True)
class SensorArray:
    """Ordered sensor indices into a state of length ``ambient_dim``.

    ``notes`` carries placement diagnostics (e.g. an underdetermined
    configuration); it does not take part in equality.
    """

    indices: np.ndarray
    ambient_dim: int
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or idx.size < 1:
            raise ValueError("sensor indices must be a non-empty 1-D sequence")
        if not np.issubdtype(idx.dtype, np.integer):
            if not np.all(np.equal(np.mod(idx, 1), 0)):
                raise ValueError("sensor indices must be integers")
        idx = idx.astype(np.intp)
        if idx.min() < 0 or idx.max() >= self.ambient_dim:
            raise ValueError(f"sensor indices must lie in [0, {self.ambient_dim})")
        if np.unique(idx).size != idx.size:
            raise ValueError("sensor indices must be distinct")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "ambient_dim", int(self.ambient_dim))

    @property
    def n_sensors(self) -> int:
        return self.indices.size

    def __eq__(self, other):
        if not isinstance(other, SensorArray):
            return NotImplemented
        return self.ambient_dim == other.ambient_dim and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.ambient_dim, self.indices.tobytes()))


def measure(sensors: SensorArray, state) -> np.ndarray:
    """Sensor readings ``state[indices]``; accepts a state vector or an ``(n, k)`` block."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape[0] != sensors.ambient_dim:
        raise ValueError(
            f"dimension mismatch: state has length {state.shape[0]}, sensors expect {sensors.ambient_dim}"
        )
    return state[sensors.indices]


def place_sensors(basis: PodBasis, c: int) -> SensorArray:
    """QR-pivot sensor placement for reconstruction.

    The first ``min(c, r)`` sensors are the leading column pivots of
    ``modes.T``. Any further sensors (``c > r``) are added greedily, each one
    maximizing the leverage ``psi_k^T M^{-1} psi_k`` of its mode row against
    the Gram matrix ``M`` of the rows already chosen; this is the choice that
    maximizes ``det(M)`` one sensor at a time.
    """
    n, r = basis.modes.shape
    c = int(c)
    if c < 1:
        raise ValueError(f"need at least one sensor, got {c}")
    if c > n:
        raise ValueError(f"cannot place {c} sensors on {n} points")
    _, _, piv = linalg.pivoted_qr(basis.modes.T)
    k = min(c, r)
    chosen = [int(i) for i in piv[:k]]
    notes = ()
    if c < r:
        msg = f"{c} sensors for {r} modes: reconstruction is underdetermined (minimum-norm)"
        warnings.warn(msg, UnderdeterminedPlacementWarning, stacklevel=2)
        notes = (msg,)
    if c > r:
        rows = basis.modes
        available = np.ones(n, dtype=bool)
        available[chosen] = False
        gram = rows[chosen].T @ rows[chosen]
        while len(chosen) < c:
            minv = linalg.pinv(gram)
            lev = np.einsum("ij,jk,ik->i", rows, minv, rows)
            lev[~available] = -np.inf
            nxt = int(np.argmax(lev))
            chosen.append(nxt)
            available[nxt] = False
            gram = gram + np.outer(rows[nxt], rows[nxt])
    return SensorArray(np.array(chosen, dtype=np.intp), n, notes)


def gappy_coefficients(basis: PodBasis, sensors: SensorArray, measurements) -> np.ndarray:
    """Least-squares modal coefficients for one or more measurement vectors.

    ``measurements`` is ``(c,)`` or ``(c, k)``; minimum norm when ``c < r``.
    """
    _check_sensors(basis, sensors)
    m = np.asarray(measurements, dtype=np.float64)
    if m.shape[0] != sensors.n_sensors:
        raise ValueError(
            f"dimension mismatch: {m.shape[0]} measurements for {sensors.n_sensors} sensors"
        )
    return linalg.lstsq(basis.modes[sensors.indices], m)


def gappy_reconstruct(basis: PodBasis, sensors: SensorArray, measurements):
    """Return ``(coeffs, full_state)`` recovered from sensor readings."""
    measurements = check_vector(measurements, sensors.n_sensors, "measurements")
    coeffs = gappy_coefficients(basis, sensors, measurements)
    return coeffs, basis.modes @ coeffs


def placement_condition(basis: PodBasis, sensors: SensorArray) -> float:
    """Condition number of the sensor-restricted modes (``inf`` if rank deficient)."""
    _check_sensors(basis, sensors)
    return linalg.condition_number(basis.modes[sensors.indices])


def reconstruction_error(basis: PodBasis, sensors: SensorArray, states) -> float:
    """Frobenius error of reconstructing ``states`` (n, k) from their own sensor readings."""
    states = np.asarray(states, dtype=np.float64)
    coeffs = gappy_coefficients(basis, sensors, measure(sensors, states))
    return float(np.linalg.norm(states - basis.modes @ coeffs))


def _check_sensors(basis: PodBasis, sensors: SensorArray):
    if sensors.ambient_dim != basis.n_points:
        raise ValueError(
            f"dimension mismatch: sensors address {sensors.ambient_dim} points, basis has {basis.n_points}"
        )


class GappyPOD(TransformerMixin, RegressorMixin, BaseEstimator):
    """Gappy POD estimator.

    ``fit(X)`` builds the POD basis from snapshots ``X`` of shape ``(N, n)``
    and places ``n_sensors`` sensors. ``transform(X)`` reads the sensors off
    full states and ``predict(readings)`` recovers full states.

    Parameters
    ----------
    n_sensors : int, default=5
    rank : int, default=10
        Requested POD rank.
    underdetermined : {"truncate", "min_norm"}, default="truncate"
        What to do when ``n_sensors < rank``. ``"truncate"`` keeps only the
        leading ``n_sensors`` modes, both for placement and for
        reconstruction, so the sensor system is square. ``"min_norm"``
        places sensors on the full basis and returns the minimum-norm
        least-squares coefficients.
    sensors : SensorArray, optional
        Fixed sensors; skips placement.
    """

    def __init__(self, n_sensors=5, rank=10, underdetermined="truncate", sensors=None):
        self.n_sensors = n_sensors
        self.rank = rank
        self.underdetermined = underdetermined
        self.sensors = sensors

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        if self.underdetermined not in ("truncate", "min_norm"):
            raise ValueError(f"underdetermined must be 'truncate' or 'min_norm', got {self.underdetermined!r}")
        n_sensors = self.sensors.n_sensors if self.sensors is not None else int(self.n_sensors)
        rank = int(self.rank)
        if self.underdetermined == "truncate":
            rank = min(rank, n_sensors)
        self.basis_ = POD(rank=rank).fit(X).basis_
        if self.sensors is not None:
            self.sensors_ = self.sensors
            _check_sensors(self.basis_, self.sensors_)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UnderdeterminedPlacementWarning)
                self.sensors_ = place_sensors(self.basis_, n_sensors)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "sensors_")
        X = check_matrix(X, "X", n_cols=self.n_features_in_)
        return X[:, self.sensors_.indices]

    def predict(self, X):
        check_is_fitted(self, "sensors_")
        X = check_matrix(X, "readings", n_cols=self.sensors_.n_sensors)
        coeffs = gappy_coefficients(self.basis_, self.sensors_, X.T)
        return (self.basis_.modes @ coeffs).T
