"""Proper orthogonal decomposition of a snapshot matrix.

Snapshots are stored column-wise: ``values[:, j]`` is the full state for
parameter sample ``j``. No centering or scaling is applied before the SVD.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import linalg
from ._validation import check_matrix, check_vector


@dataclass(frozen=True)
class SnapshotSet:
    """Coordinates ``(n, d)``, parameters ``(N, p)`` and values ``(n, N)``."""

    coordinates: np.ndarray
    parameters: np.ndarray
    values: np.ndarray
    field_name: str | None = None

    def __post_init__(self):
        coords = check_matrix(self.coordinates, "coordinates", allow_1d=True)
        params = check_matrix(self.parameters, "parameters", allow_1d=True)
        values = check_matrix(self.values, "values")
        if values.shape[0] != coords.shape[0]:
            raise ValueError(
                f"values has {values.shape[0]} rows but coordinates has {coords.shape[0]}"
            )
        if values.shape[1] != params.shape[0]:
            raise ValueError(
                f"values has {values.shape[1]} columns but parameters has {params.shape[0]} rows"
            )
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "values", values)

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Truncation:
    """Either a fixed ``rank`` or an ``energy`` fraction in (0, 1)."""

    rank: int | None = None
    energy: float | None = None

    def __post_init__(self):
        if (self.rank is None) == (self.energy is None):
            raise ValueError("give exactly one of rank or energy")
        if self.rank is not None and int(self.rank) < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.energy is not None and not 0.0 < self.energy < 1.0:
            raise ValueError(f"energy must lie strictly in (0, 1), got {self.energy}")


@dataclass(frozen=True)
class PodBasis:
    """Truncated modes ``(n, r)`` plus the full singular value sequence."""

    modes: np.ndarray
    singular_values: np.ndarray
    rank: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rank", int(self.modes.shape[1]))

    @property
    def n_points(self) -> int:
        return self.modes.shape[0]


def energy_fractions(singular_values, power: int = 2) -> np.ndarray:
    if power not in (1, 2):
        raise ValueError(f"energy power must be 1 or 2, got {power}")
    s = np.asarray(singular_values, dtype=np.float64) ** power
    total = s.sum()
    if total <= 0.0:
        raise ValueError("all singular values are zero")
    out = np.cumsum(s) / total
    out[-1] = 1.0
    return out


def select_rank(singular_values, energy: float, power: int = 2) -> int:
    """Smallest ``r`` whose cumulative energy fraction strictly exceeds ``energy``.

    ``power=2`` sums squared singular values (captured variance) and is the
    default. ``power=1`` sums the singular values themselves, which selects
    far more modes on the same data: on the algebraic benchmark it picks 9
    modes at 0.99 where the squared form picks 1.
    """
    frac = energy_fractions(singular_values, power)
    return int(np.argmax(frac > energy)) + 1


def compute_pod(snapshots, truncation: Truncation, energy_power: int = 2) -> PodBasis:
    """Truncated POD basis of the raw snapshot matrix.

    ``snapshots`` may be a :class:`SnapshotSet` or an ``(n, N)`` array.
    """
    values = snapshots.values if isinstance(snapshots, SnapshotSet) else check_matrix(snapshots, "snapshots")
    res = linalg.svd(values)
    s = res.singular_values
    if truncation.rank is not None:
        r = int(truncation.rank)
        if r > s.size:
            raise ValueError(f"rank {r} exceeds min(n, N) = {s.size}")
    else:
        r = select_rank(s, truncation.energy, energy_power)
    return PodBasis(modes=np.ascontiguousarray(res.left_vectors[:, :r]), singular_values=s)


def project(basis: PodBasis, state) -> np.ndarray:
    """Modal coefficients ``modes.T @ state``."""
    state = check_vector(state, basis.n_points, "state")
    return basis.modes.T @ state


def reconstruct(basis: PodBasis, coeffs) -> np.ndarray:
    """Full state ``modes @ coeffs``."""
    coeffs = check_vector(coeffs, basis.rank, "coeffs")
    return basis.modes @ coeffs


def energy_profile(basis: PodBasis, power: int = 2) -> np.ndarray:
    """Cumulative energy fraction after each mode (length ``min(n, N)``)."""
    return energy_fractions(basis.singular_values, power)


class POD(TransformerMixin, BaseEstimator):
    """POD as a transformer from full states to modal coefficients.

    ``X`` has one snapshot per row, i.e. shape ``(N, n)``; this is the
    transpose of the column-wise snapshot matrix.

    Parameters
    ----------
    rank : int, optional
        Fixed number of modes. Mutually exclusive with ``energy``.
    energy : float, default=0.99
        Energy threshold used when ``rank`` is None.
    energy_power : {1, 2}, default=2
        Sum squared singular values (2) or the plain values (1) in the
        energy criterion.
    """

    def __init__(self, rank=None, energy=0.99, energy_power=2):
        self.rank = rank
        self.energy = energy
        self.energy_power = energy_power

    def _truncation(self):
        if self.rank is not None:
            return Truncation(rank=self.rank)
        return Truncation(energy=self.energy)

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        self.basis_ = compute_pod(X.T, self._truncation(), self.energy_power)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_matrix(X, "X", n_cols=self.n_features_in_)
        return X @ self.basis_.modes

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_matrix(X, "X", n_cols=self.basis_.rank)
        return X @ self.basis_.modes.T

    @property
    def n_components_(self):
        return self.basis_.rank
