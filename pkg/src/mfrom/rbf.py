"""Radial basis function interpolation of modal coefficients over parameter space."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import linalg
from ._validation import check_matrix, check_vector

KERNELS = ("thin_plate", "gaussian", "multiquadric")
SHAPED_KERNELS = ("gaussian", "multiquadric")


class SingularKernelError(ValueError):
    """The kernel matrix cannot be solved (duplicate centers or degenerate kernel)."""


def kernel_values(r: np.ndarray, kernel: str, shape: float = 1.0) -> np.ndarray:
    """Evaluate the radial profile on distances ``r``."""
    if kernel == "thin_plate":
        out = np.zeros_like(r)
        nz = r > 0
        out[nz] = r[nz] ** 2 * np.log(r[nz])
        return out
    if kernel == "gaussian":
        return np.exp(-((shape * r) ** 2))
    if kernel == "multiquadric":
        return np.sqrt(1.0 + (shape * r) ** 2)
    raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


@dataclass(frozen=True)
class RbfSurrogate:
    centers: np.ndarray
    weights: np.ndarray
    kernel: str = "thin_plate"
    shape: float = 1.0

    @property
    def output_dim(self) -> int:
        return self.weights.shape[1]


def _duplicate_rows(centers: np.ndarray, tol: float):
    d = cdist(centers, centers)
    i, j = np.nonzero(np.triu(d <= tol, k=1))
    return list(zip(i.tolist(), j.tolist()))


def fit_rbf(params, coeffs, kernel: str = "thin_plate", shape: float = 1.0,
            smoothing: float = 0.0) -> RbfSurrogate:
    """Solve the kernel system ``Phi @ W = coeffs`` for the weights.

    The system is solved by minimum-norm least squares so mildly
    ill-conditioned kernels still produce weights. ``smoothing > 0`` adds a
    ridge term to the diagonal, giving a regression rather than an
    interpolant.

    Raises
    ------
    SingularKernelError
        When two centers coincide (row pairs are named) or the kernel
        matrix vanishes, as thin-plate does for a single center.
    """
    centers = check_matrix(params, "params", allow_1d=True)
    coeffs = check_matrix(coeffs, "coeffs", allow_1d=True)
    if coeffs.shape[0] != centers.shape[0]:
        raise ValueError(
            f"dimension mismatch: {centers.shape[0]} centers but {coeffs.shape[0]} coefficient rows"
        )
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")
    if kernel in SHAPED_KERNELS and not shape > 0:
        raise ValueError(f"shape must be positive for the {kernel} kernel, got {shape}")
    scale = max(float(np.ptp(centers, axis=0).max()), 1.0)
    dups = _duplicate_rows(centers, 1e-10 * scale)
    if dups:
        raise SingularKernelError(f"duplicate or near-duplicate centers at rows {dups}")
    phi = kernel_values(cdist(centers, centers), kernel, shape)
    if smoothing:
        phi = phi + smoothing * np.eye(phi.shape[0])
    if not np.any(phi):
        raise SingularKernelError(
            f"{kernel} kernel matrix over {phi.shape[0]} center(s) is identically zero"
        )
    weights = linalg.lstsq(phi, coeffs)
    return RbfSurrogate(centers=centers, weights=weights, kernel=kernel, shape=float(shape))


def eval_rbf(model: RbfSurrogate, mu) -> np.ndarray:
    """Interpolated coefficients at one parameter vector."""
    mu = check_vector(np.atleast_1d(mu), model.centers.shape[1], "mu")
    return eval_rbf_many(model, mu[None, :])[0]


def eval_rbf_many(model: RbfSurrogate, mus) -> np.ndarray:
    mus = check_matrix(mus, "mu", n_cols=model.centers.shape[1], allow_1d=model.centers.shape[1] == 1)
    phi = kernel_values(cdist(mus, model.centers), model.kernel, model.shape)
    return phi @ model.weights


class RBFInterpolator(RegressorMixin, BaseEstimator):
    """sklearn-style wrapper around :func:`fit_rbf` / :func:`eval_rbf_many`."""

    def __init__(self, kernel="thin_plate", shape=1.0, smoothing=0.0):
        self.kernel = kernel
        self.shape = shape
        self.smoothing = smoothing

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.float64)
        self._y_1d = y.ndim == 1
        self.surrogate_ = fit_rbf(X, y, self.kernel, self.shape, self.smoothing)
        self.n_features_in_ = self.surrogate_.centers.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "surrogate_")
        out = eval_rbf_many(self.surrogate_, X)
        return out[:, 0] if self._y_1d else out
