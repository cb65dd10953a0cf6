"""DeepONet with two feedforward networks combined by an inner product.

The *branch* network consumes spatial coordinates, the *trunk* network
consumes parameters (or sensor readings); both end in a linear layer of the
same width ``latent_dim`` and the output is the dot product of the two
latent vectors. Everything (forward, reverse-mode gradients, Adam) is plain
numpy in float64.

Parameter layout
----------------
All trainable values live in one flat vector ``theta``. The order is: every
branch layer, then every trunk layer; within a layer ``weight`` (row-major,
``out x in``), then ``bias`` (``out``), then ``prelu_alpha`` (one scalar,
PReLU layers only).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix

ACTIVATIONS = ("softplus", "prelu", "identity")
PRELU_INIT = 0.25


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became NaN or infinite at epoch {epoch}")
        self.epoch = epoch


# --------------------------------------------------------------------------
# structure

@dataclass(frozen=True)
class NetSpec:
    """Shape of a DeepONet.

    ``*_hidden`` lists hidden-layer widths; the output layer of width
    ``latent_dim`` with identity activation is implied.
    """

    branch_in: int
    trunk_in: int
    branch_hidden: tuple = (30, 30)
    trunk_hidden: tuple = (30, 30)
    latent_dim: int = 30
    branch_activation: str = "softplus"
    trunk_activation: str = "softplus"

    def __post_init__(self):
        for name in ("branch_in", "trunk_in", "latent_dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        object.__setattr__(self, "branch_hidden", tuple(int(w) for w in self.branch_hidden))
        object.__setattr__(self, "trunk_hidden", tuple(int(w) for w in self.trunk_hidden))
        if any(w < 1 for w in self.branch_hidden + self.trunk_hidden):
            raise ValueError("hidden widths must be >= 1")
        for act in (self.branch_activation, self.trunk_activation):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}; choose from {ACTIVATIONS}")

    def layer_shapes(self, net: str):
        """``[(fan_in, fan_out, activation), ...]`` for ``net`` in {'branch', 'trunk'}."""
        if net == "branch":
            widths = (self.branch_in, *self.branch_hidden, self.latent_dim)
            act = self.branch_activation
        else:
            widths = (self.trunk_in, *self.trunk_hidden, self.latent_dim)
            act = self.trunk_activation
        n = len(widths) - 1
        return [(widths[i], widths[i + 1], act if i < n - 1 else "identity") for i in range(n)]


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"
    prelu_alpha: np.ndarray | None = None

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if (self.activation == "prelu") != (self.prelu_alpha is not None):
            raise ValueError("prelu_alpha must be given exactly when activation is 'prelu'")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"inconsistent layer: weight {self.weight.shape}, bias {self.bias.shape}"
            )

    @property
    def fan_in(self):
        return self.weight.shape[1]

    @property
    def fan_out(self):
        return self.weight.shape[0]


@dataclass(frozen=True)
class AffineMap:
    """Componentwise ``z = scale * v + shift``."""

    scale: np.ndarray
    shift: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.ones(dim), np.zeros(dim))

    @classmethod
    def to_unit_box(cls, data) -> "AffineMap":
        """Map each column's [min, max] onto [-1, 1]; constant columns map to 0."""
        data = np.asarray(data, dtype=np.float64)
        lo, hi = data.min(axis=0), data.max(axis=0)
        span = hi - lo
        flat = span == 0
        scale = np.where(flat, 1.0, 2.0 / np.where(flat, 1.0, span))
        shift = np.where(flat, -lo, -1.0 - lo * scale)
        return cls(scale, shift)

    def __call__(self, v):
        return v * self.scale + self.shift


def _param_count(shapes):
    return sum(i * o + o + (1 if a == "prelu" else 0) for i, o, a in shapes)


class DeepOnetModel:
    """A DeepONet whose parameters are views into one flat vector ``theta``."""

    def __init__(self, spec: NetSpec, theta=None, x_map: AffineMap | None = None,
                 q_map: AffineMap | None = None):
        self.spec = spec
        shapes = spec.layer_shapes("branch") + spec.layer_shapes("trunk")
        size = _param_count(shapes)
        if theta is None:
            theta = np.zeros(size)
        theta = np.array(theta, dtype=np.float64)
        if theta.shape != (size,):
            raise ValueError(f"parameter vector has length {theta.size}, spec needs {size}")
        self.theta = theta
        self.x_map = x_map if x_map is not None else AffineMap.identity(spec.branch_in)
        self.q_map = q_map if q_map is not None else AffineMap.identity(spec.trunk_in)
        self.branch = self._views(self.theta, spec.layer_shapes("branch"), 0)
        offset = _param_count(spec.layer_shapes("branch"))
        self.trunk = self._views(self.theta, spec.layer_shapes("trunk"), offset)
        self._layout = _layout(shapes)
        self._mask = None

    @staticmethod
    def _views(buf, shapes, offset):
        layers = []
        for fan_in, fan_out, act in shapes:
            w = buf[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            b = buf[offset:offset + fan_out]
            offset += fan_out
            alpha = None
            if act == "prelu":
                alpha = buf[offset:offset + 1]
                offset += 1
            layers.append(DenseLayer(w, b, act, alpha))
        return layers

    @classmethod
    def from_layers(cls, branch, trunk, x_map=None, q_map=None) -> "DeepOnetModel":
        """Assemble a model from explicit layers (copied into a fresh flat vector)."""
        if not branch or not trunk:
            raise ValueError("branch and trunk need at least one layer each")
        if branch[-1].fan_out != trunk[-1].fan_out:
            raise ValueError(
                f"branch and trunk outputs must have the same width, got "
                f"{branch[-1].fan_out} and {trunk[-1].fan_out}"
            )
        for net in (branch, trunk):
            if net[-1].activation != "identity":
                raise ValueError("the final layer of each network must use identity activation")
            for a, b in zip(net[:-1], net[1:]):
                if a.fan_out != b.fan_in:
                    raise ValueError(f"layer widths do not chain: {a.fan_out} -> {b.fan_in}")
            acts = {l.activation for l in net[:-1]} or {"identity"}
            if len(acts) > 1:
                raise ValueError("hidden layers of one network must share an activation")
        spec = NetSpec(
            branch_in=branch[0].fan_in, trunk_in=trunk[0].fan_in,
            branch_hidden=tuple(l.fan_out for l in branch[:-1]),
            trunk_hidden=tuple(l.fan_out for l in trunk[:-1]),
            latent_dim=branch[-1].fan_out,
            branch_activation=branch[0].activation if len(branch) > 1 else "softplus",
            trunk_activation=trunk[0].activation if len(trunk) > 1 else "softplus",
        )
        model = cls(spec, x_map=x_map, q_map=q_map)
        for dst, src in zip(model.branch + model.trunk, list(branch) + list(trunk)):
            dst.weight[...] = src.weight
            dst.bias[...] = src.bias
            if src.prelu_alpha is not None:
                dst.prelu_alpha[...] = src.prelu_alpha
        return model

    def copy(self) -> "DeepOnetModel":
        return DeepOnetModel(self.spec, self.theta.copy(), self.x_map, self.q_map)

    def with_theta(self, theta) -> "DeepOnetModel":
        return DeepOnetModel(self.spec, theta, self.x_map, self.q_map)

    def weight_mask(self) -> np.ndarray:
        """Boolean mask over ``theta`` selecting weight matrices (the L2-penalized entries)."""
        if self._mask is None:
            mask = np.zeros(self.theta.size, dtype=bool)
            for ws, fan_out, fan_in, _, _ in self._layout:
                mask[ws:ws + fan_out * fan_in] = True
            self._mask = mask
        return self._mask

    def grad_views(self, g: np.ndarray):
        """Per-layer ``(dW, db, dalpha)`` views into a flat gradient ``g``."""
        views = []
        for ws, fan_out, fan_in, bs, a in self._layout:
            views.append((g[ws:ws + fan_out * fan_in].reshape(fan_out, fan_in),
                          g[bs:bs + fan_out], None if a is None else g[a:a + 1]))
        nb = len(self.branch)
        return views[:nb], views[nb:]

    # NOTE: branch/trunk are views; pickling copies theta and rebuilds them.
    def __getstate__(self):
        return {"spec": self.spec, "theta": self.theta, "x_map": self.x_map, "q_map": self.q_map}

    def __setstate__(self, state):
        self.__init__(state["spec"], state["theta"], state["x_map"], state["q_map"])

    def __deepcopy__(self, memo):
        return self.copy()


def _layout(shapes):
    out, offset = [], 0
    for fan_in, fan_out, act in shapes:
        ws = offset
        bs = ws + fan_in * fan_out
        offset = bs + fan_out
        a = None
        if act == "prelu":
            a = offset
            offset += 1
        out.append((ws, fan_out, fan_in, bs, a))
    return out


def init_params(spec: NetSpec, seed: int = 0, x_map=None, q_map=None) -> DeepOnetModel:
    """Glorot-uniform weights, zero biases, PReLU slopes at 0.25.

    Layers are drawn in parameter-layout order from one
    ``numpy.random.default_rng(seed)`` stream.
    """
    rng = np.random.default_rng(seed)
    model = DeepOnetModel(spec, x_map=x_map, q_map=q_map)
    for layer in model.branch + model.trunk:
        s = np.sqrt(6.0 / (layer.fan_in + layer.fan_out))
        layer.weight[...] = rng.uniform(-s, s, size=layer.weight.shape)
        if layer.prelu_alpha is not None:
            layer.prelu_alpha[...] = PRELU_INIT
    return model


# --------------------------------------------------------------------------
# forward / backward

def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _net_forward(layers, h):
    """Run ``h`` through ``layers``; the cache holds what the backward pass needs."""
    cache = []
    for layer in layers:
        z = h @ layer.weight.T
        z += layer.bias
        if layer.activation == "softplus":
            out = _softplus(z)
            # sigmoid(z) == 1 - exp(-softplus(z)), reusing the forward value
            cache.append((h, -np.expm1(-out)))
        elif layer.activation == "prelu":
            out = np.maximum(z, 0.0) + layer.prelu_alpha[0] * np.minimum(z, 0.0)
            cache.append((h, z))
        else:
            out = z
            cache.append((h, None))
        h = out
    return h, cache


def _net_backward(layers, cache, dh, grads):
    """Accumulate into per-layer ``grads`` (list of (dW, db, dalpha)) and return dh_in."""
    for layer, (h_in, aux), (gw, gb, ga) in zip(reversed(layers), reversed(cache), reversed(grads)):
        if layer.activation == "softplus":
            dz = dh * aux
        elif layer.activation == "prelu":
            ga[0] += np.sum(dh * np.minimum(aux, 0.0))
            dz = np.where(aux > 0, dh, layer.prelu_alpha[0] * dh)
        else:
            dz = dh
        gw += dz.T @ h_in
        gb += dz.sum(axis=0)
        dh = dz @ layer.weight
    return dh


def branch_latent(model: DeepOnetModel, coords) -> np.ndarray:
    coords = check_matrix(coords, "coords", n_cols=model.spec.branch_in, allow_1d=model.spec.branch_in == 1)
    return _net_forward(model.branch, model.x_map(coords))[0]


def trunk_latent(model: DeepOnetModel, inputs) -> np.ndarray:
    inputs = check_matrix(inputs, "inputs", n_cols=model.spec.trunk_in, allow_1d=model.spec.trunk_in == 1)
    return _net_forward(model.trunk, model.q_map(inputs))[0]


def forward(model: DeepOnetModel, x, y) -> float:
    """Scalar output for a single spatial point ``x`` and input vector ``y``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != (model.spec.branch_in,) or y.shape != (model.spec.trunk_in,):
        raise ValueError(
            f"dimension mismatch: got x{x.shape}, y{y.shape}; model expects "
            f"({model.spec.branch_in},), ({model.spec.trunk_in},)"
        )
    return float(branch_latent(model, x[None, :])[0] @ trunk_latent(model, y[None, :])[0])


def forward_rows(model: DeepOnetModel, X, Q) -> np.ndarray:
    """Outputs for paired rows ``(X[k], Q[k])``."""
    return np.einsum("ij,ij->i", branch_latent(model, X), trunk_latent(model, Q))


def forward_grid(model: DeepOnetModel, coords, inputs) -> np.ndarray:
    """``(n, N)`` outputs for every coordinate against every input vector."""
    return branch_latent(model, coords) @ trunk_latent(model, inputs).T


@dataclass(frozen=True)
class GridDataset:
    """Targets on the Cartesian product of coordinates and inputs.

    ``targets[i, j]`` belongs to row ``(coordinates[i], inputs[j])``; the
    rows are enumerated coordinate-fastest within each input column.
    """

    coordinates: np.ndarray
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        c = check_matrix(self.coordinates, "coordinates", allow_1d=True)
        q = check_matrix(self.inputs, "inputs", allow_1d=True)
        t = check_matrix(self.targets, "targets")
        if t.shape != (c.shape[0], q.shape[0]):
            raise ValueError(
                f"targets shape {t.shape} does not match ({c.shape[0]}, {q.shape[0]})"
            )
        object.__setattr__(self, "coordinates", c)
        object.__setattr__(self, "inputs", q)
        object.__setattr__(self, "targets", t)

    @property
    def n_rows(self) -> int:
        return self.targets.size

    def rows(self):
        """Explicit ``(X, Q, r)`` arrays with ``n * N`` rows."""
        n, N = self.targets.shape
        X = np.tile(self.coordinates, (N, 1))
        Q = np.repeat(self.inputs, n, axis=0)
        return X, Q, self.targets.T.reshape(-1)


def _as_batch(model, batch):
    if isinstance(batch, GridDataset):
        return batch
    X, Q, t = batch
    X = check_matrix(X, "x", n_cols=model.spec.branch_in, allow_1d=model.spec.branch_in == 1)
    Q = check_matrix(Q, "y", n_cols=model.spec.trunk_in, allow_1d=model.spec.trunk_in == 1)
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if not (X.shape[0] == Q.shape[0] == t.shape[0]):
        raise ValueError("x, y and target batches must have the same number of rows")
    if t.size == 0:
        raise ValueError("empty batch")
    return X, Q, t


def loss_and_grad(model: DeepOnetModel, batch, l2_weight: float = 0.0, need_grad: bool = True):
    """Mean squared error plus ``l2_weight * sum(weights**2)`` and its gradient.

    ``batch`` is a :class:`GridDataset` or a tuple ``(X, Q, targets)`` of
    paired rows. The gradient is a flat array in parameter-layout order.
    """
    batch = _as_batch(model, batch)
    grid = isinstance(batch, GridDataset)
    if grid:
        xin, qin = model.x_map(batch.coordinates), model.q_map(batch.inputs)
    else:
        xin, qin = model.x_map(batch[0]), model.q_map(batch[1])
    B, bcache = _net_forward(model.branch, xin)
    T, tcache = _net_forward(model.trunk, qin)
    if grid:
        err = B @ T.T - batch.targets
    else:
        err = np.einsum("ij,ij->i", B, T) - batch[2]
    mask = model.weight_mask() if l2_weight else None
    loss = float(np.mean(err * err))
    if l2_weight:
        w = model.theta[mask]
        loss += l2_weight * float(w @ w)
    if not need_grad:
        return loss, None
    derr = (2.0 / err.size) * err
    if grid:
        dB, dT = derr @ T, derr.T @ B
    else:
        dB, dT = derr[:, None] * T, derr[:, None] * B
    g = np.zeros_like(model.theta)
    gb, gt = model.grad_views(g)
    _net_backward(model.branch, bcache, dB, gb)
    _net_backward(model.trunk, tcache, dT, gt)
    if l2_weight:
        g[mask] += 2.0 * l2_weight * model.theta[mask]
    return loss, g


def loss_mse_l2(model: DeepOnetModel, batch, l2_weight: float = 0.0) -> float:
    return loss_and_grad(model, batch, l2_weight, need_grad=False)[0]


def backward(model: DeepOnetModel, batch, l2_weight: float = 0.0) -> DeepOnetModel:
    """Gradient of :func:`loss_mse_l2`, returned as a model-shaped structure.

    ``grad.branch[k].weight`` etc. hold the partial derivatives; ``grad.theta``
    is the flat vector.
    """
    _, g = loss_and_grad(model, batch, l2_weight)
    return model.with_theta(g)


# --------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10000
    learning_rate: float = 0.005
    l2_weight: float = 1e-4
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not self.l2_weight >= 0:
            raise ValueError(f"l2_weight must be >= 0, got {self.l2_weight}")


def train(model: DeepOnetModel, dataset, config: TrainConfig):
    """Full-batch Adam on :func:`loss_mse_l2`.

    ``history[k]`` is the loss at the parameters entering epoch ``k``, so
    ``history[0]`` is the loss of ``model`` as given. The input model is not
    modified; a trained copy is returned together with the history.
    """
    batch = _as_batch(model, dataset)
    model = model.copy()
    theta = model.theta
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2, eps, lr = config.adam_beta1, config.adam_beta2, config.adam_eps, config.learning_rate
    history = np.empty(int(config.epochs))
    for epoch in range(int(config.epochs)):
        loss, g = loss_and_grad(model, batch, config.l2_weight)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch)
        history[epoch] = loss
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        t = epoch + 1
        step = lr / (1.0 - b1 ** t)
        theta -= step * m / (np.sqrt(v / (1.0 - b2 ** t)) + eps)
    return model, history


# --------------------------------------------------------------------------
# estimator

@dataclass(frozen=True)
class Architecture:
    """Input-independent part of a :class:`NetSpec`."""

    branch_hidden: tuple = (30, 30)
    trunk_hidden: tuple = (30, 30)
    latent_dim: int = 30
    branch_activation: str = "softplus"
    trunk_activation: str = "softplus"

    def spec(self, branch_in: int, trunk_in: int) -> NetSpec:
        return NetSpec(branch_in, trunk_in, self.branch_hidden, self.trunk_hidden,
                       self.latent_dim, self.branch_activation, self.trunk_activation)


# 1-D algebraic benchmark: 2 x 30 softplus hidden layers on both nets, 30 outputs.
ALGEBRAIC_ARCHITECTURE = Architecture((30, 30), (30, 30), 30, "softplus", "softplus")
# 2-D flow problem: branch 3 x 50, trunk 3 x 20, PReLU, 20 outputs.
FLOW_ARCHITECTURE = Architecture((50, 50, 50), (20, 20, 20), 20, "prelu", "prelu")


def fit_grid(coords, inputs, targets, architecture: Architecture, config: TrainConfig,
             normalize: bool = True):
    """Initialize, fit the input normalization and train on grid-structured data.

    Returns ``(model, history)``.
    """
    data = GridDataset(coords, inputs, targets)
    spec = architecture.spec(data.coordinates.shape[1], data.inputs.shape[1])
    x_map = AffineMap.to_unit_box(data.coordinates) if normalize else None
    q_map = AffineMap.to_unit_box(data.inputs) if normalize else None
    model = init_params(spec, config.seed, x_map=x_map, q_map=q_map)
    return train(model, data, config)


class DeepONetRegressor(RegressorMixin, BaseEstimator):
    """DeepONet mapping an input vector to a whole field on fixed coordinates.

    ``fit(X, y, coords=...)`` takes ``X`` of shape ``(N, q)`` (parameters or
    sensor readings), fields ``y`` of shape ``(N, n)`` and coordinates of
    shape ``(n, d)``. ``predict(X)`` returns ``(N', n)`` fields on the same
    coordinates. Parameters mirror :class:`Architecture` and
    :class:`TrainConfig`.
    """

    def __init__(self, branch_hidden=(30, 30), trunk_hidden=(30, 30), latent_dim=30,
                 branch_activation="softplus", trunk_activation="softplus", epochs=10000,
                 learning_rate=0.005, l2_weight=1e-4, random_state=0, normalize=True):
        self.branch_hidden = branch_hidden
        self.trunk_hidden = trunk_hidden
        self.latent_dim = latent_dim
        self.branch_activation = branch_activation
        self.trunk_activation = trunk_activation
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2_weight = l2_weight
        self.random_state = random_state
        self.normalize = normalize

    @classmethod
    def from_architecture(cls, arch: Architecture, **kwargs) -> "DeepONetRegressor":
        return cls(branch_hidden=arch.branch_hidden, trunk_hidden=arch.trunk_hidden,
                   latent_dim=arch.latent_dim, branch_activation=arch.branch_activation,
                   trunk_activation=arch.trunk_activation, **kwargs)

    def architecture(self) -> Architecture:
        return Architecture(tuple(self.branch_hidden), tuple(self.trunk_hidden), int(self.latent_dim),
                            self.branch_activation, self.trunk_activation)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=int(self.epochs), learning_rate=float(self.learning_rate),
                           l2_weight=float(self.l2_weight), seed=int(self.random_state))

    def fit(self, X, y, coords=None):
        if coords is None:
            raise ValueError("coords (n, d) are required to fit a DeepONet")
        X = check_matrix(X, "X", allow_1d=True)
        y = check_matrix(y, "y")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"dimension mismatch: X has {X.shape[0]} rows, y has {y.shape[0]}")
        self.coords_ = check_matrix(coords, "coords", allow_1d=True)
        self.model_, self.loss_history_ = fit_grid(
            self.coords_, X, y.T, self.architecture(), self.train_config(), self.normalize)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_matrix(X, "X", n_cols=self.n_features_in_, allow_1d=self.n_features_in_ == 1)
        return forward_grid(self.model_, self.coords_, X).T
