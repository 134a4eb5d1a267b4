"""The black-box function: a small ELU multilayer perceptron with a softmax head.

The explained scalar is the class-1 softmax probability. Weights are stored
as ``(fan_in, fan_out)`` matrices so a layer is ``h @ W + b``.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from ._validation import check_points, check_vector
from .exceptions import DimensionMismatch, EmptySplit
from .functions import batch_finite_diff
from .sampling import SplitMixStream, derive_seed

FORMAT_VERSION = 1


def elu(z, alpha=1.0):
    return np.where(z >= 0, z, alpha * np.expm1(np.minimum(z, 0.0)))


def elu_derivative(z, alpha=1.0):
    # continuous extension: derivative at 0 is taken as 1
    return np.where(z >= 0, 1.0, alpha * np.exp(np.minimum(z, 0.0)))


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class Mlp:
    """Feed-forward net ``d -> hidden... -> 2`` with ELU hidden activations.

    Calling the net on an ``(n, d)`` batch returns the class-1 probabilities;
    :meth:`gradient` returns their analytic input gradients.
    """

    def __init__(self, weights, biases, alpha=1.0):
        self.weights = [np.array(W, dtype=np.float64) for W in weights]
        self.biases = [np.array(b, dtype=np.float64).reshape(-1) for b in biases]
        self.alpha = float(alpha)
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionMismatch("need one bias vector per weight matrix")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or W.shape[1] != b.shape[0]:
                raise DimensionMismatch(f"layer {i}: weight {W.shape} vs bias {b.shape}")
            if i and W.shape[0] != self.weights[i - 1].shape[1]:
                raise DimensionMismatch(f"layer {i} input does not match previous output")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite parameters")

    @property
    def dims(self):
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n_features(self):
        return self.dims[0]

    @classmethod
    def initialize(cls, dims, seed, alpha=1.0):
        """Glorot-uniform weights from the pinned generator, zero biases."""
        stream = SplitMixStream(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            u = stream.uniform(fan_in * fan_out).reshape(fan_in, fan_out)
            weights.append((2.0 * u - 1.0) * limit)
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, alpha)

    @classmethod
    def zeros(cls, dims):
        return cls([np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])],
                   [np.zeros(b) for b in dims[1:]])

    def _forward(self, X):
        pre, h = [], X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ W + b
            pre.append(z)
            h = elu(z, self.alpha)
        logits = h @ self.weights[-1] + self.biases[-1]
        return pre, h, logits

    def logits(self, X):
        X, _ = check_points(X, self.n_features)
        return self._forward(X)[2]

    def predict_proba(self, X):
        X, _ = check_points(X, self.n_features)
        return softmax(self._forward(X)[2])

    def __call__(self, X, class_index=1):
        X, single = check_points(X, self.n_features)
        p = softmax(self._forward(X)[2])[:, class_index]
        return p[0] if single else p

    def gradient(self, X, class_index=1):
        """Reverse-mode gradient of the ``class_index`` probability w.r.t. the inputs."""
        X, single = check_points(X, self.n_features)
        pre, _, logits = self._forward(X)
        P = softmax(logits)
        # d p_c / d logits = p_c * (e_c - p)
        upstream = -P * P[:, [class_index]]
        upstream[:, class_index] += P[:, class_index]
        G = upstream @ self.weights[-1].T
        for W, z in zip(reversed(self.weights[:-1]), reversed(pre)):
            G = (G * elu_derivative(z, self.alpha)) @ W.T
        return G[0] if single else G

    def to_dict(self):
        return {
            "version": FORMAT_VERSION,
            "dims": self.dims,
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "activation": "elu",
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("activation", "elu") != "elu":
            raise ValueError(f"unsupported activation {doc['activation']!r}")
        version = doc.get("version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        net = cls(doc["weights"], doc["biases"], doc.get("alpha", 1.0))
        if "dims" in doc and list(doc["dims"]) != net.dims:
            raise DimensionMismatch(f"declared dims {doc['dims']} but weights give {net.dims}")
        return net

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def forward(m, x):
    """Class-1 probability of a single point."""
    return float(m(check_vector(x, m.n_features)))


def input_gradient(m, x, class_index=1):
    return m.gradient(check_vector(x, m.n_features), class_index)


def finite_diff_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function at one point."""
    x = check_vector(x)
    return batch_finite_diff(lambda X: np.asarray(f(X)), x[None, :], h)[0]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    seed: int = 0
    hidden: tuple = (10, 10)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


def _param_grads(net, X, Y):
    """Mean cross-entropy loss and its parameter gradients for one-hot targets ``Y``."""
    pre, h_last, logits = net._forward(X)
    P = softmax(logits)
    n = X.shape[0]
    loss = -np.mean(np.log(np.clip(np.sum(P * Y, axis=1), 1e-300, None)))
    delta = (P - Y) / n
    acts = [X] + [elu(z, net.alpha) for z in pre]
    gW, gb = [None] * len(net.weights), [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ net.weights[i].T) * elu_derivative(pre[i - 1], net.alpha)
    return loss, gW, gb


def fit_mlp(X, y, cfg):
    """Adam on mean cross-entropy. Returns the net and the per-epoch mean loss."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(int)
    if X.shape[0] == 0:
        raise EmptySplit("no training rows")
    dims = [X.shape[1], *cfg.hidden, 2]
    net = Mlp.initialize(dims, derive_seed(cfg.seed, 0))
    shuffle = SplitMixStream(derive_seed(cfg.seed, 1))
    Y = np.eye(2)[y]
    params = net.weights + net.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    step = 0
    curve = []
    for _ in range(cfg.epochs):
        order = np.argsort(shuffle.uniform(X.shape[0]), kind="stable")
        losses = []
        for start in range(0, X.shape[0], cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, gW, gb = _param_grads(net, X[idx], Y[idx])
            losses.append(loss * len(idx))
            step += 1
            for p, g, mi, vi in zip(params, gW + gb, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                m_hat = mi / (1 - b1 ** step)
                v_hat = vi / (1 - b2 ** step)
                p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        curve.append(float(np.sum(losses) / X.shape[0]))
    return net, curve


def accuracy(net, X, y):
    return float(np.mean((net(X) >= 0.5).astype(int) == np.asarray(y).astype(int)))


def train(data, cfg):
    """Train on ``data``'s train split; report accuracies on both splits."""
    if data.train_idx is None or len(data.train_idx) == 0:
        raise EmptySplit("dataset has no train split; call split_and_normalize first")
    if len(data.test_idx) == 0:
        raise EmptySplit("dataset has an empty test split")
    labels = set(np.unique(data.labels).tolist())
    if not labels <= {0, 1}:
        raise ValueError(f"labels must be 0/1, got {sorted(labels)}")
    net, curve = fit_mlp(data.X_train, data.y_train, cfg)
    metrics = {
        "train_acc": accuracy(net, data.X_train, data.y_train),
        "test_acc": accuracy(net, data.X_test, data.y_test),
        "loss_curve": curve,
    }
    return net, metrics


@dataclass
class LipschitzEstimate:
    """Empirical gradient bound; ``bound`` is filled by :meth:`for_sigma`."""

    grad_max: float
    bound: float = field(default=float("nan"))

    def for_sigma(self, sigma):
        return LipschitzEstimate(self.grad_max, self.grad_max / (2.0 * sigma))


def estimate_grad_max(f, probes):
    """Largest input-gradient L2 norm of ``f`` over the probe points."""
    probes = np.asarray(probes, dtype=np.float64)
    if probes.ndim != 2 or probes.shape[0] == 0:
        raise ValueError("probes must be a non-empty (n, d) matrix")
    G = np.asarray(f.gradient(probes)).reshape(probes.shape)
    return LipschitzEstimate(float(np.max(np.linalg.norm(G, axis=1))))


class MLPClassifier(ClassifierMixin, BaseEstimator):
    """Estimator front end for :func:`fit_mlp`, usable in sklearn pipelines.

    After ``fit`` the trained :class:`Mlp` lives in ``net_`` and can be handed to
    any explainer directly.
    """

    def __init__(self, hidden_layer_sizes=(10, 10), epochs=15, learning_rate=1e-3,
                 beta1=0.9, beta2=0.999, eps=1e-8, batch_size=32, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.batch_size = batch_size
        self.random_state = random_state

    def _config(self):
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate,
                           adam_beta1=self.beta1, adam_beta2=self.beta2,
                           adam_eps=self.eps, batch_size=self.batch_size,
                           seed=self.random_state, hidden=self.hidden_layer_sizes)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        if not set(self.classes_.tolist()) <= {0, 1}:
            raise ValueError("MLPClassifier supports 0/1 labels only")
        self.net_, self.loss_curve_ = fit_mlp(X, y, self._config())
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "net_")
        return self.net_.predict_proba(X)

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def input_gradient(self, X, class_index=1):
        check_is_fitted(self, "net_")
        return self.net_.gradient(X, class_index)
