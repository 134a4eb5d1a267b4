"""Scalar functions ``f: R^d -> R`` that the explainers can query.

An explainable function is any object with

* ``f(X)`` returning ``(n,)`` values for an ``(n, d)`` batch, and
* ``f.gradient(X)`` returning the ``(n, d)`` input gradients (SmoothGrad only).

:class:`~smoothlime.model.Mlp` follows the same protocol.
"""

import json

import numpy as np

from ._validation import check_points


class LinearFunction:
    """``f(x) = theta @ x + bias``."""

    def __init__(self, theta, bias=0.0):
        self.theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        self.bias = float(bias)

    @property
    def n_features(self):
        return self.theta.shape[0]

    def __call__(self, X):
        X, single = check_points(X, self.n_features)
        out = X @ self.theta + self.bias
        return out[0] if single else out

    def gradient(self, X):
        X, single = check_points(X, self.n_features)
        g = np.broadcast_to(self.theta, X.shape).copy()
        return g[0] if single else g

    def to_dict(self):
        return {"kind": "linear", "theta": self.theta.tolist(), "bias": self.bias}


class QuadraticFunction:
    """``f(x) = x @ A @ x + theta @ x + bias`` (``A`` need not be symmetric)."""

    def __init__(self, A, theta=None, bias=0.0):
        self.A = np.asarray(A, dtype=np.float64)
        d = self.A.shape[0]
        self.theta = np.zeros(d) if theta is None else np.asarray(theta, dtype=np.float64)
        self.bias = float(bias)

    @property
    def n_features(self):
        return self.A.shape[0]

    def __call__(self, X):
        X, single = check_points(X, self.n_features)
        out = np.einsum("ni,ij,nj->n", X, self.A, X) + X @ self.theta + self.bias
        return out[0] if single else out

    def gradient(self, X):
        X, single = check_points(X, self.n_features)
        g = X @ (self.A + self.A.T).T + self.theta
        return g[0] if single else g

    def to_dict(self):
        return {"kind": "quadratic", "A": self.A.tolist(), "theta": self.theta.tolist(),
                "bias": self.bias}


class CallableFunction:
    """Wrap a vectorized callable; ``grad`` is optional (central differences otherwise)."""

    def __init__(self, fn, grad=None, step=1e-5):
        self.fn = fn
        self.grad = grad
        self.step = step

    def __call__(self, X):
        X, single = check_points(X)
        out = np.asarray(self.fn(X), dtype=np.float64)
        return out[0] if single else out

    def gradient(self, X):
        X, single = check_points(X)
        if self.grad is not None:
            g = np.asarray(self.grad(X), dtype=np.float64)
        else:
            g = batch_finite_diff(self.fn, X, self.step)
        return g[0] if single else g


class LinearCombination:
    """``alpha * f + beta * g``, with gradients combined the same way."""

    def __init__(self, f, g, alpha=1.0, beta=1.0):
        self.f, self.g, self.alpha, self.beta = f, g, alpha, beta

    def __call__(self, X):
        return self.alpha * self.f(X) + self.beta * self.g(X)

    def gradient(self, X):
        return self.alpha * self.f.gradient(X) + self.beta * self.g.gradient(X)


def batch_finite_diff(fn, X, h=1e-5):
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h`` for every row of ``X``."""
    if h <= 0:
        raise ValueError("step must be positive")
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    G = np.empty((n, d))
    for i in range(d):
        Xp, Xm = X.copy(), X.copy()
        Xp[:, i] += h
        Xm[:, i] -= h
        G[:, i] = (np.asarray(fn(Xp)) - np.asarray(fn(Xm))) / (2 * h)
    return G


def function_from_dict(doc):
    """Rebuild a function from its JSON document (linear, quadratic or mlp)."""
    from .model import Mlp

    kind = doc.get("kind", "mlp" if "dims" in doc else None)
    if kind == "linear":
        return LinearFunction(doc["theta"], doc.get("bias", 0.0))
    if kind == "quadratic":
        return QuadraticFunction(doc["A"], doc.get("theta"), doc.get("bias", 0.0))
    if kind == "mlp":
        return Mlp.from_dict(doc)
    raise ValueError(f"unknown function document kind {kind!r}")


def load_function(path):
    with open(path, encoding="utf-8") as fh:
        return function_from_dict(json.load(fh))
