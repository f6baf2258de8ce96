"""Single-network comparison systems over the undivided feature vector."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import ConfigError
from .model import ViewNetwork, _batches
from .nn import MLP, Adam, squared_error, squared_error_grad


def _check_targets(X, y):
    X, y = check_X_y(X, y, multi_output=True, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ConfigError("targets must be (n, 2) coordinates")
    return X, y


class VDLRegressor(RegressorMixin, BaseEstimator):
    """Variational regressor: one Gaussian-latent network trained on every sample and feature."""

    def __init__(self, latent_dim: int = 120, hidden=(256, 128), epochs: int = 30, batch_size: int = 32,
                 learning_rate: float = 1e-3, kl_weight: float = 1e-5, random_state: int = 0):
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.kl_weight = kl_weight
        self.random_state = random_state

    def _build(self, n_features: int):
        self.n_features_in_ = n_features
        self.network_ = ViewNetwork(n_features, self.latent_dim, self.hidden,
                                    np.random.default_rng(np.random.SeedSequence(self.random_state, spawn_key=(1, 0))))

    def fit(self, X, y, view_labels=None):
        """``view_labels`` is accepted for interface parity and ignored."""
        X, y = _check_targets(X, y)
        self._build(X.shape[1])
        opt = Adam(self.network_.params(), lr=self.learning_rate)
        rng = np.random.default_rng(np.random.SeedSequence(self.random_state, spawn_key=(3, 0)))
        self.history_ = []
        for _ in range(self.epochs):
            for b in _batches(X.shape[0], self.batch_size, rng):
                eps = rng.standard_normal((b.size, self.latent_dim))
                self.history_.append(self.network_.loss_and_grads(X[b], y[b], eps, self.kl_weight))
                opt.step(self.network_.grads())
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return self.network_.encode(check_array(X, dtype=np.float64))[0]

    def predict(self, X) -> np.ndarray:
        return self.network_.regressor.forward(self.transform(X))

    def get_state(self) -> dict:
        check_is_fitted(self, "network_")
        return {"network": self.network_.state("vdl")}

    def set_state(self, n_features: int, state: dict) -> "VDLRegressor":
        self._build(n_features)
        self.network_.load_state("vdl", state["network"])
        return self


class DNNRegressor(RegressorMixin, BaseEstimator):
    """Plain dense regressor trained on squared Euclidean error."""

    def __init__(self, hidden=(256, 128), epochs: int = 30, batch_size: int = 32, learning_rate: float = 1e-3,
                 random_state: int = 0):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _build(self, n_features: int):
        self.n_features_in_ = n_features
        self.network_ = MLP([n_features, *self.hidden, 2], "identity",
                            np.random.default_rng(np.random.SeedSequence(self.random_state, spawn_key=(1, 0))))

    def fit(self, X, y, view_labels=None):
        X, y = _check_targets(X, y)
        self._build(X.shape[1])
        opt = Adam(self.network_.params(), lr=self.learning_rate)
        rng = np.random.default_rng(np.random.SeedSequence(self.random_state, spawn_key=(3, 0)))
        self.history_ = []
        for _ in range(self.epochs):
            for b in _batches(X.shape[0], self.batch_size, rng):
                y_hat = self.network_.forward(X[b])
                self.history_.append(float(squared_error(y[b], y_hat).mean()))
                self.network_.backward(squared_error_grad(y[b], y_hat) / b.size)
                opt.step(self.network_.grads())
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return self.network_.forward(check_array(X, dtype=np.float64))

    def get_state(self) -> dict:
        check_is_fitted(self, "network_")
        return {"network": self.network_.state("dnn")}

    def set_state(self, n_features: int, state: dict) -> "DNNRegressor":
        self._build(n_features)
        self.network_.load_state("dnn", state["network"])
        return self
