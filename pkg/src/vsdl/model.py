"""View-selective deep learning.

Stage 1 trains one variational network per view, each updated only on the
samples for which its view is informative. Stage 2 reads the concatenated
latents of all views, classifies the dominant views with a softmax head,
rescales each view's latent block by its class weight and regresses the
location from the rescaled latents.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .csi import normalize_view_label
from .errors import ConfigError
from .nn import MLP, Adam, GaussianLatent, kl_log_var, kl_log_var_grad, squared_error, squared_error_grad

LATENT_MODES = ("sampled", "mean")


class ViewNetwork:
    """Encoder to a diagonal Gaussian latent plus a regression head on the latent."""

    def __init__(self, n_in: int, latent_dim: int, hidden: Sequence[int], rng: np.random.Generator):
        if latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")
        self.latent_dim = latent_dim
        self.encoder = MLP([n_in, *hidden, 2 * latent_dim], "identity", rng)
        self.regressor = MLP([latent_dim, *hidden, 2], "identity", rng)

    @property
    def n_in(self) -> int:
        return self.encoder.widths[0]

    def encode(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and log-variance of the latent posterior."""
        head = self.encoder.forward(x)
        return head[:, : self.latent_dim], head[:, self.latent_dim:]

    def forward(self, x: np.ndarray, eps: np.ndarray) -> tuple[GaussianLatent, np.ndarray]:
        mu, log_var = self.encode(x)
        latent = GaussianLatent(mu, log_var, eps)
        return latent, self.regressor.forward(latent.z)

    def loss_and_grads(self, x, y, eps, kl_weight: float = 1.0) -> float:
        """Batch-mean regression + KL loss; leaves gradients on the layers."""
        n = x.shape[0]
        latent, y_hat = self.forward(x, eps)
        loss = squared_error(y, y_hat) + kl_weight * kl_log_var(latent.mu, latent.log_var)
        grad_z = self.regressor.backward(squared_error_grad(y, y_hat) / n)
        g_mu, g_lv = latent.backward(grad_z)
        k_mu, k_lv = kl_log_var_grad(latent.mu, latent.log_var)
        self.encoder.backward(np.hstack([g_mu + kl_weight * k_mu / n, g_lv + kl_weight * k_lv / n]))
        return float(loss.mean())

    def params(self) -> list[np.ndarray]:
        return self.encoder.params() + self.regressor.params()

    def grads(self) -> list[np.ndarray]:
        return self.encoder.grads() + self.regressor.grads()

    def state(self, prefix: str) -> dict[str, np.ndarray]:
        return {**self.encoder.state(f"{prefix}.encoder"), **self.regressor.state(f"{prefix}.regressor")}

    def load_state(self, prefix: str, arrays: dict) -> None:
        self.encoder.load_state(f"{prefix}.encoder", arrays)
        self.regressor.load_state(f"{prefix}.regressor", arrays)


def stage1_forward(net: ViewNetwork, x_k: np.ndarray, rng: np.random.Generator | None = None, eps=None):
    """Return ``(mu, sigma, z, y_hat)`` for a batch of view inputs."""
    x_k = np.atleast_2d(np.asarray(x_k, dtype=np.float64))
    if x_k.shape[1] != net.n_in:
        raise ValueError(f"view input width {x_k.shape[1]} != network input width {net.n_in}")
    if eps is None:
        eps = (np.random.default_rng() if rng is None else rng).standard_normal((x_k.shape[0], net.latent_dim))
    latent, y_hat = net.forward(x_k, eps)
    return latent.mu, latent.sigma, latent.z, y_hat


def stage1_loss(y, y_hat, mu, sigma, u_k: int, kl_weight: float = 1.0) -> float | None:
    """Regression + KL loss of one sample for an informative view; None when the view is not informative."""
    if u_k not in (0, 1):
        raise ValueError("u_k must be 0 or 1")
    if u_k == 0:
        return None
    sigma = np.asarray(sigma, dtype=np.float64)
    return float(squared_error(y, y_hat) + kl_weight * kl_log_var(np.asarray(mu), 2 * np.log(sigma)))


class Stage1Model:
    """K independent view networks sharing a latent width."""

    def __init__(self, input_widths: Sequence[int], latent_dim: int, hidden: Sequence[int], seed: int = 0,
                 learning_rate: float = 1e-3):
        self.latent_dim = latent_dim
        self.views = [
            ViewNetwork(w, latent_dim, hidden, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, k))))
            for k, w in enumerate(input_widths)
        ]
        self.optimizers = [Adam(v.params(), lr=learning_rate) for v in self.views]

    @property
    def n_views(self) -> int:
        return len(self.views)

    def train_step(self, x_views: Sequence[np.ndarray], y: np.ndarray, u: np.ndarray, eps: Sequence[np.ndarray],
                   kl_weight: float = 1.0) -> list[float | None]:
        """One update per view from the rows where that view is informative.

        A view with no informative rows in the batch is left untouched,
        optimizer state included.
        """
        losses: list[float | None] = []
        for k, net in enumerate(self.views):
            rows = np.asarray(u)[:, k] == 1
            if not rows.any():
                losses.append(None)
                continue
            loss = net.loss_and_grads(x_views[k][rows], y[rows], eps[k][rows], kl_weight)
            self.optimizers[k].step(net.grads())
            losses.append(loss)
        return losses

    def latent_params(self, x_views: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated means and log-variances over all views, ``(n, K*J)`` each."""
        mus, lvs = zip(*(net.encode(np.asarray(x, dtype=np.float64)) for net, x in zip(self.views, x_views)))
        return np.hstack(mus), np.hstack(lvs)

    def extract_latents(self, x_views: Sequence[np.ndarray], mode: str = "mean",
                        rng: np.random.Generator | None = None) -> np.ndarray:
        """Latents of every view regardless of the view labels."""
        if mode not in LATENT_MODES:
            raise ValueError(f"mode must be one of {LATENT_MODES}")
        mu, log_var = self.latent_params(x_views)
        if mode == "mean":
            return mu
        rng = np.random.default_rng() if rng is None else rng
        return mu + np.exp(0.5 * log_var) * rng.standard_normal(mu.shape)

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for k, net in enumerate(self.views):
            out.update(net.state(f"view{k}"))
        return out

    def load_state(self, arrays: dict) -> None:
        for k, net in enumerate(self.views):
            net.load_state(f"view{k}", arrays)


@dataclass
class Stage2Output:
    u_hat: np.ndarray
    z_prime: np.ndarray
    y_hat: np.ndarray


class Stage2Model:
    """View classifier and reweighted regressor over concatenated latents."""

    def __init__(self, n_views: int, latent_dim: int, hidden: Sequence[int], alpha: float = 0.5, seed: int = 0,
                 learning_rate: float = 1e-3):
        if not 0 < alpha < 1:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        self.n_views = n_views
        self.latent_dim = latent_dim
        self.alpha = alpha
        width = n_views * latent_dim
        self.classifier = MLP([width, *hidden, n_views], "softmax",
                              np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, 0))))
        self.regressor = MLP([width, *hidden, 2], "identity",
                             np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, 1))))
        self.optimizer = Adam(self.params(), lr=learning_rate)
        self._cache = None

    def reweight(self, z: np.ndarray, u_hat: np.ndarray) -> np.ndarray:
        """Scale latent block ``k`` by ``u_hat[:, k]``."""
        return z * np.repeat(u_hat, self.latent_dim, axis=1)

    def forward(self, z: np.ndarray, u_hat: np.ndarray | None = None) -> Stage2Output:
        """Run both heads. ``u_hat`` overrides the classifier output when given."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[1] != self.n_views * self.latent_dim:
            raise ValueError(f"latent width {z.shape[1]} != {self.n_views} x {self.latent_dim}")
        forced = u_hat is not None
        u = np.atleast_2d(np.asarray(u_hat, dtype=np.float64)) if forced else self.classifier.forward(z)
        if forced:
            u = np.broadcast_to(u, (z.shape[0], self.n_views))
        z_prime = self.reweight(z, u)
        y_hat = self.regressor.forward(z_prime)
        self._cache = (z, u, forced)
        return Stage2Output(u, z_prime, y_hat)

    def backward(self, y, u_tilde, out: Stage2Output, alpha: float | None = None) -> np.ndarray:
        """Gradients of the batch-mean joint loss; returns the gradient w.r.t. ``z``."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        alpha = self.alpha if alpha is None else alpha
        z, u, forced = self._cache
        n = z.shape[0]
        g_zp = self.regressor.backward(alpha * squared_error_grad(y, out.y_hat) / n)
        g_u_blocks = np.repeat(u, self.latent_dim, axis=1)
        g_z = g_zp * g_u_blocks
        if not forced:
            g_u = (g_zp * z).reshape(n, self.n_views, self.latent_dim).sum(axis=2)
            g_u = g_u + (1 - alpha) * squared_error_grad(u_tilde, u) / n
            g_z = g_z + self.classifier.backward(g_u)
        return g_z

    def train_step(self, z, y, u_tilde) -> float:
        out = self.forward(z)
        loss = stage2_loss(y, out.y_hat, u_tilde, out.u_hat, self.alpha)
        self.backward(y, u_tilde, out)
        self.optimizer.step(self.grads())
        return float(loss.mean())

    def params(self) -> list[np.ndarray]:
        return self.classifier.params() + self.regressor.params()

    def grads(self) -> list[np.ndarray]:
        return self.classifier.grads() + self.regressor.grads()

    def state(self) -> dict[str, np.ndarray]:
        return {**self.classifier.state("classifier"), **self.regressor.state("regressor")}

    def load_state(self, arrays: dict) -> None:
        self.classifier.load_state("classifier", arrays)
        self.regressor.load_state("regressor", arrays)


def stage2_forward(model: Stage2Model, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    out = model.forward(z)
    return out.u_hat, out.z_prime, out.y_hat


def stage2_loss(y, y_hat, u_tilde, u_hat, alpha: float) -> np.ndarray:
    """Per-row ``alpha * regression + (1 - alpha) * classification`` squared errors."""
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie strictly between 0 and 1")
    return alpha * squared_error(y, y_hat) + (1 - alpha) * squared_error(u_tilde, u_hat)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


class VSDLRegressor(RegressorMixin, BaseEstimator):
    """Two-stage view-selective regressor.

    Parameters
    ----------
    view_columns : list of index arrays, optional
        Columns of ``X`` forming each view; columns may be shared between
        views. Defaults to a single view holding every column.
    latent_dim : int
        Latent width per view.
    alpha : float
        Weight of the regression loss against the view-classification loss
        in stage 2, in (0, 1).
    hidden : tuple of int
        Hidden widths of every sub-network.
    stage2_latent, predict_latent : {"sampled", "mean"}
        Whether stage 2 sees reparameterised draws or posterior means during
        training and prediction.
    """

    def __init__(self, view_columns=None, latent_dim: int = 120, alpha: float = 0.5, hidden=(256, 128),
                 stage1_epochs: int = 30, stage2_epochs: int = 30, batch_size: int = 32,
                 learning_rate: float = 1e-3, kl_weight: float = 1e-5, stage2_latent: str = "mean",
                 predict_latent: str = "mean", random_state: int = 0):
        self.view_columns = view_columns
        self.latent_dim = latent_dim
        self.alpha = alpha
        self.hidden = hidden
        self.stage1_epochs = stage1_epochs
        self.stage2_epochs = stage2_epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.kl_weight = kl_weight
        self.stage2_latent = stage2_latent
        self.predict_latent = predict_latent
        self.random_state = random_state

    def _columns(self, n_features: int) -> list[np.ndarray]:
        if self.view_columns is None:
            return [np.arange(n_features)]
        cols = [np.asarray(c, dtype=np.int64) for c in self.view_columns]
        for k, c in enumerate(cols):
            if c.size == 0 or c.min() < 0 or c.max() >= n_features:
                raise ConfigError(f"view {k + 1} columns fall outside the {n_features} input features")
        return cols

    def _split(self, X) -> list[np.ndarray]:
        return [X[:, c] for c in self.columns_]

    def _validate_params(self):
        if self.stage2_latent not in LATENT_MODES or self.predict_latent not in LATENT_MODES:
            raise ConfigError(f"latent modes must be one of {LATENT_MODES}")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if self.latent_dim < 1 or self.batch_size < 1:
            raise ConfigError("latent_dim and batch_size must be >= 1")

    def _check_fit_inputs(self, X, y, view_labels):
        self._validate_params()
        X, y = check_X_y(X, y, multi_output=True, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] != 2:
            raise ConfigError("targets must be (n, 2) coordinates")
        K = len(self._columns(X.shape[1]))
        u = np.ones((X.shape[0], K)) if view_labels is None else check_array(view_labels, dtype=np.float64)
        if u.shape != (X.shape[0], K) or not np.isin(u, (0, 1)).all():
            raise ConfigError(f"view_labels must be a binary ({X.shape[0]}, {K}) matrix")
        return X, y, u

    def fit(self, X, y, view_labels=None):
        """Train stage 1 to completion, freeze it, then train stage 2.

        ``view_labels`` is the binary ``(n, K)`` informativeness matrix; when
        omitted every view counts as informative.
        """
        X, y, u = self._check_fit_inputs(X, y, view_labels)
        self.n_features_in_ = X.shape[1]
        self.columns_ = self._columns(X.shape[1])
        K = len(self.columns_)
        for k in range(K):
            if not (u[:, k] == 1).any():
                raise ConfigError(f"view {k + 1} has no informative training samples")
        seed = self.random_state
        xv = self._split(X)

        self.stage1_ = Stage1Model([c.size for c in self.columns_], self.latent_dim, self.hidden, seed, self.learning_rate)
        self.stage1_history_ = [[] for _ in range(K)]
        for k, net in enumerate(self.stage1_.views):
            rows = np.flatnonzero(u[:, k] == 1)
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, k)))
            opt = self.stage1_.optimizers[k]
            for _ in range(self.stage1_epochs):
                for b in _batches(rows.size, self.batch_size, rng):
                    idx = rows[b]
                    eps = rng.standard_normal((idx.size, self.latent_dim))
                    self.stage1_history_[k].append(net.loss_and_grads(xv[k][idx], y[idx], eps, self.kl_weight))
                    opt.step(net.grads())
        return self._fit_stage2(xv, y, u)

    def fit_stage2(self, X, y, view_labels=None):
        """Retrain stage 2 from scratch on top of the frozen stage-1 networks.

        Useful for sweeping ``alpha`` without repeating stage 1: ``set_params``
        then call this.
        """
        check_is_fitted(self, "stage1_")
        X, y, u = self._check_fit_inputs(X, y, view_labels)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self._fit_stage2(self._split(X), y, u)

    def _fit_stage2(self, xv, y, u):
        u_tilde = normalize_view_label(u)
        seed = self.random_state
        self.stage2_ = Stage2Model(len(xv), self.latent_dim, self.hidden, self.alpha, seed, self.learning_rate)
        mu, log_var = self.stage1_.latent_params(xv)
        sigma = np.exp(0.5 * log_var)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4,)))
        self.stage2_history_ = []
        for _ in range(self.stage2_epochs):
            for b in _batches(y.shape[0], self.batch_size, rng):
                z = mu[b]
                if self.stage2_latent == "sampled":
                    z = z + sigma[b] * rng.standard_normal(z.shape)
                self.stage2_history_.append(self.stage2_.train_step(z, y[b], u_tilde[b]))
        return self

    def transform(self, X) -> np.ndarray:
        """Concatenated per-view latents in ``predict_latent`` mode."""
        check_is_fitted(self, "stage2_")
        X = check_array(X, dtype=np.float64)
        rng = np.random.default_rng(np.random.SeedSequence(self.random_state, spawn_key=(5,)))
        return self.stage1_.extract_latents(self._split(X), self.predict_latent, rng)

    def forward(self, X) -> Stage2Output:
        return self.stage2_.forward(self.transform(X))

    def predict(self, X) -> np.ndarray:
        return self.forward(X).y_hat

    def predict_views(self, X) -> np.ndarray:
        """Dominant-view weights ``u_hat`` per sample."""
        return self.forward(X).u_hat

    def get_state(self) -> dict[str, np.ndarray]:
        check_is_fitted(self, "stage2_")
        return {"stage1": self.stage1_.state(), "stage2": self.stage2_.state()}

    def set_state(self, n_features: int, state: dict) -> "VSDLRegressor":
        """Rebuild fitted networks from saved arrays (inverse of :meth:`get_state`)."""
        self._validate_params()
        self.n_features_in_ = n_features
        self.columns_ = self._columns(n_features)
        self.stage1_ = Stage1Model([c.size for c in self.columns_], self.latent_dim, self.hidden, self.random_state,
                                   self.learning_rate)
        self.stage1_.load_state(state["stage1"])
        self.stage2_ = Stage2Model(len(self.columns_), self.latent_dim, self.hidden, self.alpha, self.random_state,
                                   self.learning_rate)
        self.stage2_.load_state(state["stage2"])
        return self
