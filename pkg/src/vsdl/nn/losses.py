"""Losses and their gradients. Per-sample values; callers average over the batch."""
from __future__ import annotations

import numpy as np


def squared_error(y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    """Per-row squared Euclidean distance."""
    return np.sum((np.asarray(y_hat) - np.asarray(y)) ** 2, axis=-1)


def squared_error_grad(y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    return 2.0 * (np.asarray(y_hat) - np.asarray(y))


def kl_diag_gaussian(mu, sigma) -> float:
    """KL divergence of ``N(mu, diag(sigma^2))`` from the standard normal."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    var = sigma**2
    return float(0.5 * np.sum(mu**2 + var - np.log(var) - 1.0))


def kl_log_var(mu: np.ndarray, log_var: np.ndarray) -> np.ndarray:
    """Per-row KL in terms of log-variance."""
    return 0.5 * np.sum(mu**2 + np.exp(log_var) - log_var - 1.0, axis=-1)


def kl_log_var_grad(mu: np.ndarray, log_var: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return mu, 0.5 * (np.exp(log_var) - 1.0)
