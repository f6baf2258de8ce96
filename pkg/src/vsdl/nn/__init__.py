from .layers import Dense, MLP, GaussianLatent, dense_forward, reparameterize, softmax, softmax_backward
from .losses import squared_error, squared_error_grad, kl_diag_gaussian, kl_log_var, kl_log_var_grad
from .optim import Adam, AdamState, adam_step
from .gradcheck import numerical_gradient, relative_error

__all__ = [
    "Dense", "MLP", "GaussianLatent", "dense_forward", "reparameterize", "softmax", "softmax_backward",
    "squared_error", "squared_error_grad", "kl_diag_gaussian", "kl_log_var", "kl_log_var_grad",
    "Adam", "AdamState", "adam_step", "numerical_gradient", "relative_error",
]
