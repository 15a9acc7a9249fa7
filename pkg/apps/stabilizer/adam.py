"""
Bias-corrected Adam over a dictionary of named parameter arrays.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from apps.errors import ConfigError, ShapeMismatchError

DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


@dataclass
class AdamState:
    """
    Optimizer state.

    Attributes:
        lr (float): Learning rate, positive.
        beta1 (float): First-moment decay in (0, 1).
        beta2 (float): Second-moment decay in (0, 1).
        eps (float): Denominator floor.
        step (int): Number of updates applied so far.
        first_moment (Dict[str, np.ndarray]): Running mean of gradients.
        second_moment (Dict[str, np.ndarray]): Running mean of squared gradients.
    """

    lr: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"Adam learning rate must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"Adam {name} must lie in (0, 1), got {value}")
        if not self.eps > 0:
            raise ConfigError(f"Adam eps must be positive, got {self.eps}")

    @classmethod
    def for_params(cls, params: Dict[str, np.ndarray], **kwargs) -> "AdamState":
        """Fresh state with zero accumulators shaped like ``params``."""
        return cls(first_moment={k: np.zeros_like(v) for k, v in params.items()},
                   second_moment={k: np.zeros_like(v) for k, v in params.items()}, **kwargs)


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    Apply one Adam update.

    Args:
        params (Dict[str, np.ndarray]): Current parameters (left untouched).
        grads (Dict[str, np.ndarray]): Gradients with the same keys and shapes.
        state (AdamState): Optimizer state; accumulators are created on first use.

    Returns:
        Tuple[Dict[str, np.ndarray], AdamState]: Updated parameters and state.
    """
    if set(params) != set(grads):
        raise ShapeMismatchError(f"Parameter keys {sorted(params)} do not match gradient keys {sorted(grads)}")
    step = state.step + 1
    bias1 = 1.0 - state.beta1 ** step
    bias2 = 1.0 - state.beta2 ** step

    new_params = {}
    first = {}
    second = {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != value.shape:
            raise ShapeMismatchError(f"Gradient of {name} has shape {grad.shape}, parameter has {value.shape}")
        m = state.first_moment.get(name, np.zeros_like(value))
        v = state.second_moment.get(name, np.zeros_like(value))
        first[name] = state.beta1 * m + (1.0 - state.beta1) * grad
        second[name] = state.beta2 * v + (1.0 - state.beta2) * grad ** 2
        m_hat = first[name] / bias1
        v_hat = second[name] / bias2
        new_params[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    new_state = AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
                          step=step, first_moment=first, second_moment=second)
    return new_params, new_state
