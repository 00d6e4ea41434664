from typing import Dict

import numpy as np

from ..core.tensor import Tensor
from ..data_types import TrainConfig


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """
    Step decay: lr * factor ** floor(epoch / every), epochs counted from 0.
    """
    return float(cfg.lr * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every))


class SGD:
    """
    Plain SGD, w <- w - lr * g, with optional momentum and L2 weight decay
    (both 0 in the default protocol).
    """

    def __init__(self, lr: float, momentum: float = 0.0, weight_decay: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._velocity: Dict[str, Tensor] = {}

    def step(self, params: Dict[str, Tensor], grads: Dict[str, Tensor]) -> None:
        for name, param in params.items():
            grad = grads.get(name)
            if grad is None:
                continue
            if self.weight_decay:
                grad = grad + self.weight_decay * param
            if self.momentum:
                velocity = self._velocity.setdefault(name, np.zeros_like(param))
                velocity *= self.momentum
                velocity += grad
                grad = velocity
            param -= (self.lr * grad).astype(param.dtype, copy=False)
