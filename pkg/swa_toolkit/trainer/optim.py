"""SGD with heavy-ball momentum and L2 weight decay."""

import numpy as np
from numpy.typing import NDArray

from swa_toolkit.trainer.network import Parameters


def sgd_step(
    params: Parameters,
    grads: dict[str, NDArray[np.float64]],
    lr: float,
    momentum: float,
    weight_decay: float,
) -> Parameters:
    """Apply one update in place to every trainable tensor and return ``params``.

    ``buffer = momentum * buffer + grad + weight_decay * param`` then
    ``param -= lr * buffer``. Running statistics are never touched.

    Raises:
        ValueError: If ``lr`` is not positive or a gradient is missing.
    """
    if lr <= 0:
        raise ValueError(f"Learning rate must be positive, got {lr}")
    for name in params.trainable_names():
        if name not in grads:
            raise ValueError(f"Missing gradient for {name}")
        param = params.tensors[name]
        buffer = params.momentum[name]
        buffer *= momentum
        buffer += grads[name]
        if weight_decay:
            buffer += weight_decay * param
        param -= lr * buffer
    return params
