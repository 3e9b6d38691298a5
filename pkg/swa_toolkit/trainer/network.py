"""Rectifier MLP with optional batch-norm: parameters, forward pass and gradients.

Tensor naming (these names are also the checkpoint tensor names):

    layers.<i>.weight        (fan_in, fan_out)
    layers.<i>.bias          (fan_out,)
    bn.<i>.gamma / beta      scale and shift of hidden layer i
    bn.<i>.running_mean      (fan_out,)
    bn.<i>.running_var       (fan_out,)
    bn.<i>.num_batches       scalar count of batches folded into the running stats

Layers ``0 .. len(hidden_dims) - 1`` are hidden; the last layer emits logits.
"""

from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from swa_toolkit.errors import DatasetError, IncompatibleCheckpointsError, NumericError
from swa_toolkit.seeding import Stream, make_rng
from swa_toolkit.tensor_store import Checkpoint
from swa_toolkit.trainer.models import ModelSpec

Array = NDArray[np.float64]


class Mode(str, Enum):
    """Forward-pass modes; only batch-norm behaves differently."""

    TRAIN = "train"
    EVAL = "eval"


def weight_name(layer: int) -> str:
    return f"layers.{layer}.weight"


def bias_name(layer: int) -> str:
    return f"layers.{layer}.bias"


def bn_name(layer: int, part: str) -> str:
    return f"bn.{layer}.{part}"


BN_TRAINABLE = ("gamma", "beta")
BN_BUFFERS = ("running_mean", "running_var", "num_batches")


@dataclass
class Parameters:
    """Model tensors plus SGD momentum buffers.

    Attributes:
        spec: Architecture the tensors belong to.
        tensors: Every model tensor by name (weights, biases, BN state).
        momentum: One buffer per trainable tensor, zero-initialized.
    """

    spec: ModelSpec
    tensors: dict[str, Array]
    momentum: dict[str, Array] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.trainable_names():
            self.momentum.setdefault(name, np.zeros_like(self.tensors[name]))

    @classmethod
    def initialize(cls, spec: ModelSpec, seed: int) -> "Parameters":
        """He-normal weights, zero biases, identity batch-norm."""
        rng = make_rng(seed, Stream.INIT)
        tensors: dict[str, Array] = {}
        for layer, (fan_in, fan_out) in enumerate(spec.layer_dims):
            tensors[weight_name(layer)] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            tensors[bias_name(layer)] = np.zeros(fan_out)
        cls._add_batchnorm(spec, tensors)
        return cls(spec, tensors)

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "Parameters":
        """All weights and biases zero."""
        tensors: dict[str, Array] = {}
        for layer, (fan_in, fan_out) in enumerate(spec.layer_dims):
            tensors[weight_name(layer)] = np.zeros((fan_in, fan_out))
            tensors[bias_name(layer)] = np.zeros(fan_out)
        cls._add_batchnorm(spec, tensors)
        return cls(spec, tensors)

    @staticmethod
    def _add_batchnorm(spec: ModelSpec, tensors: dict[str, Array]) -> None:
        if not spec.use_batchnorm:
            return
        for layer, width in enumerate(spec.hidden_dims):
            tensors[bn_name(layer, "gamma")] = np.ones(width)
            tensors[bn_name(layer, "beta")] = np.zeros(width)
            tensors[bn_name(layer, "running_mean")] = np.zeros(width)
            tensors[bn_name(layer, "running_var")] = np.ones(width)
            tensors[bn_name(layer, "num_batches")] = np.zeros(())

    @property
    def bn_layers(self) -> range:
        return range(len(self.spec.hidden_dims)) if self.spec.use_batchnorm else range(0)

    def trainable_names(self) -> list[str]:
        """Weights, biases, gamma and beta; running statistics excluded."""
        names = []
        for layer in range(len(self.spec.layer_dims)):
            names += [weight_name(layer), bias_name(layer)]
        for layer in self.bn_layers:
            names += [bn_name(layer, part) for part in BN_TRAINABLE]
        return names

    def copy(self) -> "Parameters":
        return Parameters(
            self.spec,
            {k: v.copy() for k, v in self.tensors.items()},
            {k: v.copy() for k, v in self.momentum.items()},
        )

    def to_checkpoint(self, metadata: Mapping[str, str] | None = None) -> Checkpoint:
        """Model tensors only; momentum buffers are not part of a checkpoint."""
        return Checkpoint.from_arrays(self.tensors, metadata)

    @classmethod
    def from_checkpoint(cls, spec: ModelSpec, ckpt: Checkpoint) -> "Parameters":
        """Load tensors for ``spec`` from a checkpoint, widening to float64.

        Momentum buffers start at zero.

        Raises:
            IncompatibleCheckpointsError: If names or shapes do not fit ``spec``.
        """
        template = cls.zeros(spec)
        expected = set(template.tensors)
        offending = sorted(expected ^ set(ckpt.names()))
        offending += sorted(
            name
            for name in expected & set(ckpt.names())
            if ckpt[name].shape != template.tensors[name].shape
        )
        if offending:
            raise IncompatibleCheckpointsError("Checkpoint does not fit the model", names=offending)
        tensors = {name: ckpt[name].data.astype(np.float64) for name in template.tensors}
        return cls(spec, tensors)


@dataclass(frozen=True)
class BatchStats:
    """Per-feature mean and biased variance of one BN layer's input."""

    mean: Array
    var: Array


@dataclass
class _LayerCache:
    inputs: Array
    pre_activation: Array
    xhat: Array | None = None
    inv_std: Array | None = None


def _check_finite(values: Array, layer: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericError("Non-finite activations", layer=layer)


def _check_inputs(params: Parameters, x: Array) -> None:
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise DatasetError(f"Batch of shape {x.shape} does not match input_dim {params.spec.input_dim}")


def hidden_preactivations(params: Parameters, x: Array, layer: int) -> Array:
    """Eval-mode pre-activations ``z`` feeding hidden layer ``layer``'s batch-norm."""
    _check_inputs(params, x)
    h = np.asarray(x, dtype=np.float64)
    for current in range(layer + 1):
        z = h @ params.tensors[weight_name(current)] + params.tensors[bias_name(current)]
        if current == layer:
            return z
        h = np.maximum(_normalize_eval(params, current, z), 0.0)
    raise ValueError(f"No hidden layer {layer}")


def _normalize_eval(params: Parameters, layer: int, z: Array) -> Array:
    if not params.spec.use_batchnorm:
        return z
    t = params.tensors
    inv_std = 1.0 / np.sqrt(t[bn_name(layer, "running_var")] + params.spec.bn_eps)
    xhat = (z - t[bn_name(layer, "running_mean")]) * inv_std
    return t[bn_name(layer, "gamma")] * xhat + t[bn_name(layer, "beta")]


def _forward(
    params: Parameters, x: Array, mode: Mode
) -> tuple[Array, dict[int, BatchStats], list[_LayerCache]]:
    _check_inputs(params, x)
    spec = params.spec
    t = params.tensors
    train_bn = mode == Mode.TRAIN and spec.use_batchnorm
    if train_bn and x.shape[0] < 2:
        raise NumericError("Batch-norm variance is undefined for batches smaller than 2")

    stats: dict[int, BatchStats] = {}
    caches: list[_LayerCache] = []
    h = np.asarray(x, dtype=np.float64)
    n_hidden = len(spec.hidden_dims)
    for layer in range(n_hidden):
        z = h @ t[weight_name(layer)] + t[bias_name(layer)]
        cache = _LayerCache(inputs=h, pre_activation=z)
        if train_bn:
            mean = z.mean(axis=0)
            var = z.var(axis=0)
            stats[layer] = BatchStats(mean, var)
            cache.inv_std = 1.0 / np.sqrt(var + spec.bn_eps)
            cache.xhat = (z - mean) * cache.inv_std
            cache.pre_activation = t[bn_name(layer, "gamma")] * cache.xhat + t[bn_name(layer, "beta")]
        elif spec.use_batchnorm:
            cache.pre_activation = _normalize_eval(params, layer, z)
        h = np.maximum(cache.pre_activation, 0.0)
        _check_finite(h, weight_name(layer))
        caches.append(cache)

    logits = h @ t[weight_name(n_hidden)] + t[bias_name(n_hidden)]
    _check_finite(logits, weight_name(n_hidden))
    caches.append(_LayerCache(inputs=h, pre_activation=logits))
    return logits, stats, caches


def forward(params: Parameters, x: Array, mode: Mode = Mode.EVAL) -> tuple[Array, dict[int, BatchStats]]:
    """Logits ``(batch, output_dim)`` and, in train mode, the BN batch statistics used.

    Train mode normalizes each BN layer with the batch mean and biased
    variance; eval mode uses the stored running statistics.

    Raises:
        NumericError: For train-mode batch-norm on fewer than 2 samples, or
            non-finite activations (naming the layer).
    """
    logits, stats, _ = _forward(params, x, mode)
    return logits, stats


def cross_entropy(logits: Array, labels: NDArray[np.int64]) -> tuple[float, Array]:
    """Mean softmax cross-entropy and the softmax probabilities."""
    n_classes = logits.shape[1]
    if labels.shape != (logits.shape[0],) or np.any(labels < 0) or np.any(labels >= n_classes):
        raise DatasetError(f"Labels must be a vector of class indices in [0, {n_classes})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    loss = -float(log_probs[np.arange(len(labels)), labels].mean())
    return loss, np.exp(log_probs)


def loss_grad_and_stats(
    params: Parameters, x: Array, labels: NDArray[np.int64]
) -> tuple[float, dict[str, Array], dict[int, BatchStats]]:
    """Train-mode loss, gradients of every trainable tensor, and BN batch statistics."""
    spec = params.spec
    t = params.tensors
    logits, stats, caches = _forward(params, x, Mode.TRAIN)
    loss, probs = cross_entropy(logits, labels)
    if not np.isfinite(loss):
        raise NumericError("Non-finite loss", layer=weight_name(len(spec.hidden_dims)))

    batch = x.shape[0]
    delta = probs
    delta[np.arange(batch), labels] -= 1.0
    delta /= batch

    grads: dict[str, Array] = {}
    out_layer = len(spec.hidden_dims)
    grads[weight_name(out_layer)] = caches[out_layer].inputs.T @ delta
    grads[bias_name(out_layer)] = delta.sum(axis=0)
    upstream = delta @ t[weight_name(out_layer)].T

    for layer in reversed(range(out_layer)):
        cache = caches[layer]
        d_pre = upstream * (cache.pre_activation > 0.0)
        if spec.use_batchnorm:
            assert cache.xhat is not None and cache.inv_std is not None
            grads[bn_name(layer, "gamma")] = (d_pre * cache.xhat).sum(axis=0)
            grads[bn_name(layer, "beta")] = d_pre.sum(axis=0)
            d_xhat = d_pre * t[bn_name(layer, "gamma")]
            d_z = cache.inv_std * (
                d_xhat - d_xhat.mean(axis=0) - cache.xhat * (d_xhat * cache.xhat).mean(axis=0)
            )
        else:
            d_z = d_pre
        grads[weight_name(layer)] = cache.inputs.T @ d_z
        grads[bias_name(layer)] = d_z.sum(axis=0)
        if layer > 0:
            upstream = d_z @ t[weight_name(layer)].T

    return loss, grads, stats


def loss_and_grad(params: Parameters, x: Array, labels: NDArray[np.int64]) -> tuple[float, dict[str, Array]]:
    """Mean cross-entropy over the batch and its gradient for every trainable tensor.

    Running statistics get no gradient.
    """
    loss, grads, _ = loss_grad_and_stats(params, x, labels)
    return loss, grads
