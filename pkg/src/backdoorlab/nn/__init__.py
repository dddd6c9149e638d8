"""Minimal NHWC CNN engine: layer kernels, networks, Adam and gradient checks."""
from .functional import (
    BatchNormState,
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    flatten_backward,
    flatten_forward,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_cross_entropy,
)
from .gradcheck import GradCheckResult, gradient_check
from .network import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2D,
    NetworkSpec,
    ReLU,
    Tape,
    init_params,
    init_state,
    network_backward,
    network_forward,
)
from .optim import AdamState, adam_step

__all__ = [
    "AdamState", "BatchNorm", "BatchNormState", "Conv2D", "Dense", "Dropout", "Flatten",
    "GradCheckResult", "MaxPool2D", "NetworkSpec", "ReLU", "Tape", "adam_step",
    "batchnorm_backward", "batchnorm_forward", "conv2d_backward", "conv2d_forward",
    "dense_backward", "dense_forward", "dropout_backward", "dropout_forward",
    "flatten_backward", "flatten_forward", "gradient_check", "init_params", "init_state",
    "maxpool_backward", "maxpool_forward", "network_backward", "network_forward",
    "relu_backward", "relu_forward", "softmax", "softmax_cross_entropy",
]
