"""Layer specifications and whole-network forward/backward passes.

A :class:`NetworkSpec` is a plain description (an ordered tuple of layer
specs plus input shape and class count). Parameters live in a flat
``dict[str, ndarray]`` keyed ``"<layer index>.<name>"`` and batch-norm
running statistics in a separate ``state`` dict of
:class:`~backdoorlab.nn.functional.BatchNormState`, so the optimizer only ever
sees trainable tensors.
"""
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from . import functional as F


def _as_pair(v, what):
    if isinstance(v, (tuple, list)):
        pair = tuple(int(a) for a in v)
    else:
        pair = (int(v), int(v))
    if len(pair) != 2 or min(pair) < 1:
        raise ValueError(f"{what} must be >= 1, got {v!r}")
    return pair


@dataclass(frozen=True)
class Conv2D:
    out_channels: int
    kernel: tuple = (3, 3)
    stride: int = 1
    padding: object = "valid"  # "valid", "same", int or (ph, pw)

    def __post_init__(self):
        object.__setattr__(self, "kernel", _as_pair(self.kernel, "kernel"))
        if self.out_channels < 1 or self.stride < 1:
            raise ValueError("out_channels and stride must be >= 1")

    def pad_amount(self):
        if self.padding == "valid":
            return (0, 0)
        if self.padding == "same":
            if self.stride != 1 or self.kernel[0] % 2 == 0 or self.kernel[1] % 2 == 0:
                raise ValueError("'same' padding needs stride 1 and odd kernels")
            return ((self.kernel[0] - 1) // 2, (self.kernel[1] - 1) // 2)
        if isinstance(self.padding, (tuple, list)):
            return tuple(int(p) for p in self.padding)
        return (int(self.padding), int(self.padding))

    def output_shape(self, shape, index):
        if len(shape) != 3:
            raise ShapeError(f"conv needs an H x W x C input, got {shape}", layer=index)
        h, w, _ = shape
        ph, pw = self.pad_amount()
        kh, kw = self.kernel
        oh = F.conv_output_size(h, kh, self.stride, ph)
        ow = F.conv_output_size(w, kw, self.stride, pw)
        if oh < 1 or ow < 1:
            raise ShapeError(f"kernel {kh}x{kw} does not fit {h}x{w}", layer=index,
                             expected=self.kernel, got=(h, w))
        return (oh, ow, self.out_channels)

    def param_shapes(self, shape):
        kh, kw = self.kernel
        return {"weight": (kh, kw, shape[2], self.out_channels), "bias": (self.out_channels,)}

    def forward(self, x, p, ctx):
        return F.conv2d_forward(x, p["weight"], p["bias"], self.stride, self.pad_amount(),
                                layer=ctx.index)

    def backward(self, g, p, cache, ctx):
        gx, gw, gb = F.conv2d_backward(g, cache, p["weight"], need_input_grad=ctx.need_input_grad)
        return gx, {"weight": gw, "bias": gb}


@dataclass(frozen=True)
class MaxPool2D:
    kernel: tuple = (2, 2)
    stride: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kernel", _as_pair(self.kernel, "kernel"))
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def output_shape(self, shape, index):
        h, w, c = shape
        kh, kw = self.kernel
        if kh > h or kw > w:
            raise ShapeError(f"pool kernel {kh}x{kw} larger than input {h}x{w}", layer=index,
                             expected=self.kernel, got=(h, w))
        return ((h - kh) // self.stride + 1, (w - kw) // self.stride + 1, c)

    def param_shapes(self, shape):
        return {}

    def forward(self, x, p, ctx):
        out, argmax = F.maxpool_forward(x, self.kernel, self.stride, layer=ctx.index)
        return out, (argmax, x.shape)

    def backward(self, g, p, cache, ctx):
        argmax, shape = cache
        return F.maxpool_backward(g, argmax, shape, self.kernel, self.stride), {}


@dataclass(frozen=True)
class BatchNorm:
    momentum: float = 0.99
    epsilon: float = 1e-3

    def __post_init__(self):
        if not 0 < self.momentum <= 1:
            raise ValueError(f"momentum must be in (0, 1], got {self.momentum}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def output_shape(self, shape, index):
        return shape

    def param_shapes(self, shape):
        return {"scale": (shape[-1],), "shift": (shape[-1],)}

    def forward(self, x, p, ctx):
        return F.batchnorm_forward(x, p["scale"], p["shift"], ctx.state[ctx.index], ctx.mode,
                                   layer=ctx.index)

    def backward(self, g, p, cache, ctx):
        gx, gs, gb = F.batchnorm_backward(g, cache)
        return gx, {"scale": gs, "shift": gb}


@dataclass(frozen=True)
class Dense:
    out_features: int

    def __post_init__(self):
        if self.out_features < 1:
            raise ValueError("out_features must be >= 1")

    def output_shape(self, shape, index):
        if len(shape) != 1:
            raise ShapeError(f"dense needs a flat input, got {shape}; add Flatten first",
                             layer=index, got=shape)
        return (self.out_features,)

    def param_shapes(self, shape):
        return {"weight": (shape[0], self.out_features), "bias": (self.out_features,)}

    def forward(self, x, p, ctx):
        return F.dense_forward(x, p["weight"], p["bias"], layer=ctx.index)

    def backward(self, g, p, cache, ctx):
        gx, gw, gb = F.dense_backward(g, cache, p["weight"])
        return gx, {"weight": gw, "bias": gb}


@dataclass(frozen=True)
class Dropout:
    rate: float

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")

    def output_shape(self, shape, index):
        return shape

    def param_shapes(self, shape):
        return {}

    def forward(self, x, p, ctx):
        return F.dropout_forward(x, self.rate, ctx.rng, ctx.mode)

    def backward(self, g, p, cache, ctx):
        return F.dropout_backward(g, cache), {}


@dataclass(frozen=True)
class ReLU:
    def output_shape(self, shape, index):
        return shape

    def param_shapes(self, shape):
        return {}

    def forward(self, x, p, ctx):
        return F.relu_forward(x)

    def backward(self, g, p, cache, ctx):
        return F.relu_backward(g, cache), {}


@dataclass(frozen=True)
class Flatten:
    def output_shape(self, shape, index):
        return (int(np.prod(shape)),)

    def param_shapes(self, shape):
        return {}

    def forward(self, x, p, ctx):
        return F.flatten_forward(x)

    def backward(self, g, p, cache, ctx):
        return F.flatten_backward(g, cache), {}


LAYER_TYPES = {cls.__name__: cls for cls in (Conv2D, MaxPool2D, BatchNorm, Dense, Dropout, ReLU, Flatten)}


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: tuple
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        shapes = self.shapes()
        if shapes[-1] != (self.num_classes,):
            raise ShapeError(f"network output {shapes[-1]} is not a {self.num_classes}-logit vector",
                             layer=len(self.layers) - 1, expected=(self.num_classes,), got=shapes[-1])

    def shapes(self):
        """Per-layer output shapes (without batch axis), input shape first."""
        shapes = [self.input_shape]
        for i, layer in enumerate(self.layers):
            shapes.append(tuple(layer.output_shape(shapes[-1], i)))
        return shapes

    def param_shapes(self):
        out = {}
        for i, (layer, shape) in enumerate(zip(self.layers, self.shapes())):
            for name, s in layer.param_shapes(shape).items():
                out[f"{i}.{name}"] = tuple(s)
        return out

    def count_params(self):
        return sum(int(np.prod(s)) for s in self.param_shapes().values())


def init_params(spec, rng, dtype=np.float32):
    """He-uniform weights, zero biases, unit scale / zero shift for batch norm."""
    params = {}
    shapes = spec.shapes()
    for i, layer in enumerate(spec.layers):
        for name, shape in layer.param_shapes(shapes[i]).items():
            if name == "weight":
                fan_in = int(np.prod(shape[:-1]))
                limit = np.sqrt(6.0 / fan_in)
                value = rng.uniform(-limit, limit, size=shape)
            elif name == "scale":
                value = np.ones(shape)
            else:
                value = np.zeros(shape)
            params[f"{i}.{name}"] = value.astype(dtype)
    return params


def init_state(spec, dtype=np.float32):
    """Fresh running statistics for each batch-norm layer, keyed by layer index."""
    shapes = spec.shapes()
    return {
        i: F.BatchNormState.fresh(shapes[i][-1], layer.momentum, layer.epsilon, dtype)
        for i, layer in enumerate(spec.layers)
        if isinstance(layer, BatchNorm)
    }


@dataclass
class _Context:
    mode: str
    state: dict
    rng: object
    index: int = 0
    need_input_grad: bool = True


@dataclass
class Tape:
    """Whatever the forward pass cached, in layer order, for the backward pass."""

    caches: list = field(default_factory=list)
    mode: str = "eval"


def _layer_params(params, index, layer, shape):
    return {name: params[f"{index}.{name}"] for name in layer.param_shapes(shape)}


def network_forward(spec, params, x, mode="eval", state=None, rng=None):
    """Run ``x`` (N, H, W, C) through the network; return ``(logits, tape)``.

    Train mode uses batch statistics (updating ``state`` in place) and needs
    ``rng`` when the network contains dropout.
    """
    if x.ndim != 4 or tuple(x.shape[1:]) != spec.input_shape:
        raise ShapeError(f"input batch shape {x.shape[1:]} != network input {spec.input_shape}",
                         expected=spec.input_shape, got=tuple(x.shape[1:]))
    if state is None:
        if any(isinstance(layer, BatchNorm) for layer in spec.layers):
            raise ValueError("network has batch norm layers; pass state")
        state = {}
    ctx = _Context(mode, state, rng)
    shapes = spec.shapes()
    tape = Tape(mode=mode)
    for i, layer in enumerate(spec.layers):
        ctx.index = i
        x, cache = layer.forward(x, _layer_params(params, i, layer, shapes[i]), ctx)
        tape.caches.append(cache)
    return x, tape


def network_backward(spec, params, tape, grad_logits, input_grad=False):
    """Backpropagate ``grad_logits`` through the tape; return parameter gradients.

    With ``input_grad=True`` returns ``(grads, grad_input)`` instead.
    """
    ctx = _Context(tape.mode, {}, None)
    shapes = spec.shapes()
    grads = {}
    g = grad_logits
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        ctx.index = i
        ctx.need_input_grad = input_grad or i > 0
        g, layer_grads = layer.backward(g, _layer_params(params, i, layer, shapes[i]),
                                        tape.caches[i], ctx)
        for name, value in layer_grads.items():
            grads[f"{i}.{name}"] = value
    ordered = {key: grads[key] for key in params}
    return (ordered, g) if input_grad else ordered
