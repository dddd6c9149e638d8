"""The two attacked networks: a small VGG-style MNIST CNN and LeNet-5."""
from ..errors import ConfigError
from ..nn.network import BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool2D, NetworkSpec, ReLU

MNIST_CNN = "mnist_cnn"
LENET5 = "lenet5"
ARCHITECTURES = (MNIST_CNN, LENET5)


def _normalize_id(arch):
    key = str(arch).lower().replace("-", "_")
    aliases = {"mnistcnn": MNIST_CNN, "mnist_cnn": MNIST_CNN, "lenet5": LENET5, "lenet_5": LENET5}
    if key not in aliases:
        raise ConfigError(f"unknown architecture {arch!r}; choose one of {ARCHITECTURES}")
    return aliases[key]


def mnist_cnn(input_shape=(28, 28, 1), num_classes=10, conv_widths=(32, 64), dense_width=512,
              dropout=0.2, pool_stride=2, bn_momentum=0.99, bn_epsilon=1e-3):
    """Two conv blocks of two 3x3 convs each, then Dense-ReLU-Dropout-Dense.

    Every conv is followed by ReLU and then batch norm; each block ends in a
    2x2 max pool.
    """
    layers = []
    for width in conv_widths:
        for _ in range(2):
            layers += [Conv2D(width, (3, 3), 1, "same"), ReLU(), BatchNorm(bn_momentum, bn_epsilon)]
        layers.append(MaxPool2D((2, 2), pool_stride))
    layers += [Flatten(), Dense(dense_width), ReLU(), Dropout(dropout), Dense(num_classes)]
    return NetworkSpec(layers, input_shape, num_classes)


def lenet5(input_shape=(32, 32, 3), num_classes=43, conv_widths=(6, 16), dense_widths=(120, 84)):
    layers = []
    for width in conv_widths:
        layers += [Conv2D(width, (5, 5), 1, "valid"), ReLU(), MaxPool2D((2, 2), 2)]
    layers.append(Flatten())
    for width in dense_widths:
        layers += [Dense(width), ReLU()]
    layers.append(Dense(num_classes))
    return NetworkSpec(layers, input_shape, num_classes)


def build_architecture(arch, input_shape=None, num_classes=None, **widths):
    """Build a :class:`NetworkSpec` by name.

    ``widths`` are forwarded to the builder, e.g. ``conv_widths=(8, 16)`` for
    reduced networks used in gradient checks.
    """
    arch = _normalize_id(arch)
    if arch == MNIST_CNN:
        input_shape = tuple(input_shape or (28, 28, 1))
        num_classes = 10 if num_classes is None else num_classes
        return mnist_cnn(input_shape, num_classes, **widths)
    input_shape = tuple(input_shape or (32, 32, 3))
    if num_classes is None:
        raise ConfigError("lenet5 needs an explicit num_classes")
    return lenet5(input_shape, num_classes, **widths)
