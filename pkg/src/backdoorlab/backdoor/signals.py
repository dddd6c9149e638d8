"""Column-wise additive backdoor signals and their superimposition on images."""
import enum
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError, ShapeError


class SignalKind(str, enum.Enum):
    RAMP = "ramp"
    TRIANGLE = "triangle"
    SINUSOID = "sinusoid"


@dataclass(frozen=True)
class BackdoorSignalSpec:
    """Signal family, strength ``delta`` (pixel units) and, for sinusoids,
    the number of cycles ``frequency`` across the image width."""

    kind: SignalKind
    delta: float
    frequency: int = None

    def __post_init__(self):
        try:
            kind = SignalKind(self.kind)
        except ValueError:
            raise ConfigError(f"unknown signal kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if self.delta < 0:
            raise ConfigError(f"signal strength must be >= 0, got {self.delta}")
        if kind is SignalKind.SINUSOID:
            if self.frequency is None or int(self.frequency) != self.frequency or self.frequency < 1:
                raise ConfigError(f"sinusoid needs an integer frequency >= 1, got {self.frequency!r}")
            object.__setattr__(self, "frequency", int(self.frequency))

    def with_delta(self, delta):
        return BackdoorSignalSpec(self.kind, delta, self.frequency)

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        if d["frequency"] is None:
            del d["frequency"]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], float(d["delta"]), d.get("frequency"))


def column_profile(spec, width):
    """Signal value for columns j = 1..width (index 0 holds column 1)."""
    m = int(width)
    j = np.arange(1, m + 1, dtype=np.float64)
    delta = float(spec.delta)
    kind = SignalKind(spec.kind)
    if kind is SignalKind.RAMP:
        return j * delta / m
    if kind is SignalKind.TRIANGLE:
        return np.where(j <= m / 2, j * delta / m, (m - j) * delta / m)
    if kind is SignalKind.SINUSOID:
        return delta * np.sin(2 * np.pi * j * spec.frequency / m)
    raise ConfigError(f"unknown signal kind {spec.kind!r}")


def generate_signal(spec, height, width, channels=1):
    """Float64 signal of shape (height, width, channels), constant down columns."""
    if height < 1 or width < 1 or channels < 1:
        raise ValueError(f"signal size must be positive, got {height}x{width}x{channels}")
    profile = column_profile(spec, width)
    return np.broadcast_to(profile[None, :, None], (height, width, channels)).copy()


def superimpose(images, signal):
    """Add ``signal`` to uint8 ``images``, round to nearest and clip to [0, 255].

    Works on a single (H, W, C) image or a (N, H, W, C) stack.
    """
    images = np.asarray(images)
    signal = np.asarray(signal, dtype=np.float64)
    if images.shape[-signal.ndim:] != signal.shape:
        raise ShapeError(f"signal shape {signal.shape} does not match image shape {images.shape}",
                         expected=images.shape[-signal.ndim:], got=signal.shape)
    out = np.floor(images.astype(np.float64) + signal + 0.5)
    return np.clip(out, 0, 255).astype(np.uint8)


def signal_for(spec, image_shape):
    h, w, c = image_shape
    return generate_signal(spec, h, w, c)
