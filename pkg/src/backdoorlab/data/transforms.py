"""Pixel-level image transforms: resizing, scaling to [0, 1], augmentation.

Images are uint8 arrays shaped (H, W) or (H, W, C).
"""
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


def _round_u8(values):
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def _bilinear_sample(image, rows, cols):
    """Sample ``image`` (H, W, C) at float coordinates; outside pixels read as 0."""
    h, w = image.shape[:2]
    padded = np.zeros((h + 2, w + 2, image.shape[2]), dtype=np.float64)
    padded[1:-1, 1:-1] = image
    r = np.clip(rows + 1.0, 0.0, h + 1.0)
    c = np.clip(cols + 1.0, 0.0, w + 1.0)
    r0 = np.minimum(np.floor(r).astype(np.int64), h)
    c0 = np.minimum(np.floor(c).astype(np.int64), w)
    fr = (r - r0)[..., None]
    fc = (c - c0)[..., None]
    top = padded[r0, c0] * (1 - fc) + padded[r0, c0 + 1] * fc
    bottom = padded[r0 + 1, c0] * (1 - fc) + padded[r0 + 1, c0 + 1] * fc
    return top * (1 - fr) + bottom * fr


def resize_bilinear(image, out_h, out_w):
    """Corner-aligned bilinear resize, rounded to the nearest uint8 value."""
    image = np.asarray(image)
    squeeze = image.ndim == 2
    img = image[:, :, None] if squeeze else image
    h, w = img.shape[:2]
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    ys = np.arange(out_h) * (h - 1) / (out_h - 1) if out_h > 1 else np.zeros(1)
    xs = np.arange(out_w) * (w - 1) / (out_w - 1) if out_w > 1 else np.zeros(1)
    rows, cols = np.meshgrid(ys, xs, indexing="ij")
    out = _round_u8(_bilinear_sample(img, rows, cols))
    return out[:, :, 0] if squeeze else out


def normalize(images):
    """uint8 pixels to float32 in [0, 1]."""
    return np.asarray(images, dtype=np.float32) / np.float32(255.0)


def denormalize(values):
    return _round_u8(np.asarray(values, dtype=np.float64) * 255.0)


@dataclass(frozen=True)
class AugmentConfig:
    shift_px: int = 2
    rotation_deg: float = 10.0
    enabled: bool = False

    def __post_init__(self):
        if self.shift_px < 0 or self.rotation_deg < 0:
            raise ConfigError("shift_px and rotation_deg must be non-negative")


def shift_image(image, dx, dy):
    """Translate by whole pixels (``dx`` right, ``dy`` down), filling with zeros."""
    out = np.zeros_like(image)
    h, w = image.shape[:2]
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src_r = slice(max(0, -dy), h - max(0, dy))
    dst_r = slice(max(0, dy), h - max(0, -dy))
    src_c = slice(max(0, -dx), w - max(0, dx))
    dst_c = slice(max(0, dx), w - max(0, -dx))
    out[dst_r, dst_c] = image[src_r, src_c]
    return out


def rotate_image(image, degrees):
    """Rotate about the image centre with bilinear resampling and zero fill."""
    if degrees == 0:
        return image.copy()
    squeeze = image.ndim == 2
    img = image[:, :, None] if squeeze else image
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = np.deg2rad(degrees)
    rows, cols = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    # inverse map: output pixel -> source location
    src_r = np.cos(theta) * rows - np.sin(theta) * cols + cy
    src_c = np.sin(theta) * rows + np.cos(theta) * cols + cx
    out = _round_u8(_bilinear_sample(img, src_r, src_c))
    return out[:, :, 0] if squeeze else out


def augment(image, config, rng):
    """Random rotation then random integer shift, both drawn from ``rng``."""
    if config is None or not config.enabled:
        return image
    dx, dy = (int(v) for v in rng.integers(-config.shift_px, config.shift_px + 1, size=2))
    angle = float(rng.uniform(-config.rotation_deg, config.rotation_deg)) if config.rotation_deg else 0.0
    out = rotate_image(image, angle) if angle else image
    return shift_image(out, dx, dy)


def augment_batch(images, config, rng):
    if config is None or not config.enabled:
        return images
    return np.stack([augment(img, config, rng) for img in images])
