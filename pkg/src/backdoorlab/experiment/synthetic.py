"""Procedural 32x32x3 "sign" images: a coloured shape on a textured background.

Stands in for a traffic-sign dataset when none is available locally. Each
class is one shape; colour, size, position and background texture vary per
sample so the classifier has to learn the shape rather than a pixel value.
"""
import numpy as np

from ..data.dataset import LabeledDataset

SHAPES = ("disc", "square", "triangle", "cross", "ring", "diamond", "bar", "chevron")


def _shape_mask(kind, size, cy, cx, radius):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    if kind == "disc":
        return dy ** 2 + dx ** 2 <= radius ** 2
    if kind == "square":
        return (np.abs(dy) <= radius * 0.8) & (np.abs(dx) <= radius * 0.8)
    if kind == "triangle":
        return (dy <= radius * 0.7) & (dy >= -radius) & (np.abs(dx) <= (dy + radius) * 0.6)
    if kind == "cross":
        arm = radius * 0.3
        return ((np.abs(dy) <= arm) & (np.abs(dx) <= radius)) | ((np.abs(dx) <= arm) & (np.abs(dy) <= radius))
    if kind == "ring":
        r2 = dy ** 2 + dx ** 2
        return (r2 <= radius ** 2) & (r2 >= (radius * 0.55) ** 2)
    if kind == "diamond":
        return np.abs(dy) + np.abs(dx) <= radius
    if kind == "bar":
        return (np.abs(dy) <= radius * 0.35) & (np.abs(dx) <= radius)
    if kind == "chevron":
        return (np.abs(dy - np.abs(dx) * 0.8 + radius * 0.3) <= radius * 0.3) & (np.abs(dx) <= radius)
    raise ValueError(f"unknown shape {kind!r}")


def _texture(rng, size):
    # bilinear upsampling of a coarse random grid gives a smooth mottled background
    coarse = rng.uniform(0, 1, (5, 5, 3))
    idx = np.linspace(0, 4, size)
    i0 = np.minimum(idx.astype(int), 3)
    f = (idx - i0)[:, None]
    rows = coarse[i0] * (1 - f[..., None]) + coarse[i0 + 1] * f[..., None]
    out = rows[:, i0] * (1 - f.T[..., None]) + rows[:, i0 + 1] * f.T[..., None]
    return out


def make_textured_signs(per_class, num_classes=5, size=32, rng=None, noise=12.0, name="synthetic-signs"):
    """Return a :class:`LabeledDataset` of ``per_class * num_classes`` images."""
    if not 1 <= num_classes <= len(SHAPES):
        raise ValueError(f"num_classes must be in [1, {len(SHAPES)}]")
    rng = rng if rng is not None else np.random.default_rng(0)
    n = per_class * num_classes
    images = np.empty((n, size, size, 3), dtype=np.uint8)
    labels = np.repeat(np.arange(num_classes), per_class)
    for i, label in enumerate(labels):
        background = 60 + 120 * _texture(rng, size)
        colour = rng.uniform(0, 255, 3)
        radius = rng.uniform(0.25, 0.38) * size
        cy, cx = rng.uniform(0.4, 0.6, 2) * size
        mask = _shape_mask(SHAPES[label], size, cy, cx, radius)
        img = np.where(mask[..., None], colour, background)
        img += rng.normal(0, noise, img.shape)
        images[i] = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    order = rng.permutation(n)
    return LabeledDataset(images[order], labels[order], num_classes, name,
                          {"shapes": list(SHAPES[:num_classes])})
