"""Labeled image datasets: containers, loaders, splits and exporters."""
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, FormatError
from .idx import read_idx, write_idx
from .netpbm import read_netpbm, write_netpbm
from .transforms import resize_bilinear

_CLASS_DIR = re.compile(r"^class_(\d+)$")
_IMAGE_SUFFIXES = {".pgm", ".ppm", ".png"}


@dataclass
class LabeledDataset:
    """Images (N, H, W, C) uint8 with integer labels in ``[0, class_count)``."""

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        images = np.asarray(self.images)
        if images.ndim == 3:
            images = images[..., None]
        if images.ndim != 4 or min(images.shape[1:]) < 1:
            raise DataError(f"images must be (N, H, W, C), got {images.shape}")
        if images.dtype != np.uint8:
            raise DataError(f"images must be uint8, got {images.dtype}")
        labels = np.asarray(self.labels).astype(np.int64)
        if labels.shape != (images.shape[0],):
            raise DataError(f"{labels.shape[0] if labels.ndim else 0} labels for {images.shape[0]} images")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise DataError(f"labels must lie in [0, {self.class_count})")
        self.images = images
        self.labels = labels

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def image_shape(self):
        return tuple(self.images.shape[1:])

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.class_count)

    def subset(self, indices, name=None):
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.images[indices], self.labels[indices], self.class_count,
                              name or self.name, dict(self.meta))

    def replace_images(self, images, name=None):
        return LabeledDataset(images, self.labels.copy(), self.class_count, name or self.name,
                              dict(self.meta))


def partition_by_class(dataset):
    """Map each class id to the ordered list of indices carrying that label."""
    labels = dataset.labels if isinstance(dataset, LabeledDataset) else np.asarray(dataset)
    count = dataset.class_count if isinstance(dataset, LabeledDataset) else int(labels.max()) + 1
    return {c: np.flatnonzero(labels == c) for c in range(count)}


def load_mnist(images_path, labels_path, name="mnist"):
    images, kind = read_idx(images_path)
    if kind != "images":
        raise DataError(f"{images_path} holds labels, not images")
    labels, kind = read_idx(labels_path)
    if kind != "labels":
        raise DataError(f"{labels_path} holds images, not labels")
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    count = int(labels.max()) + 1 if labels.size else 10
    return LabeledDataset(images, labels, max(count, 10), name)


def load_mnist_dir(root, split="train"):
    """Load ``train`` or ``t10k`` IDX files (optionally gzipped) from ``root``."""
    prefix = "train" if split == "train" else "t10k"
    root = Path(root)

    def find(stem):
        for candidate in (root / stem, root / f"{stem}.gz"):
            if candidate.exists():
                return candidate
        raise DataError(f"missing {stem} under {root}")

    return load_mnist(find(f"{prefix}-images-idx3-ubyte"), find(f"{prefix}-labels-idx1-ubyte"),
                      name=f"mnist-{split}")


def read_image(path):
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix in (".pgm", ".ppm"):
            return read_netpbm(path)
        from PIL import Image

        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if "A" in im.mode or im.mode == "P" else "L")
            pixels = np.asarray(im, dtype=np.uint8)
    except FormatError as exc:
        raise DataError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return pixels[:, :, None] if pixels.ndim == 2 else pixels


def load_image_directory(root, size=None, name=None):
    """Load ``root/class_<id>/*.{pgm,ppm,png}``; class ids must be 0..c-1.

    ``size`` is an optional ``(height, width)`` every image is resized to;
    without it all images must already share a shape.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root} is not a directory")
    class_dirs = {}
    for entry in sorted(os.listdir(root)):
        m = _CLASS_DIR.match(entry)
        if m and (root / entry).is_dir():
            class_dirs[int(m.group(1))] = root / entry
    if not class_dirs:
        raise DataError(f"no class_<id> directories under {root}")
    ids = sorted(class_dirs)
    if ids != list(range(len(ids))):
        missing = sorted(set(range(max(ids) + 1)) - set(ids))
        raise DataError(f"class ids under {root} are not dense: missing {missing}")

    images, labels = [], []
    channels = None
    for cls in ids:
        files = sorted(p for p in class_dirs[cls].iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
        for path in files:
            img = read_image(path)
            if channels is None:
                channels = img.shape[2]
            elif img.shape[2] != channels:
                raise DataError(f"{path} has {img.shape[2]} channels, earlier images have {channels}")
            if size is not None:
                img = resize_bilinear(img, *size)
            elif images and img.shape != images[0].shape:
                raise DataError(f"{path} is {img.shape}, earlier images are {images[0].shape}; pass size")
            images.append(img)
            labels.append(cls)
    if not images:
        raise DataError(f"no images found under {root}")
    ds = LabeledDataset(np.stack(images), np.array(labels), len(ids), name or root.name)
    ds.meta["class_counts"] = ds.class_counts().tolist()
    return ds


def select_classes(dataset, class_ids, name=None):
    """Keep only ``class_ids`` and relabel them 0..k-1 in the given order."""
    class_ids = [int(c) for c in class_ids]
    lookup = {c: i for i, c in enumerate(class_ids)}
    keep = np.flatnonzero(np.isin(dataset.labels, class_ids))
    labels = np.array([lookup[c] for c in dataset.labels[keep]], dtype=np.int64)
    return LabeledDataset(dataset.images[keep], labels, len(class_ids), name or dataset.name,
                          {"class_ids": class_ids})


def split_per_class(dataset, test_fraction=0.31, rng=None):
    """Seeded per-class train/test split; returns ``(train, test)``."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = rng if rng is not None else np.random.default_rng(0)
    train_idx, test_idx = [], []
    for cls, idx in partition_by_class(dataset).items():
        idx = rng.permutation(idx)
        n_test = int(round(len(idx) * test_fraction))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return (dataset.subset(train_idx, f"{dataset.name}-train"),
            dataset.subset(test_idx, f"{dataset.name}-test"))


def stratified_subset(dataset, per_class=None, total=None, rng=None):
    """Seeded class-balanced subsample, original order preserved."""
    rng = rng if rng is not None else np.random.default_rng(0)
    parts = partition_by_class(dataset)
    if per_class is None:
        if total is None:
            return dataset
        share = total / len(dataset)
        per_class = {c: int(round(len(idx) * share)) for c, idx in parts.items()}
    elif isinstance(per_class, int):
        per_class = {c: per_class for c in parts}
    chosen = [rng.permutation(idx)[:per_class[c]] for c, idx in parts.items()]
    return dataset.subset(np.sort(np.concatenate(chosen)))


def export_idx(dataset, directory, prefix="train"):
    """Write ``<prefix>-images-idx3-ubyte`` and ``<prefix>-labels-idx1-ubyte``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    images = dataset.images[..., 0] if dataset.images.shape[-1] == 1 else dataset.images
    images_path = directory / f"{prefix}-images-idx3-ubyte"
    labels_path = directory / f"{prefix}-labels-idx1-ubyte"
    write_idx(images_path, images)
    write_idx(labels_path, dataset.labels.astype(np.uint8))
    return images_path, labels_path


def export_image_directory(dataset, directory):
    """Write one PGM/PPM per sample under ``class_<id>/`` subdirectories."""
    directory = Path(directory)
    suffix = ".pgm" if dataset.images.shape[-1] == 1 else ".ppm"
    width = len(str(max(len(dataset) - 1, 0)))
    for cls in range(dataset.class_count):
        (directory / f"class_{cls}").mkdir(parents=True, exist_ok=True)
    for i, (img, label) in enumerate(zip(dataset.images, dataset.labels)):
        write_netpbm(directory / f"class_{label}" / f"{i:0{width}d}{suffix}", img)
    return directory
