from .dataset import (
    LabeledDataset,
    export_idx,
    export_image_directory,
    load_image_directory,
    load_mnist,
    load_mnist_dir,
    partition_by_class,
    read_image,
    select_classes,
    split_per_class,
    stratified_subset,
)
from .idx import dump_idx, parse_idx, read_idx, write_idx
from .netpbm import dump_netpbm, parse_netpbm, read_netpbm, write_netpbm
from .transforms import (
    AugmentConfig,
    augment,
    augment_batch,
    denormalize,
    normalize,
    resize_bilinear,
    rotate_image,
    shift_image,
)

__all__ = [
    "AugmentConfig", "LabeledDataset", "augment", "augment_batch", "denormalize", "dump_idx",
    "dump_netpbm", "export_idx", "export_image_directory", "load_image_directory", "load_mnist",
    "load_mnist_dir", "normalize", "parse_idx", "parse_netpbm", "partition_by_class", "read_idx",
    "read_image", "read_netpbm", "resize_bilinear", "rotate_image", "select_classes", "shift_image",
    "split_per_class", "stratified_subset", "write_idx", "write_netpbm",
]
