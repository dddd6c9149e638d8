"""Label-consistent poisoning of training sets and backdooring of test sets.

Only samples that already belong to the target class are touched and no
label is ever changed.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..data.dataset import LabeledDataset, partition_by_class
from ..errors import ConfigError, DataError
from ..seeding import substream
from .signals import BackdoorSignalSpec, signal_for, superimpose


def _check_fraction(fraction):
    if not 0 <= fraction <= 1:
        raise ConfigError(f"poisoning fraction must be in [0, 1], got {fraction}")


@dataclass(frozen=True)
class PoisonPlan:
    target_class: int
    fraction: float
    signal: BackdoorSignalSpec
    seed: int = 0

    def __post_init__(self):
        _check_fraction(self.fraction)
        if self.target_class < 0:
            raise ConfigError("target class must be non-negative")


@dataclass(frozen=True)
class MultiTargetPlan:
    """Several (target class, signal) pairs sharing one fraction and seed."""

    targets: tuple
    fraction: float
    seed: int = 0

    def __post_init__(self):
        _check_fraction(self.fraction)
        targets = tuple((int(t), s) for t, s in self.targets)
        classes = [t for t, _ in targets]
        if len(set(classes)) != len(classes):
            raise ConfigError(f"target classes must be distinct, got {classes}")
        object.__setattr__(self, "targets", targets)

    def plans(self):
        return [PoisonPlan(t, self.fraction, s, self.seed) for t, s in self.targets]


@dataclass
class PoisonRecord:
    """Which dataset indices were corrupted, per target class."""

    indices: dict = field(default_factory=dict)
    signals: dict = field(default_factory=dict)
    fraction: float = 0.0
    seed: int = 0

    def all_indices(self):
        if not self.indices:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate([np.asarray(v, dtype=np.int64) for v in self.indices.values()]))

    def to_dict(self):
        return {
            "fraction": self.fraction,
            "seed": self.seed,
            "targets": [
                {"target_class": int(t), "signal": self.signals[t].to_dict(),
                 "indices": [int(i) for i in self.indices[t]]}
                for t in sorted(self.indices)
            ],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        record = cls(fraction=float(d["fraction"]), seed=int(d["seed"]))
        for entry in d["targets"]:
            t = int(entry["target_class"])
            record.indices[t] = np.asarray(entry["indices"], dtype=np.int64)
            record.signals[t] = BackdoorSignalSpec.from_dict(entry["signal"])
        return record

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def poison_count(fraction, class_size):
    """floor(fraction * class_size), robust to binary representation error."""
    return int(math.floor(round(fraction * class_size, 9)))


def select_without_replacement(candidates, k, rng):
    """First ``k`` entries of a seeded Fisher-Yates shuffle of ``candidates``."""
    pool = np.array(candidates, dtype=np.int64)
    n = pool.size
    if not 0 <= k <= n:
        raise ValueError(f"cannot pick {k} of {n}")
    for i in range(k):
        j = int(rng.integers(i, n))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def _select(dataset, plan, partition, stream):
    if plan.target_class >= dataset.class_count:
        raise ConfigError(f"target class {plan.target_class} not in a {dataset.class_count}-class dataset")
    members = partition[plan.target_class]
    if members.size == 0:
        raise DataError(f"target class {plan.target_class} has no samples")
    k = poison_count(plan.fraction, members.size)
    return np.sort(select_without_replacement(members, k, substream(plan.seed, stream)))


def poison_training_set(dataset, plan):
    """Superimpose the plan's signal on a seeded floor(alpha*|D_t|) subset of class t.

    Returns ``(poisoned dataset, PoisonRecord)``; every label and every
    unselected sample is left exactly as it was.
    """
    return poison_multi_target(dataset, MultiTargetPlan(((plan.target_class, plan.signal),),
                                                        plan.fraction, plan.seed))


def poison_multi_target(dataset, plan):
    partition = partition_by_class(dataset)
    images = dataset.images.copy()
    record = PoisonRecord(fraction=plan.fraction, seed=plan.seed)
    for single in plan.plans():
        chosen = _select(dataset, single, partition, f"poison/{single.target_class}")
        if chosen.size:
            images[chosen] = superimpose(dataset.images[chosen], signal_for(single.signal, dataset.image_shape))
        record.indices[single.target_class] = chosen
        record.signals[single.target_class] = single.signal
    poisoned = LabeledDataset(images, dataset.labels.copy(), dataset.class_count,
                              f"{dataset.name}-poisoned", dict(dataset.meta))
    return poisoned, record


def apply_test_backdoor(dataset, signal, exclude=()):
    """Superimpose ``signal`` on every test image whose class is not in ``exclude``."""
    exclude = [int(c) for c in np.atleast_1d(exclude)]
    keep = ~np.isin(dataset.labels, exclude)
    images = dataset.images.copy()
    if keep.any() and signal.delta > 0:
        images[keep] = superimpose(dataset.images[keep], signal_for(signal, dataset.image_shape))
    return LabeledDataset(images, dataset.labels.copy(), dataset.class_count,
                          f"{dataset.name}-backdoored", dict(dataset.meta))
