"""Versioned TOML experiment configuration.

``parse_config(serialize_config(cfg)) == cfg`` holds for every valid config.
Path existence is checked separately by :meth:`ExperimentConfig.check_paths`
so configs can be built and round-tripped without the data on disk.
"""
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .backdoor.poison import MultiTargetPlan, PoisonPlan
from .backdoor.signals import BackdoorSignalSpec
from .data.transforms import AugmentConfig
from .errors import ConfigError
from .experiment.architectures import ARCHITECTURES, _normalize_id
from .experiment.training import TrainConfig

SCHEMA_VERSION = 1
DATASET_KINDS = ("idx", "directory", "synthetic")


@dataclass(frozen=True)
class DatasetConfig:
    """Where the data comes from.

    ``idx``: four IDX paths. ``directory``: ``root/class_<id>/`` tree split
    per class into train/test. ``synthetic``: procedurally drawn sign images.
    ``train_limit`` keeps a stratified subset of the training split.
    """

    kind: str = "idx"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    root: str = ""
    image_size: tuple = ()
    classes: tuple = ()
    test_fraction: float = 0.31
    per_class: int = 0
    num_classes: int = 5
    test_per_class: int = 0
    train_limit: int = 0

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset.kind must be one of {DATASET_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        object.__setattr__(self, "classes", tuple(int(v) for v in self.classes))
        if self.image_size and len(self.image_size) != 2:
            raise ConfigError("dataset.image_size must be [height, width]")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("dataset.test_fraction must be in (0, 1)")
        if self.train_limit < 0:
            raise ConfigError("dataset.train_limit must be >= 0")
        if self.kind == "idx":
            missing = [k for k in ("train_images", "train_labels", "test_images", "test_labels")
                       if not getattr(self, k)]
            if missing:
                raise ConfigError(f"idx dataset needs {', '.join(missing)}")
        if self.kind == "directory" and not self.root:
            raise ConfigError("directory dataset needs root")
        if self.kind == "synthetic" and (self.per_class < 1 or self.test_per_class < 1):
            raise ConfigError("synthetic dataset needs per_class >= 1 and test_per_class >= 1")

    def paths(self):
        if self.kind == "idx":
            return [self.train_images, self.train_labels, self.test_images, self.test_labels]
        if self.kind == "directory":
            return [self.root]
        return []


@dataclass(frozen=True)
class TargetConfig:
    target: int
    kind: str = "ramp"
    delta: float = 30.0
    frequency: int = None

    def signal(self):
        return BackdoorSignalSpec(self.kind, self.delta, self.frequency)


@dataclass(frozen=True)
class SweepConfig:
    targets: tuple = ()
    fractions: tuple = ()
    deltas_tr: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: DatasetConfig
    architecture: str = "mnist_cnn"
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    fraction: float = 0.0
    targets: tuple = ()
    deltas_ts: tuple = (30.0,)
    topk: int = 7
    output_dir: str = "runs"
    sweep: SweepConfig = field(default_factory=SweepConfig)
    arch_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.name or any(c in self.name for c in "/\\"):
            raise ConfigError(f"invalid experiment name {self.name!r}")
        try:
            object.__setattr__(self, "architecture", _normalize_id(self.architecture))
        except ConfigError:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}") from None
        if not self.deltas_ts:
            raise ConfigError("eval.deltas_ts must not be empty")
        if any(d < 0 for d in self.deltas_ts):
            raise ConfigError("eval.deltas_ts must be >= 0")
        if not 0 <= self.fraction <= 1:
            raise ConfigError(f"poison.fraction must be in [0, 1], got {self.fraction}")
        if self.topk < 1:
            raise ConfigError("eval.topk must be >= 1")
        classes = [t.target for t in self.targets]
        if len(set(classes)) != len(classes):
            raise ConfigError(f"poison target classes must be distinct, got {classes}")
        for t in self.targets:
            t.signal()  # validates kind/delta/frequency
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.seed))

    def with_seed(self, seed):
        return replace(self, seed=int(seed), train=replace(self.train, seed=int(seed)))

    def plan(self):
        """The poisoning plan, or ``None`` for a clean run."""
        if not self.targets:
            return None
        if len(self.targets) == 1:
            t = self.targets[0]
            return PoisonPlan(t.target, self.fraction, t.signal(), self.seed)
        return MultiTargetPlan(tuple((t.target, t.signal()) for t in self.targets), self.fraction, self.seed)

    def check_paths(self):
        missing = [p for p in self.dataset.paths() if not Path(p).exists()]
        if missing:
            raise ConfigError(f"paths do not exist: {', '.join(missing)}")
        return self


def _section(d, key, allowed):
    value = d.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{key}] must be a table")
    unknown = set(value) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in [{key}]: {', '.join(sorted(unknown))}")
    return value


def _names(cls):
    return [f.name for f in fields(cls)]


_TOP_KEYS = {"schema_version", "name", "seed", "architecture", "dataset", "train", "poison",
             "eval", "output", "sweep", "arch_options"}


def config_from_dict(d):
    """Build an :class:`ExperimentConfig` from parsed TOML; raises ConfigError."""
    try:
        return _from_dict(d)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def _from_dict(d):
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(unknown))}")
    if "name" not in d:
        raise ConfigError("missing required key: name")

    dataset = DatasetConfig(**_section(d, "dataset", _names(DatasetConfig)))

    train_d = dict(_section(d, "train", ["epochs", "batch_size", "learning_rate", "bn_momentum", "augment"]))
    augment = AugmentConfig(**_section(train_d, "augment", _names(AugmentConfig)))
    train_d.pop("augment", None)
    seed = int(d.get("seed", 0))
    train = TrainConfig(seed=seed, augment=augment, **train_d)

    poison = _section(d, "poison", ["fraction", "targets"])
    targets = []
    for entry in poison.get("targets", []):
        unknown = set(entry) - set(_names(TargetConfig))
        if unknown:
            raise ConfigError(f"unknown keys in [[poison.targets]]: {', '.join(sorted(unknown))}")
        targets.append(TargetConfig(int(entry["target"]), entry.get("kind", "ramp"),
                                    float(entry.get("delta", 30.0)), entry.get("frequency")))

    ev = _section(d, "eval", ["deltas_ts", "topk"])
    out = _section(d, "output", ["dir"])
    sw = _section(d, "sweep", _names(SweepConfig))
    sweep = SweepConfig(tuple(int(t) for t in sw.get("targets", ())),
                        tuple(float(a) for a in sw.get("fractions", ())),
                        tuple(float(v) for v in sw.get("deltas_tr", ())))
    arch_options = {k: tuple(v) if isinstance(v, list) else v
                    for k, v in _section(d, "arch_options", ["conv_widths", "dense_width",
                                                             "dense_widths", "dropout",
                                                             "pool_stride"]).items()}
    return ExperimentConfig(
        name=str(d["name"]),
        dataset=dataset,
        architecture=d.get("architecture", "mnist_cnn"),
        seed=seed,
        train=train,
        fraction=float(poison.get("fraction", 0.0)),
        targets=tuple(targets),
        deltas_ts=tuple(float(v) for v in ev.get("deltas_ts", (30.0,))),
        topk=int(ev.get("topk", 7)),
        output_dir=str(out.get("dir", "runs")),
        sweep=sweep,
        arch_options=arch_options,
    )


def config_to_dict(cfg):
    ds = {f.name: getattr(cfg.dataset, f.name) for f in fields(cfg.dataset)}
    defaults = DatasetConfig.__dataclass_fields__
    ds = {k: list(v) if isinstance(v, tuple) else v for k, v in ds.items()
          if k == "kind" or v != defaults[k].default}
    train = {"epochs": cfg.train.epochs, "batch_size": cfg.train.batch_size,
             "learning_rate": cfg.train.learning_rate, "bn_momentum": cfg.train.bn_momentum,
             "augment": {"enabled": cfg.train.augment.enabled, "shift_px": cfg.train.augment.shift_px,
                         "rotation_deg": cfg.train.augment.rotation_deg}}
    targets = []
    for t in cfg.targets:
        entry = {"target": t.target, "kind": t.kind, "delta": t.delta}
        if t.frequency is not None:
            entry["frequency"] = t.frequency
        targets.append(entry)
    d = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "seed": cfg.seed,
        "architecture": cfg.architecture,
        "dataset": ds,
        "train": train,
        "poison": {"fraction": cfg.fraction, "targets": targets},
        "eval": {"deltas_ts": list(cfg.deltas_ts), "topk": cfg.topk},
        "output": {"dir": cfg.output_dir},
    }
    if cfg.sweep != SweepConfig():
        d["sweep"] = {"targets": list(cfg.sweep.targets), "fractions": list(cfg.sweep.fractions),
                      "deltas_tr": list(cfg.sweep.deltas_tr)}
    if cfg.arch_options:
        d["arch_options"] = {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.arch_options.items()}
    return d


def parse_config(text):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return config_from_dict(data)


def serialize_config(cfg):
    return tomli_w.dumps(config_to_dict(cfg))


def load_config(path, check_paths=True):
    """Read a TOML config file; relative data paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text)
    base = path.resolve().parent
    ds = cfg.dataset
    resolved = {k: str(base / getattr(ds, k)) for k in
                ("train_images", "train_labels", "test_images", "test_labels", "root")
                if getattr(ds, k) and not Path(getattr(ds, k)).is_absolute()}
    if resolved:
        cfg = replace(cfg, dataset=replace(ds, **resolved))
    return cfg.check_paths() if check_paths else cfg
