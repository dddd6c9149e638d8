"""Mini-batch Adam training of a :class:`NetworkSpec` on a labeled dataset."""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..data.transforms import AugmentConfig, augment_batch, normalize
from ..errors import ConfigError, DataError, NumericalError
from ..nn import checkpoint
from ..nn.functional import softmax, softmax_cross_entropy
from ..nn.network import BatchNorm, init_params, init_state, network_backward, network_forward
from ..nn.optim import AdamState, adam_step
from ..seeding import substream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    bn_momentum: float = 0.99

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch norm needs batch statistics)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 < self.bn_momentum <= 1:
            raise ConfigError("bn_momentum must be in (0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainedModel:
    """A network spec with trained parameters and frozen batch-norm statistics."""

    spec: object
    params: dict
    state: dict

    def logits(self, images, batch_size=256):
        images = np.asarray(images)
        if images.ndim == 3:
            images = images[..., None]
        out = []
        for start in range(0, images.shape[0], batch_size):
            chunk = images[start:start + batch_size]
            x = normalize(chunk) if chunk.dtype == np.uint8 else chunk.astype(np.float32)
            logits, _ = network_forward(self.spec, self.params, x, mode="eval", state=self.state)
            out.append(logits)
        if not out:
            return np.zeros((0, self.spec.num_classes), dtype=np.float32)
        return np.concatenate(out)

    def predict_proba(self, images):
        return softmax(self.logits(images))

    def predict(self, images):
        return self.logits(images).argmax(axis=1)

    def save(self, path):
        checkpoint.save(path, self.params, self.state)

    @classmethod
    def load(cls, path, spec):
        params, state = checkpoint.load(path, spec)
        return cls(spec, params, state)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


def train(spec, dataset, config, on_batch=None):
    """Train ``spec`` from scratch; returns ``(TrainedModel, history)``.

    ``dataset`` is a :class:`~backdoorlab.data.LabeledDataset` (or anything
    with uint8 ``images`` and integer ``labels``). Shuffling, initialisation,
    dropout and augmentation draw from separate sub-streams of
    ``config.seed``. ``on_batch(epoch, batch, indices, labels)`` is called
    with exactly what each optimisation step sees.
    """
    images = np.asarray(dataset.images)
    if images.ndim == 3:
        images = images[..., None]
    labels = np.asarray(dataset.labels, dtype=np.int64)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size == 0:
        raise DataError("cannot train on an empty dataset")
    if labels.min() < 0 or labels.max() >= spec.num_classes:
        raise DataError(f"labels must lie in [0, {spec.num_classes})")

    params = init_params(spec, substream(config.seed, "init"))
    state = init_state(spec)
    for s in state.values():
        s.momentum = config.bn_momentum
    adam = AdamState(lr=config.learning_rate)
    shuffle_rng = substream(config.seed, "shuffle")
    dropout_rng = substream(config.seed, "dropout")
    augment_rng = substream(config.seed, "augment")
    uses_bn = any(isinstance(layer, BatchNorm) for layer in spec.layers)

    n = labels.shape[0]
    history = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total_loss, correct, seen = 0.0, 0, 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            if uses_bn and idx.size < 2:
                continue
            batch_labels = labels[idx]
            if on_batch is not None:
                on_batch(epoch, b, idx, batch_labels)
            batch = augment_batch(images[idx], config.augment, augment_rng)
            logits, tape = network_forward(spec, params, normalize(batch), mode="train",
                                           state=state, rng=dropout_rng)
            loss, grad = softmax_cross_entropy(logits, batch_labels)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {b}", epoch=epoch, batch=b)
            grads = network_backward(spec, params, tape, grad)
            params = adam_step(params, grads, adam)
            total_loss += loss * idx.size
            correct += int((logits.argmax(axis=1) == batch_labels).sum())
            seen += idx.size
        stats = EpochStats(epoch + 1, total_loss / max(seen, 1), correct / max(seen, 1))
        history.append(stats)
        log.info("epoch %d/%d loss %.4f acc %.4f", stats.epoch, config.epochs, stats.loss, stats.accuracy)
    return TrainedModel(spec, params, state), history
