"""scikit-learn style front ends for poisoning and test-time triggering."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..data.dataset import LabeledDataset
from ..validation import check_images, check_images_labels
from .poison import PoisonPlan, poison_training_set
from .signals import BackdoorSignalSpec, signal_for, superimpose


def _signal(kind, delta, frequency):
    return BackdoorSignalSpec(kind, delta, frequency)


class LabelConsistentPoisoner(BaseEstimator):
    """Corrupt a fraction of the target class with an additive signal.

    ``fit_resample(X, y)`` returns the poisoned images with ``y`` unchanged;
    the chosen rows are kept in ``poison_indices_`` and the full
    :class:`~backdoorlab.backdoor.poison.PoisonRecord` in ``record_``.

    Examples
    --------
    >>> poisoner = LabelConsistentPoisoner(target_class=3, fraction=0.3, delta=30)
    >>> X_poisoned, y_same = poisoner.fit_resample(X, y)  # doctest: +SKIP
    """

    def __init__(self, target_class=0, fraction=0.3, kind="ramp", delta=30.0, frequency=None,
                 seed=0):
        self.target_class = target_class
        self.fraction = fraction
        self.kind = kind
        self.delta = delta
        self.frequency = frequency
        self.seed = seed

    def plan(self):
        return PoisonPlan(self.target_class, self.fraction,
                          _signal(self.kind, self.delta, self.frequency), self.seed)

    def fit(self, X, y):
        self.fit_resample(X, y)
        return self

    def fit_resample(self, X, y):
        X, y = check_images_labels(X, y)
        n_classes = max(int(y.max()) + 1, self.target_class + 1) if y.size else self.target_class + 1
        dataset = LabeledDataset(X, y, n_classes)
        poisoned, record = poison_training_set(dataset, self.plan())
        self.record_ = record
        self.poison_indices_ = record.indices[self.target_class]
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return poisoned.images, y


class BackdoorTrigger(TransformerMixin, BaseEstimator):
    """Stateless transformer superimposing a signal on every image."""

    def __init__(self, kind="ramp", delta=30.0, frequency=None):
        self.kind = kind
        self.delta = delta
        self.frequency = frequency

    def fit(self, X, y=None):
        X = check_images(X)
        self.image_shape_ = X.shape[1:]
        self.signal_ = signal_for(_signal(self.kind, self.delta, self.frequency), self.image_shape_)
        return self

    def transform(self, X):
        check_is_fitted(self, "signal_")
        X = check_images(X)
        return superimpose(X, self.signal_)
