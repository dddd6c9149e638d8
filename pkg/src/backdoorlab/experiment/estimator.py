import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..data.dataset import LabeledDataset
from ..data.transforms import AugmentConfig
from ..validation import check_images, check_images_labels
from .architectures import LENET5, MNIST_CNN, _normalize_id, build_architecture
from .training import TrainConfig, TrainedModel, train


class CNNClassifier(ClassifierMixin, BaseEstimator):
    """From-scratch CNN image classifier with a scikit-learn interface.

    ``X`` is a stack of uint8 images shaped (N, H, W) or (N, H, W, C); pixels
    are scaled to [0, 1] internally so that poisoning can operate on the
    stored uint8 values. Class labels must be integers ``0..n_classes-1``.

    Parameters
    ----------
    architecture : {"mnist_cnn", "lenet5"}
    epochs, batch_size, learning_rate, seed
        Training schedule; Adam with beta1=0.9, beta2=0.999, eps=1e-7.
    n_classes : int, optional
        Defaults to ``max(y) + 1``.
    conv_widths, dense_width
        Override layer widths (e.g. for reduced gradient-check networks).
        ``dense_width`` is an int for mnist_cnn and a pair for lenet5.
    augment : AugmentConfig, optional
        On-the-fly augmentation; off by default.
    bn_momentum : float
        Moving-average coefficient of the batch-norm running statistics.
    """

    def __init__(self, architecture=MNIST_CNN, epochs=20, batch_size=64, learning_rate=1e-3,
                 seed=0, n_classes=None, conv_widths=None, dense_width=None, augment=None,
                 bn_momentum=0.99):
        self.architecture = architecture
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.n_classes = n_classes
        self.conv_widths = conv_widths
        self.dense_width = dense_width
        self.augment = augment
        self.bn_momentum = bn_momentum

    def _build(self, input_shape, n_classes):
        arch = _normalize_id(self.architecture)
        widths = {}
        if self.conv_widths is not None:
            widths["conv_widths"] = tuple(self.conv_widths)
        if arch == MNIST_CNN:
            widths["bn_momentum"] = self.bn_momentum
            if self.dense_width is not None:
                widths["dense_width"] = int(self.dense_width)
        elif arch == LENET5 and self.dense_width is not None:
            widths["dense_widths"] = tuple(np.atleast_1d(self.dense_width).tolist())
        return build_architecture(arch, input_shape, n_classes, **widths)

    def _config(self):
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.seed,
                           self.augment or AugmentConfig(enabled=False), self.bn_momentum)

    def fit(self, X, y):
        X, y = check_images_labels(X, y)
        n_classes = self.n_classes if self.n_classes is not None else int(y.max()) + 1
        spec = self._build(X.shape[1:], n_classes)
        self.model_, self.history_ = train(spec, LabeledDataset(X, y, n_classes), self._config())
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    @classmethod
    def from_model(cls, model, **params):
        """Wrap an already trained :class:`TrainedModel` (e.g. a loaded checkpoint)."""
        est = cls(n_classes=model.spec.num_classes, **params)
        est.model_ = model
        est.history_ = []
        est.classes_ = np.arange(model.spec.num_classes)
        est.n_features_in_ = int(np.prod(model.spec.input_shape))
        return est

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.logits(check_images(X))

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict_proba(check_images(X))

    def predict(self, X):
        return self.classes_[self.decision_function(X).argmax(axis=1)]


__all__ = ["CNNClassifier", "TrainedModel"]
