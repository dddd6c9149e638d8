"""Clean accuracy, confusion matrices and attack success rates."""
import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from ..backdoor.poison import apply_test_backdoor
from ..errors import ConfigError


def confusion_matrix(labels, predictions, num_classes):
    """Row = true class, column = predicted class."""
    m = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(m, (np.asarray(labels), np.asarray(predictions)), 1)
    return m


def per_class_accuracy(confusion):
    counts = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        acc = np.diag(confusion) / counts
    return np.where(counts > 0, acc, 0.0)


@dataclass
class CleanReport:
    per_class_accuracy: np.ndarray
    confusion: np.ndarray

    @property
    def overall_accuracy(self):
        return float(np.trace(self.confusion) / max(self.confusion.sum(), 1))


def evaluate_clean(model, test_set, predictions=None):
    """Per-class accuracy and confusion on unmodified test samples."""
    if predictions is None:
        predictions = model.predict(test_set.images)
    confusion = confusion_matrix(test_set.labels, predictions, test_set.class_count)
    return CleanReport(per_class_accuracy(confusion), confusion)


def topk_mean(rates, k):
    rates = np.sort(np.asarray(list(rates), dtype=np.float64))[::-1]
    if rates.size == 0:
        return 0.0
    k = min(max(int(k), 1), rates.size)
    return float(rates[:k].mean())


@dataclass
class EvalReport:
    """Clean and backdoored-test statistics for one target class."""

    target: int
    delta_ts: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray
    asr_per_source: dict
    asr_mean: float
    asr_topk: float
    topk: int
    asr_weighted: float = 0.0
    attacked_confusion: np.ndarray = None
    signal: dict = field(default_factory=dict)

    @property
    def overall_accuracy(self):
        return float(np.trace(self.confusion) / max(self.confusion.sum(), 1))

    def to_dict(self):
        return {
            "target": int(self.target),
            "delta_ts": float(self.delta_ts),
            "signal": dict(self.signal),
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": [float(v) for v in self.per_class_accuracy],
            "confusion": self.confusion.tolist(),
            "attacked_confusion": None if self.attacked_confusion is None else self.attacked_confusion.tolist(),
            "asr_per_source": {str(k): float(v) for k, v in sorted(self.asr_per_source.items())},
            "asr_mean": float(self.asr_mean),
            "asr_topk": float(self.asr_topk),
            "topk": int(self.topk),
            "asr_weighted": float(self.asr_weighted),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        attacked = d.get("attacked_confusion")
        return cls(
            target=int(d["target"]),
            delta_ts=float(d["delta_ts"]),
            per_class_accuracy=np.asarray(d["per_class_accuracy"], dtype=np.float64),
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            asr_per_source={int(k): float(v) for k, v in d["asr_per_source"].items()},
            asr_mean=float(d["asr_mean"]),
            asr_topk=float(d["asr_topk"]),
            topk=int(d["topk"]),
            asr_weighted=float(d.get("asr_weighted", 0.0)),
            attacked_confusion=None if attacked is None else np.asarray(attacked, dtype=np.int64),
            signal=dict(d.get("signal", {})),
        )

    def confusion_csv(self, attacked=False):
        matrix = self.attacked_confusion if attacked else self.confusion
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = matrix.shape[0]
        writer.writerow(["true\\pred"] + [str(c) for c in range(n)])
        for c in range(n):
            writer.writerow([str(c)] + [str(int(v)) for v in matrix[c]])
        return buf.getvalue()


def evaluate_attack(model, test_set, signal, target, delta_ts=None, topk=7, exclude=(),
                    clean_predictions=None):
    """Attack success rate of ``signal`` (at strength ``delta_ts``) towards ``target``.

    For each source class l not in ``{target} | exclude`` the rate is the
    share of class-l test images classified as ``target`` once the signal is
    superimposed. ``asr_mean`` is the unweighted mean over sources,
    ``asr_topk`` the mean of the ``topk`` largest rates.
    """
    c = test_set.class_count
    if not 0 <= target < c:
        raise ConfigError(f"target {target} outside [0, {c})")
    if delta_ts is not None:
        signal = signal.with_delta(delta_ts)
    excluded = sorted({int(target), *(int(e) for e in exclude)})
    clean = evaluate_clean(model, test_set, clean_predictions)
    attacked_set = apply_test_backdoor(test_set, signal, exclude=excluded)
    attacked_pred = model.predict(attacked_set.images)
    attacked_conf = confusion_matrix(test_set.labels, attacked_pred, c)
    counts = attacked_conf.sum(axis=1)
    sources = [l for l in range(c) if l not in excluded and counts[l] > 0]
    asr = {l: float(attacked_conf[l, target] / counts[l]) for l in sources}
    hits = sum(attacked_conf[l, target] for l in sources)
    total = sum(counts[l] for l in sources)
    return EvalReport(
        target=int(target),
        delta_ts=float(signal.delta),
        per_class_accuracy=clean.per_class_accuracy,
        confusion=clean.confusion,
        asr_per_source=asr,
        asr_mean=float(np.mean(list(asr.values()))) if asr else 0.0,
        asr_topk=topk_mean(asr.values(), topk),
        topk=int(topk),
        asr_weighted=float(hits / total) if total else 0.0,
        attacked_confusion=attacked_conf,
        signal=signal.to_dict(),
    )


def evaluate_multi_target(model, test_set, targets, delta_ts=None, topk=7, clean_predictions=None):
    """One report per (target, signal) pair; every target class is excluded from all sources."""
    all_targets = [int(t) for t, _ in targets]
    if clean_predictions is None:
        clean_predictions = model.predict(test_set.images)
    return {
        int(t): evaluate_attack(model, test_set, signal, t, delta_ts, topk, exclude=all_targets,
                                clean_predictions=clean_predictions)
        for t, signal in targets
    }
