"""Architectures, training, evaluation and sweeps."""
from .architectures import ARCHITECTURES, build_architecture, lenet5, mnist_cnn
from .estimator import CNNClassifier
from .evaluation import (
    CleanReport,
    EvalReport,
    confusion_matrix,
    evaluate_attack,
    evaluate_clean,
    evaluate_multi_target,
    per_class_accuracy,
    topk_mean,
)
from .sweep import RunResult, SweepCell, SweepRow, asr_grid, asr_grid_csv, format_grid, grid_cells, rows_csv, run_poisoned, sweep
from .synthetic import make_textured_signs
from .training import EpochStats, TrainConfig, TrainedModel, train

__all__ = [
    "ARCHITECTURES", "CNNClassifier", "CleanReport", "EpochStats", "EvalReport", "RunResult",
    "SweepCell", "SweepRow", "TrainConfig", "TrainedModel", "asr_grid", "asr_grid_csv",
    "build_architecture", "confusion_matrix", "evaluate_attack", "evaluate_clean",
    "evaluate_multi_target", "format_grid", "grid_cells", "lenet5", "make_textured_signs",
    "mnist_cnn", "per_class_accuracy", "rows_csv", "run_poisoned", "sweep", "topk_mean", "train",
]
