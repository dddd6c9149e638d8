"""Backdoor signals and label-consistent poisoning."""
from .estimators import BackdoorTrigger, LabelConsistentPoisoner
from .poison import (
    MultiTargetPlan,
    PoisonPlan,
    PoisonRecord,
    apply_test_backdoor,
    poison_count,
    poison_multi_target,
    poison_training_set,
    select_without_replacement,
)
from .signals import BackdoorSignalSpec, SignalKind, column_profile, generate_signal, signal_for, superimpose

__all__ = [
    "BackdoorSignalSpec", "BackdoorTrigger", "LabelConsistentPoisoner", "MultiTargetPlan",
    "PoisonPlan", "PoisonRecord", "SignalKind", "apply_test_backdoor", "column_profile",
    "generate_signal", "poison_count", "poison_multi_target", "poison_training_set",
    "select_without_replacement", "signal_for", "superimpose",
]
