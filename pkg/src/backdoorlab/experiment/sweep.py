"""Poison -> train -> evaluate pipeline and grid sweeps over it.

One network is trained per (target, fraction, training strength) cell; every
test strength in the grid is evaluated against that same network.
"""
import csv
import io
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..backdoor.poison import MultiTargetPlan, PoisonPlan, poison_multi_target
from ..backdoor.signals import BackdoorSignalSpec
from .architectures import build_architecture
from .evaluation import evaluate_clean, evaluate_multi_target
from .training import train

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    """Everything produced by one poisoned training run."""

    model: object
    history: list
    record: object
    clean: object
    reports: dict = field(default_factory=dict)  # (target, delta_ts) -> EvalReport

    @property
    def clean_accuracy(self):
        return self.clean.overall_accuracy

    def asr(self, target, delta_ts, stat="asr_mean"):
        return getattr(self.reports[(int(target), float(delta_ts))], stat)


def run_poisoned(train_set, test_set, plan, architecture, train_config, deltas_ts, topk=7,
                 arch_options=None, on_batch=None):
    """Poison ``train_set`` with ``plan``, train, then evaluate every test strength.

    ``plan`` is a :class:`PoisonPlan` or :class:`MultiTargetPlan`; in the
    multi-target case each report excludes every target class from its sources.
    """
    multi = plan if isinstance(plan, MultiTargetPlan) else MultiTargetPlan(
        ((plan.target_class, plan.signal),), plan.fraction, plan.seed)
    poisoned, record = poison_multi_target(train_set, multi)
    spec = build_architecture(architecture, train_set.image_shape, train_set.class_count,
                              **(arch_options or {}))
    model, history = train(spec, poisoned, train_config, on_batch=on_batch)
    clean_pred = model.predict(test_set.images)
    result = RunResult(model, history, record, evaluate_clean(model, test_set, clean_pred))
    for d in deltas_ts:
        reports = evaluate_multi_target(model, test_set, multi.targets, d, topk, clean_pred)
        for t, report in reports.items():
            result.reports[(t, float(d))] = report
    return result


@dataclass(frozen=True)
class SweepCell:
    target: int
    fraction: float
    delta_tr: float


@dataclass(frozen=True)
class SweepRow:
    target: int
    fraction: float
    delta_tr: float
    delta_ts: float
    clean_accuracy: float
    asr_mean: float
    asr_topk: float


def grid_cells(targets, fractions, deltas_tr):
    return [SweepCell(int(t), float(a), float(d))
            for t, a, d in itertools.product(targets, fractions, deltas_tr)]


def _run_cell(args):
    cell, train_set, test_set, signal, architecture, train_config, deltas_ts, topk, arch_options = args
    plan = PoisonPlan(cell.target, cell.fraction, signal.with_delta(cell.delta_tr), train_config.seed)
    log.info("cell t=%d alpha=%g delta_tr=%g", cell.target, cell.fraction, cell.delta_tr)
    result = run_poisoned(train_set, test_set, plan, architecture, train_config, deltas_ts, topk,
                          arch_options)
    return cell, result


def sweep(train_set, test_set, signal, cells, deltas_ts, architecture, train_config, topk=7,
          workers=1, arch_options=None, on_result=None):
    """Run every cell and return ``(rows, {cell: RunResult})``.

    Cells are independent, so with ``workers > 1`` they run in a process
    pool. Each cell uses ``train_config.seed`` for both poisoning and
    training, so any single cell can be re-run in isolation with the same
    outcome. ``on_result(cell, result)`` fires as each cell finishes, in
    grid order.
    """
    if not isinstance(signal, BackdoorSignalSpec):
        raise TypeError("signal must be a BackdoorSignalSpec")
    jobs = [(c, train_set, test_set, signal, architecture, train_config, tuple(deltas_ts), topk,
             arch_options) for c in cells]
    results = {}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = pool.map(_run_cell, jobs)
            for cell, result in outcomes:
                results[cell] = result
                if on_result:
                    on_result(cell, result)
    else:
        for job in jobs:
            cell, result = _run_cell(job)
            results[cell] = result
            if on_result:
                on_result(cell, result)
    rows = []
    for cell in cells:
        result = results[cell]
        for d in deltas_ts:
            rep = result.reports[(cell.target, float(d))]
            rows.append(SweepRow(cell.target, cell.fraction, cell.delta_tr, float(d),
                                 result.clean_accuracy, rep.asr_mean, rep.asr_topk))
    return rows, results


def rows_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["target", "alpha", "delta_tr", "delta_ts", "clean_accuracy", "asr_mean", "asr_topk"])
    for r in rows:
        writer.writerow([r.target, f"{r.fraction:g}", f"{r.delta_tr:g}", f"{r.delta_ts:g}",
                         f"{r.clean_accuracy:.4f}", f"{r.asr_mean:.4f}", f"{r.asr_topk:.4f}"])
    return buf.getvalue()


def asr_grid(rows, target, delta_tr, stat="asr_mean"):
    """Pivot to ``(fractions, deltas_ts, matrix)`` with rows alpha and columns delta_ts."""
    sel = [r for r in rows if r.target == target and r.delta_tr == delta_tr]
    fractions = sorted({r.fraction for r in sel})
    deltas = sorted({r.delta_ts for r in sel})
    grid = np.full((len(fractions), len(deltas)), np.nan)
    for r in sel:
        grid[fractions.index(r.fraction), deltas.index(r.delta_ts)] = getattr(r, stat)
    return fractions, deltas, grid


def asr_grid_csv(rows, target, delta_tr, stat="asr_mean"):
    fractions, deltas, grid = asr_grid(rows, target, delta_tr, stat)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha"] + [f"{d:g}" for d in deltas])
    for a, row in zip(fractions, grid):
        writer.writerow([f"{a:g}"] + ["" if np.isnan(v) else f"{100 * v:.1f}" for v in row])
    return buf.getvalue()


def format_grid(rows, target, delta_tr, stat="asr_mean"):
    """Fixed-width text table of percentages: one row per alpha, one column per delta_ts."""
    fractions, deltas, grid = asr_grid(rows, target, delta_tr, stat)
    lines = [f"target {target}, delta_tr {delta_tr:g}",
             f"{'alpha':<8}" + "".join(f"{'dts=' + format(d, 'g'):>9}" for d in deltas)]
    for a, row in zip(fractions, grid):
        lines.append(f"{a:<8g}" + "".join(
            f"{'-' if np.isnan(v) else format(100 * v, '.0f') + '%':>9}" for v in row))
    return "\n".join(lines)
