"""Command-line front end: ``backdoorlab {poison,train,eval,sweep,gradcheck,render}``.

Every command except ``gradcheck`` and ``render`` reads a TOML experiment
config and writes into ``<out>/<name>/``. Output files carry no timestamps;
timestamped progress goes to the ``run.log`` sidecar only.
"""
import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .backdoor.poison import MultiTargetPlan, PoisonRecord, poison_multi_target
from .config import load_config, serialize_config
from .data import (
    export_idx,
    export_image_directory,
    load_image_directory,
    load_mnist,
    select_classes,
    split_per_class,
    stratified_subset,
)
from .errors import ConfigError, DataError, FormatError, NumericalError, ShapeError
from .experiment.architectures import build_architecture
from .experiment.evaluation import EvalReport, evaluate_clean, evaluate_multi_target
from .experiment.sweep import SweepRow, asr_grid_csv, format_grid, grid_cells, rows_csv, sweep
from .experiment.synthetic import make_textured_signs
from .experiment.training import TrainedModel, train
from .nn import gradient_check, init_params, init_state
from .render import render_svg, render_text
from .seeding import substream

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

log = logging.getLogger("backdoorlab")

GRADCHECK_NETS = {
    "mnist_cnn": (dict(conv_widths=(8, 16), dense_width=32), (28, 28, 1), 10),
    "lenet5": (dict(conv_widths=(8, 16), dense_widths=(32, 32)), (32, 32, 3), 16),
}


# data and config plumbing

def load_datasets(cfg):
    """Return ``(train, test)`` for the config's dataset section."""
    ds = cfg.dataset
    if ds.kind == "idx":
        train_set = load_mnist(ds.train_images, ds.train_labels, name="train")
        test_set = load_mnist(ds.test_images, ds.test_labels, name="test")
    elif ds.kind == "directory":
        full = load_image_directory(ds.root, size=ds.image_size or None)
        if ds.classes:
            full = select_classes(full, ds.classes)
        train_set, test_set = split_per_class(full, ds.test_fraction, substream(cfg.seed, "split"))
    else:
        train_set = make_textured_signs(ds.per_class, ds.num_classes, rng=substream(cfg.seed, "data/train"),
                                        name="train")
        test_set = make_textured_signs(ds.test_per_class, ds.num_classes, rng=substream(cfg.seed, "data/test"),
                                       name="test")
    if train_set.class_count != test_set.class_count:
        c = max(train_set.class_count, test_set.class_count)
        train_set = replace(train_set, class_count=c)
        test_set = replace(test_set, class_count=c)
    if ds.train_limit and ds.train_limit < len(train_set):
        train_set = stratified_subset(train_set, total=ds.train_limit, rng=substream(cfg.seed, "subset"))
    return train_set, test_set


def _as_multi(plan):
    if plan is None or isinstance(plan, MultiTargetPlan):
        return plan
    return MultiTargetPlan(((plan.target_class, plan.signal),), plan.fraction, plan.seed)


def poison(cfg, train_set):
    plan = _as_multi(cfg.plan())
    if plan is None:
        return train_set, PoisonRecord(fraction=0.0, seed=cfg.seed)
    return poison_multi_target(train_set, plan)


def _spec(cfg, train_set):
    return build_architecture(cfg.architecture, train_set.image_shape, train_set.class_count,
                              **cfg.arch_options)


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _experiment_dir(cfg, args):
    root = Path(args.out) if args.out else Path(cfg.output_dir)
    out = root / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _attach_log(directory):
    handler = logging.FileHandler(directory / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    logging.getLogger().addHandler(handler)
    return handler


def history_csv(history):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "loss", "accuracy"])
    for h in history:
        writer.writerow([h.epoch, f"{h.loss:.6f}", f"{h.accuracy:.6f}"])
    return buf.getvalue()


def _signals(cfg):
    return {t.target: t.signal() for t in cfg.targets}


def evaluate_config(cfg, model, test_set):
    """Clean statistics plus one report per (target, delta_ts)."""
    clean_pred = model.predict(test_set.images)
    clean = evaluate_clean(model, test_set, clean_pred)
    reports = []
    targets = tuple(_signals(cfg).items())
    if targets:
        for d in cfg.deltas_ts:
            by_target = evaluate_multi_target(model, test_set, targets, d, cfg.topk, clean_pred)
            reports.extend(by_target[t] for t, _ in targets)
    return clean, reports


def report_payload(cfg, clean, reports):
    return {
        "name": cfg.name,
        "architecture": cfg.architecture,
        "seed": cfg.seed,
        "fraction": cfg.fraction,
        "clean_accuracy": clean.overall_accuracy,
        "per_class_accuracy": [float(v) for v in clean.per_class_accuracy],
        "confusion": clean.confusion.tolist(),
        "reports": [r.to_dict() for r in reports],
    }


def report_csv(reports, class_count):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["target", "delta_ts", "clean_accuracy", "asr_mean", "asr_topk", "topk", "asr_weighted"]
                    + [f"asr_source_{l}" for l in range(class_count)])
    for r in reports:
        writer.writerow([r.target, f"{r.delta_ts:g}", f"{r.overall_accuracy:.4f}", f"{r.asr_mean:.4f}",
                         f"{r.asr_topk:.4f}", r.topk, f"{r.asr_weighted:.4f}"]
                        + [f"{r.asr_per_source[l]:.4f}" if l in r.asr_per_source else ""
                           for l in range(class_count)])
    return buf.getvalue()


def summary_text(cfg, clean, reports):
    lines = [f"experiment {cfg.name}: {cfg.architecture}, seed {cfg.seed}",
             f"clean test accuracy {clean.overall_accuracy:.4f}"]
    signals = _signals(cfg)
    for t, sig in signals.items():
        rows = [SweepRow(t, cfg.fraction, sig.delta, r.delta_ts, r.overall_accuracy, r.asr_mean, r.asr_topk)
                for r in reports if r.target == t]
        lines += ["", f"attack success rate, {sig.kind.value} signal (mean over source classes)",
                  format_grid(rows, t, sig.delta)]
        if cfg.topk < clean.confusion.shape[0] - 1:
            lines += [f"top-{cfg.topk} sources", format_grid(rows, t, sig.delta, "asr_topk")]
    return "\n".join(lines) + "\n"


def write_reports(directory, cfg, clean, reports, class_count):
    _write(directory / "report.json", json.dumps(report_payload(cfg, clean, reports), indent=2) + "\n")
    _write(directory / "report.csv", report_csv(reports, class_count))
    _write(directory / "confusion.csv", _confusion_csv(clean.confusion))
    _write(directory / "summary.txt", summary_text(cfg, clean, reports))


def _confusion_csv(matrix):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["true\\pred"] + list(range(matrix.shape[0])))
    for i, row in enumerate(matrix):
        writer.writerow([i] + [int(v) for v in row])
    return buf.getvalue()


# commands

def cmd_poison(cfg, args):
    out = _experiment_dir(cfg, args)
    train_set, _ = load_datasets(cfg)
    poisoned, record = poison(cfg, train_set)
    target_dir = out / "poisoned"
    if cfg.dataset.kind == "idx":
        images_path, labels_path = export_idx(poisoned, target_dir, "train")
        where = f"{images_path}, {labels_path}"
    else:
        export_image_directory(poisoned, target_dir / "train")
        where = str(target_dir / "train")
    _write(out / "config.toml", serialize_config(cfg))
    _write(out / "poison_record.json", record.to_json(indent=2) + "\n")
    counts = {t: len(v) for t, v in record.indices.items()}
    print(f"poisoned {counts} samples of {len(train_set)}; wrote {where}")
    return EXIT_OK


def _train(cfg, out):
    train_set, test_set = load_datasets(cfg)
    poisoned, record = poison(cfg, train_set)
    spec = _spec(cfg, train_set)
    model, history = train(spec, poisoned, cfg.train)
    model.save(out / "checkpoint.bin")
    _write(out / "history.csv", history_csv(history))
    _write(out / "poison_record.json", record.to_json(indent=2) + "\n")
    _write(out / "config.toml", serialize_config(cfg))
    return model, history, test_set


def cmd_train(cfg, args):
    out = _experiment_dir(cfg, args)
    handler = _attach_log(out)
    try:
        _, history, _ = _train(cfg, out)
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    last = history[-1]
    print(f"trained {cfg.train.epochs} epochs: loss {last.loss:.4f} train accuracy {last.accuracy:.4f}; "
          f"checkpoint {out / 'checkpoint.bin'}")
    return EXIT_OK


def cmd_eval(cfg, args):
    out = _experiment_dir(cfg, args)
    train_set, test_set = load_datasets(cfg)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "checkpoint.bin"
    if not ckpt.exists():
        raise ConfigError(f"checkpoint {ckpt} does not exist; run train first or pass --checkpoint")
    spec = _spec(cfg, train_set)
    model = TrainedModel.load(ckpt, spec)
    clean, reports = evaluate_config(cfg, model, test_set)
    write_reports(out, cfg, clean, reports, test_set.class_count)
    _write(out / "config.toml", serialize_config(cfg))
    print(summary_text(cfg, clean, reports), end="")
    return EXIT_OK


def cmd_sweep(cfg, args):
    if not cfg.targets:
        raise ConfigError("sweep needs at least one [[poison.targets]] entry for the signal family")
    out = _experiment_dir(cfg, args)
    handler = _attach_log(out)
    base = cfg.targets[0]
    signal = base.signal()
    targets = cfg.sweep.targets or (base.target,)
    fractions = cfg.sweep.fractions or (cfg.fraction,)
    deltas_tr = cfg.sweep.deltas_tr or (base.delta,)
    cells = grid_cells(targets, fractions, deltas_tr)
    train_set, test_set = load_datasets(cfg)

    def save_cell(cell, result):
        d = out / "cells" / f"t{cell.target}_a{cell.fraction:g}_dtr{cell.delta_tr:g}"
        d.mkdir(parents=True, exist_ok=True)
        result.model.save(d / "checkpoint.bin")
        _write(d / "history.csv", history_csv(result.history))
        _write(d / "poison_record.json", result.record.to_json(indent=2) + "\n")
        reports = [result.reports[(cell.target, float(x))] for x in cfg.deltas_ts]
        cell_cfg = replace(cfg, fraction=cell.fraction,
                           targets=(replace(base, target=cell.target, delta=cell.delta_tr),))
        write_reports(d, cell_cfg, result.clean, reports, test_set.class_count)

    try:
        rows, _ = sweep(train_set, test_set, signal, cells, cfg.deltas_ts, cfg.architecture, cfg.train,
                        cfg.topk, args.workers, cfg.arch_options, on_result=save_cell)
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    _write(out / "sweep.csv", rows_csv(rows))
    text = [f"sweep {cfg.name}: {len(cells)} trainings, {signal.kind.value} signal"]
    for t in targets:
        for d in deltas_tr:
            _write(out / f"grid_t{t}_dtr{d:g}.csv", asr_grid_csv(rows, t, d))
            text += ["", format_grid(rows, t, d)]
    _write(out / "summary.txt", "\n".join(text) + "\n")
    _write(out / "config.toml", serialize_config(cfg))
    print("\n".join(text))
    return EXIT_OK


def run_gradcheck(arch, seeds, h=1e-4, batch=4, corrupt=False, per_tensor=12):
    """Gradient-check the reduced-width architecture for each seed; yields results."""
    widths, shape, classes = GRADCHECK_NETS[arch]
    spec = build_architecture(arch, shape, classes, **widths)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        params = init_params(spec, rng, np.float64)
        state = init_state(spec, np.float64)
        x = rng.random((batch,) + shape)
        y = rng.integers(0, classes, batch)
        yield seed, gradient_check(spec, params, x, y, h=h, state=state, per_tensor=per_tensor, seed=seed,
                                   grad_scale=2.0 if corrupt else 1.0)


def cmd_gradcheck(args):
    archs = list(GRADCHECK_NETS) if args.arch == "all" else [args.arch]
    seeds = range(args.seed or 0, (args.seed or 0) + args.seeds)
    worst, ok = 0.0, True
    for arch in archs:
        for seed, result in run_gradcheck(arch, seeds, args.h, corrupt=args.corrupt):
            passed = result.passed(args.threshold)
            ok &= passed
            worst = max(worst, result.max_relative_error)
            print(f"{arch} seed {seed}: max relative error {result.max_relative_error:.3e} "
                  f"({result.worst_param}, {result.checked} probed, {result.skipped} skipped) "
                  f"{'pass' if passed else 'FAIL'}")
    print(f"{'PASS' if ok else 'FAIL'}: worst relative error {worst:.3e} (threshold {args.threshold:g})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_render(args):
    path = Path(args.report)
    try:
        payload = json.loads(path.read_text())
        reports = [EvalReport.from_dict(r) for r in payload["reports"]]
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    if args.target is not None:
        reports = [r for r in reports if r.target == args.target]
    if args.delta_ts is not None:
        reports = [r for r in reports if r.delta_ts == args.delta_ts]
    if not reports:
        raise ConfigError("no report matches the requested target / delta_ts")
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    text = "\n".join(render_text(r) for r in reports)
    _write(out / "render.txt", text)
    _write(out / "render.svg", render_svg(reports[-1]))
    print(text, end="")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config")
    common.add_argument("--out", help="output root directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--workers", type=int, default=1, help="parallel trainings for sweep")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="backdoorlab", description="Label-consistent backdoor poisoning lab.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("poison", parents=[common], help="write the poisoned training set and record")
    sub.add_parser("train", parents=[common], help="poison, train and save a checkpoint")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", help="defaults to <out>/<name>/checkpoint.bin")
    sub.add_parser("sweep", parents=[common], help="train one model per grid cell and tabulate ASR")
    gc = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of backprop")
    gc.add_argument("--arch", choices=["all", *GRADCHECK_NETS], default="all")
    gc.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --seed")
    gc.add_argument("--h", type=float, default=1e-4, help="finite-difference step")
    gc.add_argument("--threshold", type=float, default=1e-5)
    gc.add_argument("--corrupt", action="store_true", help="double the analytic gradient (negative control)")
    rd = sub.add_parser("render", parents=[common], help="text and SVG views of report.json")
    rd.add_argument("--report", required=True)
    rd.add_argument("--target", type=int)
    rd.add_argument("--delta-ts", type=float)
    return parser


def _dispatch(args):
    if args.command == "gradcheck":
        return cmd_gradcheck(args)
    if args.command == "render":
        return cmd_render(args)
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return {"poison": cmd_poison, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}[args.command](cfg, args)


def main(argv=None):
    args = build_parser().parse_args(argv)
    # INFO records always reach the run.log sidecar; stderr only sees them with -v
    logging.getLogger().setLevel(logging.INFO)
    if args.verbose and not logging.getLogger().handlers:
        logging.basicConfig(format="%(asctime)s %(message)s")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FormatError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
