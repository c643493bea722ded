"""Command-line driver.

Subcommands: synth, preprocess, resample, select-features, train, eval,
stats, pipeline. Configuration resolves as defaults < --config file < flags.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import evaluation, stats
from .config import RunConfig, build_run_config, derive_seed, load_config_file
from .datasets import write_breath_csv, write_ecg_csv
from .errors import ConfigError, DataError, NumericalError
from .features import augment_previous, rank_features, standardize
from .lockgan import load_model
from .pipeline import StageError, _load_task_data, _resample_training, run_pipeline

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waveanom",
                                     description="Medical waveform anomaly detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="global seed (all stage seeds derive from it)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--task", choices=["pva-binary-bsa", "pva-binary-dta", "pva-multiclass",
                                          "ecg-binary", "ecg-multiclass"])
        p.add_argument("--prev-breaths", type=int, choices=[0, 1, 2, 3])
        p.add_argument("--epochs", type=int, choices=[50, 100, 200])
        p.add_argument("--format", choices=["text", "kv"], dest="report_format")
        return p

    p = common(sub.add_parser("synth", help="write a synthetic dataset CSV"))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--anomaly-fraction", type=float, default=None)

    common(sub.add_parser("preprocess", help="select features, augment, standardize; write CSV"))
    p = common(sub.add_parser("resample", help="rebalance the minority class; write CSV"))
    common(sub.add_parser("select-features", help="rank features and print scores"))
    common(sub.add_parser("train", help="train a model and save it"))

    p = common(sub.add_parser("eval", help="evaluate a saved model on a dataset"))
    p.add_argument("--model", required=True)

    p = common(sub.add_parser("stats", help="ANOVA + Tukey over a groups file"))
    p.add_argument("--groups", required=True,
                   help="kv file of group samples: lines '<group> = <float>'")
    p.add_argument("--alpha", type=float, default=0.05)

    common(sub.add_parser("pipeline", help="run the full pipeline"))
    return parser


def resolve_config(args) -> RunConfig:
    mapping = load_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "task": args.task,
        "prev_breaths": getattr(args, "prev_breaths", None),
        "report_format": getattr(args, "report_format", None),
        "lgan.epochs": getattr(args, "epochs", None),
    }
    if getattr(args, "n", None) is not None:
        overrides["synth_n"] = args.n
    if getattr(args, "anomaly_fraction", None) is not None:
        overrides["synth_anomaly_fraction"] = args.anomaly_fraction
    return build_run_config(mapping, overrides)


def _out_path(config: RunConfig, name: str) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    return os.path.join(config.out_dir, name)


def _write_matrix(matrix, config: RunConfig, name: str) -> str:
    path = _out_path(config, name)
    if config.task.startswith("pva"):
        write_breath_csv(matrix, path)
    else:
        write_ecg_csv(matrix, path)
    return path


def cmd_synth(args) -> int:
    config = resolve_config(args)
    matrix = _load_task_data(config)
    path = _write_matrix(matrix, config, "synthetic.csv")
    print(f"wrote {matrix.n_rows} rows to {path}")
    return 0


def cmd_preprocess(args) -> int:
    config = resolve_config(args)
    matrix = _load_task_data(config)
    from .pipeline import _select_features
    matrix, names = _select_features(matrix, matrix, config)
    if config.prev_breaths > 0:
        matrix = augment_previous(matrix, config.prev_breaths)
    std, _, _ = standardize(matrix.values)
    matrix.values = std
    path = _out_path(config, "preprocessed.csv")
    _write_processed_csv(matrix, path)
    print(f"selected features: {', '.join(names)}")
    print(f"wrote {matrix.n_rows} rows to {path}")
    return 0


def _write_processed_csv(matrix, path):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", *matrix.column_names])
        for r in range(matrix.n_rows):
            writer.writerow([int(matrix.labels[r]),
                             *[format(v, ".17g") for v in matrix.values[r]]])


def cmd_resample(args) -> int:
    config = resolve_config(args)
    matrix = _load_task_data(config)
    notes: list[str] = []
    out, added = _resample_training(matrix, config, derive_seed(config.seed, "resample"),
                                    notes)
    path = _out_path(config, "resampled.csv")
    _write_processed_csv(out, path)
    for n in notes:
        print(f"note: {n}")
    print(f"added {added} synthetic rows; wrote {out.n_rows} rows to {path}")
    return 0


def cmd_select_features(args) -> int:
    config = resolve_config(args)
    matrix = _load_task_data(config)
    scores = rank_features(matrix, config.rank_method)
    for s in scores:
        p = "" if s.p_value is None else f"  p={s.p_value:.3g}"
        print(f"{s.name}  {s.method}={s.score:.6g}{p}")
    return 0


def cmd_train(args) -> int:
    config = resolve_config(args)
    result = run_pipeline(config)
    print(f"model: {result.files['model']}")
    print(f"test accuracy: {result.overall_accuracy:.4f}")
    return 0


def cmd_eval(args) -> int:
    config = resolve_config(args)
    model = load_model(args.model)
    matrix = _load_task_data(config)
    from .pipeline import _evaluate, apply_preprocessing

    if model.preprocessing:
        matrix = apply_preprocessing(matrix, model.preprocessing)
    _, per_class, overall = _evaluate(model, matrix, config)
    render = (evaluation.render_metrics_kv if config.report_format == "kv"
              else evaluation.render_metrics_text)
    print(render(per_class, overall), end="")
    return 0


def cmd_stats(args) -> int:
    config = resolve_config(args)
    groups: dict[str, list[float]] = {}
    with open(args.groups, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{args.groups}: line {lineno}: expected '<group> = <float>'")
            name, value = (part.strip() for part in line.split("=", 1))
            try:
                groups.setdefault(name, []).append(float(value))
            except ValueError:
                raise DataError(f"{args.groups}: line {lineno}: bad float {value!r}") from None
    table = stats.one_way_anova(list(groups.values()))
    rows = stats.tukey_hsd(groups, alpha=args.alpha)
    if config.report_format == "kv":
        print(stats.render_anova_kv(table), end="")
        print(stats.render_tukey_kv(rows), end="")
    else:
        print(stats.render_anova_text(table), end="")
        print(stats.render_tukey_text(rows), end="")
    return 0


def cmd_pipeline(args) -> int:
    config = resolve_config(args)
    result = run_pipeline(config)
    for note in result.notes:
        print(f"note: {note}")
    print(f"reports in {result.out_dir}: {', '.join(sorted(result.files))}")
    print(f"test accuracy: {result.overall_accuracy:.4f}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "resample": cmd_resample,
    "select-features": cmd_select_features,
    "train": cmd_train,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StageError as exc:
        cause = exc.cause
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(cause, ConfigError):
            return EXIT_CONFIG
        if isinstance(cause, NumericalError):
            return EXIT_NUMERICAL
        return EXIT_DATA
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
