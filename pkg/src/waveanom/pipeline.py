"""End-to-end pipeline: data -> split -> features -> resample -> train -> evaluate.

Order of operations and leakage rules:
  1. load or synthesize the task's dataset, filtered/relabelled per task
  2. stratified train/test split (seeded)
  3. feature selection resolved on the TRAINING portion only
  4. previous-breath augmentation, applied to each portion separately
  5. per-column standardization fitted on the training portion
  6. resampling (B-SMOTE by default) applied to the training portion only;
     the test portion is never resampled, and synthetic points never enter it
  7. k-fold evaluation over the training portion (each fold resampled on its
     own training side), then a final model trained on the full training
     portion and scored on the held-out test split
  8. reports: model file, metrics, loss history, resolved config, and the
     ANOVA/Tukey tables when multiple algorithms are configured

Every output file is deterministic for a fixed config (no timestamps).
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import evaluation, stats
from .config import FEATURE_PRESETS, RunConfig, derive_seed, render_config_kv
from .datasets import load_breath_csv, load_ecg_csv, synth_dataset
from .errors import DataError
from .features import (FeatureMatrix, augment_previous, rank_features,
                       standardize)
from .lockgan import (LganConfig, RecordLayout, classify, classify_disc_only,
                      save_model, train_disc_classifier, train_lgan)
from .resampling import NoDangerPointsError, bsmote_resample, smote

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunResult:
    out_dir: str
    files: dict[str, str]
    test_metrics: dict
    overall_accuracy: float
    fold_accuracies: list[float]
    train_row_ids: list
    test_row_ids: list
    notes: list[str] = field(default_factory=list)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


@_stage("load")
def _load_task_data(config: RunConfig) -> FeatureMatrix:
    task = config.task
    if task.startswith("pva"):
        if config.data_path:
            matrix = load_breath_csv(config.data_path)
        else:
            anomaly = {"pva-binary-bsa": ("BSA",), "pva-binary-dta": ("DTA",),
                       "pva-multiclass": ("BSA", "DTA")}[task]
            matrix = synth_dataset("pva-like", config.synth_n,
                                   config.synth_anomaly_fraction,
                                   seed=derive_seed(config.seed, "synth"),
                                   patients=config.synth_patients,
                                   anomaly_classes=anomaly)
        if task == "pva-binary-bsa":
            return _binary_view(matrix, keep=("Normal", "BSA"))
        if task == "pva-binary-dta":
            return _binary_view(matrix, keep=("Normal", "DTA"))
        return matrix
    label_set = "ptb" if task == "ecg-binary" else "mitbih"
    if config.data_path:
        return load_ecg_csv(config.data_path, label_set=label_set,
                            length_mode=config.length_mode)
    anomaly = ("abnormal",) if task == "ecg-binary" else ("S", "V", "F", "Q")
    return synth_dataset("ecg-like", config.synth_n, config.synth_anomaly_fraction,
                         seed=derive_seed(config.seed, "synth"),
                         anomaly_classes=anomaly)


def _binary_view(matrix: FeatureMatrix, keep: tuple[str, str]) -> FeatureMatrix:
    ids = [matrix.class_names.index(name) for name in keep]
    mask = np.isin(matrix.labels, ids)
    sub = matrix.take_rows(np.flatnonzero(mask))
    relabel = {old: new for new, old in enumerate(ids)}
    sub.labels = np.array([relabel[int(v)] for v in sub.labels], dtype=np.int64)
    sub.class_names = list(keep)
    return sub


@_stage("select-features")
def _select_features(train: FeatureMatrix, full: FeatureMatrix, config: RunConfig):
    """Resolve the feature set on the training portion; returns (matrix, names)."""
    preset = config.feature_preset
    if preset == "auto":
        preset = {"pva-binary-bsa": "pva-binary-bsa", "pva-binary-dta": "pva-binary-dta",
                  "pva-multiclass": "mi-top10"}.get(config.task, "all")
    if preset == "all":
        return full, list(full.column_names)
    if preset in FEATURE_PRESETS:
        names = FEATURE_PRESETS[preset]
    elif preset == "mi-top10":
        scores = rank_features(train, config.rank_method)
        names = [s.name for s in scores[:10]]
    else:
        names = [n.strip() for n in preset.split(",") if n.strip()]
        missing = [n for n in names if n not in full.column_names]
        if missing:
            raise DataError(f"unknown feature(s) in preset: {', '.join(missing)}")
    return full.select(names), names


@_stage("resample")
def _resample_training(matrix: FeatureMatrix, config: RunConfig, seed: int, notes: list):
    if config.resample_method == "none":
        return matrix, 0
    counts = np.bincount(matrix.labels)
    minority = int(np.argmin(counts))
    rng = np.random.default_rng(seed)
    if config.resample_method == "bsmote":
        try:
            x, y, added = bsmote_resample(matrix.values, matrix.labels, minority,
                                          k=config.resample_k, m=config.resample_m,
                                          target_ratio=config.resample_ratio, rng=rng)
        except NoDangerPointsError:
            notes.append("bsmote found no danger points; fell back to plain smote")
            x, y, added = _plain_smote(matrix, minority, config, rng)
    else:
        x, y, added = _plain_smote(matrix, minority, config, rng)
    out = FeatureMatrix(
        column_names=list(matrix.column_names), values=x, labels=y,
        class_names=list(matrix.class_names),
        row_ids=np.concatenate([matrix.row_ids, -np.arange(1, added + 1)]))
    return out, added


def _plain_smote(matrix: FeatureMatrix, minority: int, config: RunConfig, rng):
    minority_rows = matrix.values[matrix.labels == minority]
    majority_count = int((matrix.labels != minority).sum())
    needed = int(round(config.resample_ratio * majority_count)) - len(minority_rows)
    if needed <= 0:
        return matrix.values.copy(), matrix.labels.copy(), 0
    per_point = -(-needed // len(minority_rows))
    synthetic = smote(minority_rows, k=min(config.resample_k, len(minority_rows) - 1),
                      amount=per_point, rng=rng)[:needed]
    x = np.vstack([matrix.values, synthetic])
    y = np.concatenate([matrix.labels, np.full(needed, minority, dtype=matrix.labels.dtype)])
    return x, y, needed


def apply_preprocessing(matrix: FeatureMatrix, preprocessing: dict) -> FeatureMatrix:
    """Reproduce a saved model's input transform on fresh data."""
    out = matrix.select(preprocessing["selected"])
    if preprocessing["prev_breaths"] > 0:
        out = augment_previous(out, preprocessing["prev_breaths"])
    mu = np.asarray(preprocessing["mu"])
    sigma = np.asarray(preprocessing["sigma"])
    out.values = (out.values - mu) / sigma
    return out


def _task_layout(config: RunConfig, base_width: int) -> RecordLayout:
    if config.task.startswith("ecg"):
        return RecordLayout(1, 12, 12, 1)
    return RecordLayout(config.prev_breaths + 1, 1, base_width, 1)


def _evaluate(model, matrix: FeatureMatrix, config: RunConfig, model_kind: str = "lgan"):
    if model_kind == "lgan":
        pred, _ = classify(model, matrix.values)
    else:
        pred, _ = classify_disc_only(model, matrix.values)
    cm = evaluation.confusion(pred, matrix.labels, matrix.class_names)
    per_class = {}
    for cid, name in enumerate(matrix.class_names):
        if not np.any(matrix.labels == cid) and not np.any(pred == cid):
            continue
        counts = evaluation.binary_collapse(cm, cid, mapping=config.collapse_mapping)
        per_class[name] = evaluation.metrics(counts)
    return cm, per_class, evaluation.multiclass_accuracy(cm)


def run_pipeline(config: RunConfig) -> RunResult:
    os.makedirs(config.out_dir, exist_ok=True)
    notes: list[str] = []
    files: dict[str, str] = {}

    data = _load_task_data(config)

    # the split fixes record identities first; every later stage honours it
    try:
        train_idx, test_idx = evaluation.train_test_split(
            data.n_rows, data.labels, config.test_fraction,
            seed=derive_seed(config.seed, "split"))
    except Exception as exc:
        raise StageError("split", exc) from exc

    data_sel, selected = _select_features(data.take_rows(train_idx), data, config)

    # augmentation runs over whole patient sequences so the previous-breath
    # columns are true temporal neighbours; rows are then dealt to their split
    # side by the identities fixed above (test labels never reach training)
    try:
        if config.prev_breaths > 0:
            data_sel = augment_previous(data_sel, config.prev_breaths)
    except Exception as exc:
        raise StageError("augment", exc) from exc
    train_id_set = set(train_idx.tolist())
    test_id_set = set(test_idx.tolist())
    train_m = data_sel.take_rows(
        [i for i, rid in enumerate(data_sel.row_ids.tolist()) if rid in train_id_set])
    test_m = data_sel.take_rows(
        [i for i, rid in enumerate(data_sel.row_ids.tolist()) if rid in test_id_set])

    try:
        _, mu, sigma = standardize(train_m.values)
        train_m.values = (train_m.values - mu) / sigma
        test_m.values = (test_m.values - mu) / sigma
    except Exception as exc:
        raise StageError("standardize", exc) from exc

    layout = _task_layout(config, base_width=len(selected))

    train_res, added = _resample_training(train_m, config,
                                          derive_seed(config.seed, "resample"), notes)
    test_ids = set(test_m.row_ids.tolist())
    train_ids = set(train_res.row_ids.tolist())
    if test_ids & train_ids:
        raise StageError("resample", DataError("test rows leaked into training data"))

    fold_accuracies: list[float] = []
    if config.kfold >= 2:
        try:
            plan = evaluation.kfold_split(train_m.n_rows, train_m.labels,
                                          k=config.kfold,
                                          seed=derive_seed(config.seed, "kfold"))
        except Exception as exc:
            raise StageError("kfold", exc) from exc
        for i, fold in enumerate(plan.folds):
            mask = np.ones(train_m.n_rows, dtype=bool)
            mask[fold] = False
            fold_train = train_m.take_rows(np.flatnonzero(mask))
            fold_val = train_m.take_rows(fold)
            fold_res, _ = _resample_training(fold_train, config,
                                             derive_seed(config.seed, f"fold{i}:resample"),
                                             notes)
            try:
                model_i = train_lgan(fold_res, config.lgan, layout=layout,
                                     rng=np.random.default_rng(
                                         derive_seed(config.seed, f"fold{i}:train")))
                _, _, acc = _evaluate(model_i, fold_val, config)
            except Exception as exc:
                raise StageError(f"fold{i}", exc) from exc
            fold_accuracies.append(acc)

    preprocessing = {
        "selected": list(selected),
        "prev_breaths": config.prev_breaths,
        "mu": mu.tolist(),
        "sigma": sigma.tolist(),
        "class_names": list(train_m.class_names),
    }
    try:
        model = train_lgan(train_res, config.lgan, layout=layout,
                           rng=np.random.default_rng(derive_seed(config.seed, "train")))
        model.preprocessing = preprocessing
    except Exception as exc:
        raise StageError("train", exc) from exc

    try:
        cm, per_class, overall = _evaluate(model, test_m, config)
    except Exception as exc:
        raise StageError("eval", exc) from exc

    try:
        model_path = os.path.join(config.out_dir, "model.lgm")
        save_model(model, model_path)
        files["model"] = model_path
        files.update(_write_reports(config, per_class, overall, fold_accuracies,
                                    model.history, notes))
    except Exception as exc:
        raise StageError("report", exc) from exc

    if len(config.stats_algorithms) >= 2:
        try:
            files.update(_stats_comparison(config, train_res, test_m, layout))
        except StageError:
            raise
        except Exception as exc:
            raise StageError("stats", exc) from exc

    return RunResult(out_dir=config.out_dir, files=files,
                     test_metrics=per_class, overall_accuracy=overall,
                     fold_accuracies=fold_accuracies,
                     train_row_ids=sorted(train_ids), test_row_ids=sorted(test_ids),
                     notes=notes)


def _write_reports(config, per_class, overall, fold_accuracies, history, notes):
    files = {}

    def emit(name, content):
        path = os.path.join(config.out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(content)
        files[name] = path

    emit("metrics.txt", evaluation.render_metrics_text(per_class, overall)
         + _fold_text(fold_accuracies) + _notes_text(notes))
    kv = evaluation.render_metrics_kv(per_class, overall)
    for i, acc in enumerate(fold_accuracies):
        kv += f"folds.fold{i}.accuracy = {acc!r}\n"
    emit("metrics.kv", kv)
    hist_kv = []
    for series, values in sorted(history.items()):
        for e, v in enumerate(values):
            hist_kv.append(f"history.{series}.{e} = {v!r}")
    emit("history.kv", "\n".join(hist_kv) + "\n")
    emit("config.kv", render_config_kv(config))
    return files


def _fold_text(accs):
    if not accs:
        return ""
    lines = [f"Fold {i} accuracy: {a:.6f}" for i, a in enumerate(accs)]
    lines.append(f"Fold mean accuracy: {float(np.mean(accs)):.6f}")
    return "\n".join(lines) + "\n"


def _notes_text(notes):
    return "".join(f"note: {n}\n" for n in notes)


def _stats_comparison(config: RunConfig, train_res: FeatureMatrix,
                      test_m: FeatureMatrix, layout: RecordLayout) -> dict:
    """Replicated per-algorithm accuracies -> one-way ANOVA + Tukey HSD."""
    epochs = config.stats_epochs or config.lgan.epochs
    lgan_cfg = LganConfig(**{**_lgan_dict(config.lgan), "epochs": epochs})
    groups: dict[str, list[float]] = {}
    for alg in config.stats_algorithms:
        accs = []
        for rep in range(config.stats_replicates):
            rng = np.random.default_rng(derive_seed(config.seed, f"stats:{alg}:{rep}"))
            if alg == "lgan":
                model = train_lgan(train_res, lgan_cfg, layout=layout, rng=rng)
                pred, _ = classify(model, test_m.values)
            else:
                model = train_disc_classifier(train_res, lgan_cfg, layout=layout, rng=rng)
                pred, _ = classify_disc_only(model, test_m.values)
            cm = evaluation.confusion(pred, test_m.labels, test_m.class_names)
            accs.append(evaluation.multiclass_accuracy(cm))
        groups[alg] = accs

    table = stats.one_way_anova(list(groups.values()))
    rows = stats.tukey_hsd(groups, alpha=config.stats_alpha)
    files = {}
    for name, content in [
        ("anova.txt", stats.render_anova_text(table)),
        ("anova.kv", stats.render_anova_kv(table)),
        ("tukey.txt", stats.render_tukey_text(rows)),
        ("tukey.kv", stats.render_tukey_kv(rows)),
        ("stats_groups.kv", "".join(
            f"group.{alg}.{i} = {a!r}\n" for alg, accs in sorted(groups.items())
            for i, a in enumerate(accs))),
    ]:
        path = os.path.join(config.out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(content)
        files[name] = path
    return files


def _lgan_dict(cfg: LganConfig) -> dict:
    from dataclasses import asdict
    return asdict(cfg)
