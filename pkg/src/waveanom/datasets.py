"""Dataset file formats, loaders, and synthetic desk-scale generators.

Breath metadata files are CSV with a header naming the feature columns plus
`patient_id` and `label` (Normal / BSA / DTA). ECG files are headerless CSV:
up to 187 samples per row followed by an integer class label; rows are
normalized to 144 samples on load.

The synthetic generators exist so the full pipeline can run without any
clinical data: pva-like records are metadata features computed from
parameterized flow waveforms (sinusoid-plus-plateau inspiration, exponential
expiration), with the breath-stacking class shortening the expiratory phase
and the double-trigger class firing two inspirations in one cycle; ecg-like
records are template beats with class-specific morphology changes.
"""
from __future__ import annotations

import csv

import numpy as np

from .errors import DataError
from .features import FeatureMatrix, normalize_length

PVA_FEATURES = ["TVi", "TVe", "iTime", "eTime", "maxF", "minF",
                "ipAUC", "epAUC", "I:E ratio", "inst_RR", "tve:tvi ratio"]
PVA_CLASSES = ["Normal", "BSA", "DTA"]
MITBIH_CLASSES = ["N", "S", "V", "F", "Q"]
PTB_CLASSES = ["normal", "abnormal"]

SAMPLE_RATE = 50.0  # Hz of the flow waveform
_DT = 1.0 / SAMPLE_RATE


def load_breath_csv(path) -> FeatureMatrix:
    """Typed matrix from a breath metadata file; group ids = patient_id."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    for required in ("patient_id", "label", *PVA_FEATURES):
        if required not in header:
            raise DataError(f"{path}: missing required column {required!r}")
    feature_cols = [c for c in header if c not in ("patient_id", "label")]
    col_pos = [header.index(c) for c in feature_cols]
    pid_idx = header.index("patient_id")
    label_idx = header.index("label")
    values = np.empty((len(rows), len(feature_cols)))
    labels = np.empty(len(rows), dtype=np.int64)
    groups = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        label = row[label_idx]
        if label not in PVA_CLASSES:
            raise DataError(f"{path}: row {r + 2} has unknown label {label!r}")
        labels[r] = PVA_CLASSES.index(label)
        groups.append(row[pid_idx])
        for c, col in enumerate(feature_cols):
            cell = row[col_pos[c]]
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {r + 2}, column {col!r}: "
                                f"unparseable value {cell!r}") from None
            if not np.isfinite(v):
                raise DataError(f"{path}: row {r + 2}, column {col!r}: non-finite value")
            values[r, c] = v
    return FeatureMatrix(column_names=feature_cols, values=values, labels=labels,
                         class_names=list(PVA_CLASSES), group_ids=np.array(groups))


def write_breath_csv(matrix: FeatureMatrix, path):
    """17-significant-digit decimal serialization: load() restores bit-exactly."""
    groups = (matrix.group_ids if matrix.group_ids is not None
              else np.array(["p0"] * matrix.n_rows))
    names = matrix.class_names or PVA_CLASSES
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "label", *matrix.column_names])
        for r in range(matrix.n_rows):
            writer.writerow([str(groups[r]), names[int(matrix.labels[r])],
                             *[format(v, ".17g") for v in matrix.values[r]]])


def load_ecg_csv(path, label_set: str = "mitbih", target: int = 144,
                 length_mode: str = "truncate") -> FeatureMatrix:
    """Headerless sample rows + trailing integer label, normalized to `target`."""
    class_names = {"mitbih": MITBIH_CLASSES, "ptb": PTB_CLASSES}.get(label_set)
    if class_names is None:
        raise DataError(f"unknown ECG label set {label_set!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"{path}: empty file")
    values = np.empty((len(rows), target))
    labels = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        try:
            samples = np.array([float(x) for x in row[:-1]])
            label_code = int(float(row[-1]))
        except ValueError:
            raise DataError(f"{path}: row {r + 1}: non-numeric cell") from None
        if not np.all(np.isfinite(samples)):
            raise DataError(f"{path}: row {r + 1}: non-finite sample")
        if not 0 <= label_code < len(class_names):
            raise DataError(f"{path}: row {r + 1}: unknown label code {label_code}")
        values[r] = normalize_length(samples, target, mode=length_mode)
        labels[r] = label_code
    return FeatureMatrix(column_names=[f"s{i:03d}" for i in range(target)],
                         values=values, labels=labels, class_names=list(class_names))


def write_ecg_csv(matrix: FeatureMatrix, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for r in range(matrix.n_rows):
            writer.writerow([*[format(v, ".17g") for v in matrix.values[r]],
                             int(matrix.labels[r])])


# ---------------------------------------------------------------------------
# synthetic generators


def trapezoid_area(y: np.ndarray, dx: float) -> float:
    """Trapezoidal rule, written out longhand (the tests integrate independently)."""
    return float((0.5 * (y[:-1] + y[1:]) * dx).sum())


def _breath_flow(kind: str, rng: np.random.Generator, pace: float, strength: float):
    """One breath cycle's flow samples at 50 Hz. Positive = inspiration."""
    def inspiration(duration, peak):
        t = np.arange(0.0, duration, _DT)
        rise_end = 0.4 * duration
        flow = np.where(t < rise_end,
                        peak * np.sin(0.5 * np.pi * t / rise_end),
                        peak)
        return flow

    def expiration(duration, peak):
        t = np.arange(0.0, duration, _DT)
        return -peak * np.exp(-3.0 * t / duration)

    peak_i = strength * rng.uniform(40.0, 60.0)
    peak_e = strength * rng.uniform(30.0, 50.0)
    if kind == "Normal":
        parts = [inspiration(pace * rng.uniform(0.8, 1.2), peak_i),
                 expiration(pace * rng.uniform(1.8, 2.6), peak_e)]
    elif kind == "BSA":
        # incomplete exhalation: the expiratory phase is cut short
        parts = [inspiration(pace * rng.uniform(0.8, 1.2), peak_i),
                 expiration(pace * rng.uniform(0.45, 0.8), 0.7 * peak_e)]
    elif kind == "DTA":
        # a second ventilator breath fires before the exhalation happens
        parts = [inspiration(pace * rng.uniform(0.7, 1.0), peak_i),
                 expiration(pace * rng.uniform(0.12, 0.2), 0.4 * peak_e),
                 inspiration(pace * rng.uniform(0.7, 1.0), 0.9 * peak_i),
                 expiration(pace * rng.uniform(1.6, 2.4), peak_e)]
    else:
        raise DataError(f"unknown breath class {kind!r}")
    flow = np.concatenate(parts)
    return flow + rng.normal(0.0, 0.4, size=flow.size)


def breath_features(flow: np.ndarray) -> dict[str, float]:
    """Metadata features of one flow cycle, in PVA_FEATURES order."""
    pos = flow > 0
    neg = flow < 0
    tvi = float(flow[pos].sum() * _DT)
    tve = float(-flow[neg].sum() * _DT)
    i_time = float(pos.sum() * _DT)
    e_time = float(neg.sum() * _DT)
    return {
        "TVi": tvi,
        "TVe": tve,
        "iTime": i_time,
        "eTime": e_time,
        "maxF": float(flow.max()),
        "minF": float(flow.min()),
        "ipAUC": trapezoid_area(np.clip(flow, 0.0, None), _DT),
        "epAUC": trapezoid_area(np.clip(-flow, 0.0, None), _DT),
        "I:E ratio": i_time / e_time if e_time > 0 else 0.0,
        "inst_RR": 60.0 / (i_time + e_time),
        "tve:tvi ratio": tve / tvi if tvi > 0 else 0.0,
    }


def _ecg_beat(kind: str, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(144.0)

    def bump(center, width, amp):
        return amp * np.exp(-0.5 * ((t - center) / width) ** 2)

    p = bump(30, 6, 0.12)
    qrs = bump(60, 1.6, -0.15) + bump(64, 2.2, 1.0) + bump(69, 2.0, -0.25)
    t_wave = bump(100, 10, 0.30)
    if kind == "N":
        beat = p + qrs + t_wave
    elif kind == "S":
        # premature supraventricular: early, small P and compressed timing
        beat = bump(18, 5, 0.06) + bump(52, 2.2, 0.95) + bump(57, 2, -0.22) + bump(88, 9, 0.28)
    elif kind == "V":
        # ventricular: wide bizarre QRS, no P wave, inverted T
        beat = bump(62, 6, 0.85) + bump(74, 7, -0.45) + bump(105, 12, -0.25)
    elif kind == "F":
        normal = p + qrs + t_wave
        ventric = bump(62, 6, 0.85) + bump(74, 7, -0.45) + bump(105, 12, -0.25)
        beat = 0.5 * normal + 0.5 * ventric
    elif kind == "Q":
        # paced: square pulse then broad depolarization
        beat = np.where((t > 55) & (t < 62), 0.7, 0.0) + bump(80, 14, 0.4)
    elif kind == "abnormal":
        # myocardial-infarction-like ST elevation with T inversion
        st = np.where((t > 70) & (t < 95), 0.25, 0.0)
        beat = p + qrs + st - bump(100, 10, 0.22)
    else:
        raise DataError(f"unknown beat class {kind!r}")
    beat = beat * rng.uniform(0.9, 1.1)
    beat += 0.02 * np.sin(2 * np.pi * t / 144.0 + rng.uniform(0, 2 * np.pi))
    return beat + rng.normal(0.0, 0.02, size=144)


def synth_dataset(kind: str, n: int, anomaly_fraction: float = 0.3, seed: int = 0,
                  patients: int = 10, anomaly_classes: tuple | None = None) -> FeatureMatrix:
    """Seeded synthetic dataset with imbalanced class priors.

    pva-like rows are breath metadata (PVA_FEATURES columns, labels from
    Normal/BSA/DTA, patient group ids); ecg-like rows are 144-sample beats.
    """
    if not 0.0 < anomaly_fraction < 1.0:
        raise DataError("anomaly_fraction must be in (0, 1)")
    if kind not in ("pva-like", "ecg-like"):
        raise DataError(f"unknown synthetic kind {kind!r}")
    rng = np.random.default_rng(seed)
    n_anomalous = int(round(n * anomaly_fraction))
    if n_anomalous < 1 or n - n_anomalous < 1:
        raise DataError(f"n={n} too small to hold both classes at fraction {anomaly_fraction}")

    if kind == "pva-like":
        anomaly_classes = anomaly_classes or ("BSA", "DTA")
        class_names = list(PVA_CLASSES)
        kinds = ["Normal"] * (n - n_anomalous)
        kinds += [anomaly_classes[i % len(anomaly_classes)] for i in range(n_anomalous)]
        rng.shuffle(kinds)
        pace = rng.uniform(0.9, 1.1, size=patients)
        strength = rng.uniform(0.85, 1.15, size=patients)
        per_patient = [[] for _ in range(patients)]
        for i, k in enumerate(kinds):
            per_patient[i % patients].append(k)
        values, labels, groups = [], [], []
        for p in range(patients):
            for k in per_patient[p]:
                flow = _breath_flow(k, rng, pace[p], strength[p])
                feats = breath_features(flow)
                values.append([feats[name] for name in PVA_FEATURES])
                labels.append(PVA_CLASSES.index(k))
                groups.append(f"p{p:02d}")
        return FeatureMatrix(column_names=list(PVA_FEATURES),
                             values=np.array(values), labels=np.array(labels),
                             class_names=class_names, group_ids=np.array(groups))

    anomaly_classes = anomaly_classes or ("S", "V", "F", "Q")
    class_names = list(PTB_CLASSES) if anomaly_classes == ("abnormal",) else list(MITBIH_CLASSES)
    kinds = ["N" if class_names == MITBIH_CLASSES else "normal"] * (n - n_anomalous)
    kinds += [anomaly_classes[i % len(anomaly_classes)] for i in range(n_anomalous)]
    rng.shuffle(kinds)
    values = np.empty((n, 144))
    labels = np.empty(n, dtype=np.int64)
    for i, k in enumerate(kinds):
        beat_kind = "N" if k in ("N", "normal") else k
        values[i] = _ecg_beat(beat_kind, rng)
        labels[i] = class_names.index(k)
    return FeatureMatrix(column_names=[f"s{i:03d}" for i in range(144)],
                         values=values, labels=labels, class_names=class_names)
