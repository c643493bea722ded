"""Run configuration: flat key=value files, task presets, seed derivation.

Config files are UTF-8 text, one `key = value` per line, `#` starts a
comment. Keys are dotted (`lgan.epochs = 100`). Unknown keys are errors.

All randomness in a run flows from the single `seed`: stage seeds are
derived as derive_seed(seed, stage_name) = first 8 bytes of
sha256(b"<seed>:<stage_name>"), little-endian. Stage names are fixed
strings ("split", "train", "fold3", ...), so runs are reproducible and
stages are insensitive to each other's draw counts.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .lockgan import LganConfig

TASKS = ("pva-binary-bsa", "pva-binary-dta", "pva-multiclass",
         "ecg-binary", "ecg-multiclass")

# published feature lists for the two binary breath tasks (canonical names;
# the peak-flow features are maxF / minF)
FEATURE_PRESETS = {
    "pva-binary-bsa": ["TVi", "TVe", "eTime", "iTime", "maxF", "minF", "ipAUC", "epAUC"],
    "pva-binary-dta": ["I:E ratio", "inst_RR", "tve:tvi ratio", "iTime", "eTime",
                       "TVi", "TVe", "ipAUC"],
}

TASK_DEFAULT_PREV = {"pva-binary-bsa": 2, "pva-binary-dta": 2, "pva-multiclass": 1,
                     "ecg-binary": 0, "ecg-multiclass": 0}


def derive_seed(seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def parse_config_text(text: str) -> dict[str, str]:
    """key = value lines -> flat string mapping."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config_file(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


@dataclass
class RunConfig:
    task: str = "pva-binary-bsa"
    seed: int = 0
    out_dir: str = "out"
    report_format: str = "text"  # text | kv (kv files are always written too)
    data_path: str | None = None

    synth_n: int = 2000
    synth_anomaly_fraction: float = 0.3
    synth_patients: int = 10

    feature_preset: str = "auto"  # auto | all | mi-top10 | comma list of names
    prev_breaths: int = -1        # -1 resolves to the task default
    rank_method: str = "mi"
    length_mode: str = "truncate"

    resample_method: str = "bsmote"  # bsmote | smote | none
    resample_k: int = 5
    resample_m: int = 10
    resample_ratio: float = 1.0

    test_fraction: float = 0.1
    kfold: int = 5
    collapse_mapping: str = "row-fn"

    lgan: LganConfig = field(default_factory=LganConfig)

    stats_algorithms: list[str] = field(default_factory=list)  # e.g. ["lgan", "disc-only"]
    stats_replicates: int = 10
    stats_alpha: float = 0.05
    stats_epochs: int = 0  # 0 -> lgan.epochs

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        if self.report_format not in ("text", "kv"):
            raise ConfigError("format must be text or kv")
        if self.prev_breaths == -1:
            self.prev_breaths = TASK_DEFAULT_PREV[self.task]
        if self.prev_breaths not in (0, 1, 2, 3):
            raise ConfigError("prev-breaths must be 0..3")
        if self.task.startswith("ecg") and self.prev_breaths != 0:
            raise ConfigError("previous-breath augmentation applies to pva tasks only")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("split.test_fraction must be in (0, 1)")
        if self.kfold < 0 or self.kfold == 1:
            raise ConfigError("split.kfold must be 0 (disabled) or >= 2")
        if self.resample_method not in ("bsmote", "smote", "none"):
            raise ConfigError(f"unknown resample method {self.resample_method!r}")
        if self.collapse_mapping not in ("row-fn", "conventional"):
            raise ConfigError(f"unknown collapse mapping {self.collapse_mapping!r}")
        unknown = [a for a in self.stats_algorithms if a not in ("lgan", "disc-only")]
        if unknown:
            raise ConfigError(f"unknown stats algorithms: {', '.join(unknown)}")
        if not 0.0 < self.stats_alpha < 1.0:
            raise ConfigError("stats.alpha must be in (0, 1)")


# mapping of config-file keys to RunConfig / LganConfig attributes
_KEYMAP = {
    "task": ("task", str),
    "seed": ("seed", int),
    "out": ("out_dir", str),
    "format": ("report_format", str),
    "data": ("data_path", str),
    "synth.n": ("synth_n", int),
    "synth.anomaly_fraction": ("synth_anomaly_fraction", float),
    "synth.patients": ("synth_patients", int),
    "features.preset": ("feature_preset", str),
    "features.prev_breaths": ("prev_breaths", int),
    "features.rank_method": ("rank_method", str),
    "features.length_mode": ("length_mode", str),
    "resample.method": ("resample_method", str),
    "resample.k": ("resample_k", int),
    "resample.m": ("resample_m", int),
    "resample.ratio": ("resample_ratio", float),
    "split.test_fraction": ("test_fraction", float),
    "split.kfold": ("kfold", int),
    "eval.collapse_mapping": ("collapse_mapping", str),
    "stats.replicates": ("stats_replicates", int),
    "stats.alpha": ("stats_alpha", float),
    "stats.epochs": ("stats_epochs", int),
}

_LGAN_KEYMAP = {
    "lgan.epochs": ("epochs", int),
    "lgan.batch": ("batch", int),
    "lgan.d_pretrain_epochs": ("d_pretrain_epochs", int),
    "lgan.d_steps": ("d_steps", int),
    "lgan.g_steps": ("g_steps", int),
    "lgan.lambda_info": ("lambda_info", float),
    "lgan.generator_loss": ("generator_loss_variant", str),
    "lgan.class_supervision": ("class_supervision", str),
    "lgan.class_loss_weight": ("class_loss_weight", float),
    "lgan.noise_dim": ("noise_dim", int),
    "lgan.gen_channels": ("gen_channels", int),
    "lgan.disc_channels": ("disc_channels", int),
    "lgan.disc_repeat": ("disc_repeat", int),
}

_OPT_FIELDS = {"rule": str, "learning_rate": float, "momentum": float, "l2": float,
               "beta1": float, "beta2": float, "eps": float, "rho": float}


def build_run_config(mapping: dict[str, str], overrides: dict | None = None) -> RunConfig:
    """RunConfig from a parsed key/value mapping plus CLI overrides."""
    kwargs: dict = {}
    lgan_kwargs: dict = {}
    d_opt: dict = {}
    g_opt: dict = {}
    for key, raw in mapping.items():
        try:
            if key in _KEYMAP:
                attr, cast = _KEYMAP[key]
                kwargs[attr] = cast(raw)
            elif key in _LGAN_KEYMAP:
                attr, cast = _LGAN_KEYMAP[key]
                lgan_kwargs[attr] = cast(raw)
            elif key == "stats.algorithms":
                kwargs["stats_algorithms"] = [a.strip() for a in raw.split(",") if a.strip()]
            elif key.startswith("lgan.d_optimizer.") or key.startswith("lgan.g_optimizer."):
                side, name = key.split(".", 2)[1], key.rsplit(".", 1)[1]
                if name not in _OPT_FIELDS:
                    raise ConfigError(f"unknown optimizer field {name!r}")
                target = d_opt if side == "d_optimizer" else g_opt
                target[name] = _OPT_FIELDS[name](raw) if name != "rule" else raw
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"config key {key!r}: bad value {raw!r} ({exc})") from None
    if d_opt:
        base = dict(LganConfig().d_optimizer)
        base.update(d_opt)
        lgan_kwargs["d_optimizer"] = base
    if g_opt:
        base = dict(LganConfig().g_optimizer)
        base.update(g_opt)
        lgan_kwargs["g_optimizer"] = base
    if overrides:
        for k, v in overrides.items():
            if v is None:
                continue
            if k.startswith("lgan."):
                lgan_kwargs[k.split(".", 1)[1]] = v
            else:
                kwargs[k] = v
    if "seed" in kwargs and "seed" not in lgan_kwargs:
        lgan_kwargs["seed"] = kwargs["seed"]
    kwargs["lgan"] = LganConfig(**lgan_kwargs)
    return RunConfig(**kwargs)


def render_config_kv(config: RunConfig) -> str:
    """Deterministic echo of the resolved configuration.

    out_dir is where the reports land, not part of the run's semantics, so
    it is omitted: two runs differing only in output location emit identical
    bytes.
    """
    lines = []
    for f in sorted(fields(config), key=lambda f: f.name):
        if f.name in ("lgan", "out_dir"):
            continue
        lines.append(f"run.{f.name} = {getattr(config, f.name)!r}")
    for f in sorted(fields(config.lgan), key=lambda f: f.name):
        lines.append(f"lgan.{f.name} = {getattr(config.lgan, f.name)!r}")
    return "\n".join(lines) + "\n"
