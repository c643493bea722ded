"""Config file parsing, key mapping, seed derivation."""
import pytest

from waveanom.config import (FEATURE_PRESETS, build_run_config, derive_seed,
                             parse_config_text, render_config_kv)
from waveanom.errors import ConfigError


class TestParser:
    def test_basic_lines_and_comments(self):
        text = """
        # a comment
        task = pva-binary-dta
        seed = 42   # trailing comment
        lgan.epochs = 200

        split.kfold = 0
        """
        got = parse_config_text(text)
        assert got == {"task": "pva-binary-dta", "seed": "42",
                       "lgan.epochs": "200", "split.kfold": "0"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("task pva-binary-bsa")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("seed = 1\nseed = 2")


class TestBuild:
    def test_defaults(self):
        cfg = build_run_config({})
        assert cfg.task == "pva-binary-bsa"
        assert cfg.prev_breaths == 2  # task default: previous two
        assert cfg.lgan.epochs == 100
        assert cfg.lgan.d_optimizer == {"rule": "adam", "learning_rate": 1e-4}
        assert cfg.lgan.g_optimizer["rule"] == "sgd_momentum"
        assert cfg.lgan.g_optimizer["momentum"] == 0.6
        assert cfg.lgan.g_optimizer["l2"] == 0.1

    def test_task_default_prev_breaths(self):
        assert build_run_config({"task": "pva-multiclass"}).prev_breaths == 1
        assert build_run_config({"task": "ecg-binary"}).prev_breaths == 0

    def test_optimizer_keys(self):
        cfg = build_run_config({"lgan.d_optimizer.learning_rate": "0.003",
                                "lgan.g_optimizer.rule": "adam"})
        assert cfg.lgan.d_optimizer["learning_rate"] == 0.003
        assert cfg.lgan.d_optimizer["rule"] == "adam"
        assert cfg.lgan.g_optimizer["rule"] == "adam"

    def test_seed_propagates_to_lgan(self):
        cfg = build_run_config({"seed": "77"})
        assert cfg.seed == 77
        assert cfg.lgan.seed == 77

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            build_run_config({"lgan.warmup": "3"})

    def test_bad_value_names_key(self):
        with pytest.raises(ConfigError, match="'seed'"):
            build_run_config({"seed": "abc"})

    def test_unknown_task(self):
        with pytest.raises(ConfigError, match="unknown task"):
            build_run_config({"task": "speech"})

    def test_prev_breaths_rejected_for_ecg(self):
        with pytest.raises(ConfigError):
            build_run_config({"task": "ecg-binary", "features.prev_breaths": "2"})

    def test_stats_algorithms_list(self):
        cfg = build_run_config({"stats.algorithms": "lgan, disc-only"})
        assert cfg.stats_algorithms == ["lgan", "disc-only"]
        with pytest.raises(ConfigError):
            build_run_config({"stats.algorithms": "lgan, mystery"})

    def test_overrides_beat_file(self):
        cfg = build_run_config({"seed": "1", "task": "pva-binary-bsa"},
                               overrides={"seed": 9, "lgan.epochs": 50})
        assert cfg.seed == 9
        assert cfg.lgan.epochs == 50

    def test_presets_cover_binary_tasks(self):
        assert len(FEATURE_PRESETS["pva-binary-bsa"]) == 8
        assert len(FEATURE_PRESETS["pva-binary-dta"]) == 8
        assert "maxF" in FEATURE_PRESETS["pva-binary-bsa"]
        assert "I:E ratio" in FEATURE_PRESETS["pva-binary-dta"]

    def test_render_kv_is_deterministic(self):
        a = render_config_kv(build_run_config({"seed": "3"}))
        b = render_config_kv(build_run_config({"seed": "3"}))
        assert a == b
        assert "lgan.epochs = 100" in a


class TestDeriveSeed:
    def test_deterministic_and_stage_sensitive(self):
        assert derive_seed(5, "split") == derive_seed(5, "split")
        assert derive_seed(5, "split") != derive_seed(5, "train")
        assert derive_seed(5, "split") != derive_seed(6, "split")

    def test_u64_range(self):
        for stage in ("split", "train", "fold0"):
            s = derive_seed(123, stage)
            assert 0 <= s < 2 ** 64
