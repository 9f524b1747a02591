"""Tests for config parsing, validation, and round-tripping."""

import pytest

from amcontrast.config import (ConfigError, ExperimentConfig, config_to_lines,
                               load_config_file, parse_config_text,
                               validate_config)


def test_defaults_are_valid():
    assert validate_config(ExperimentConfig()) == []


def test_round_trip_preserves_everything():
    cfg = ExperimentConfig(dataset="d", method="instance-contrast", tau=0.2,
                           label_budget=None, seeds=(4, 5),
                           encoder_widths=(8, 16), segment_len=32,
                           random_crop=True, symmetric_anchors=True,
                           loss_components=("jc",), activation_prob=0.25,
                           corruption_mode="random", corruption_p=0.5,
                           corruption_freeze=True)
    text = "\n".join(config_to_lines(cfg))
    assert parse_config_text(text) == cfg


def test_sentinel_words():
    cfg = parse_config_text("label_budget=all\nsegment_len=none\n")
    assert cfg.label_budget is None
    assert cfg.segment_len is None


def test_bool_parsing():
    assert parse_config_text("random_crop=true\n").random_crop is True
    assert parse_config_text("random_crop=false\n").random_crop is False
    with pytest.raises(ConfigError, match="random_crop"):
        parse_config_text("random_crop=maybe\n")


def test_comments_and_blanks_ignored():
    cfg = parse_config_text("# comment\n\ntau=0.1\n")
    assert cfg.tau == 0.1


def test_all_problems_reported_at_once():
    with pytest.raises(ConfigError) as err:
        parse_config_text("tau=-1\nmethod=bogus\nmystery=1\nbatch_size=0\n")
    message = str(err.value)
    for token in ("tau", "method", "mystery", "batch_size"):
        assert token in message
    assert message.count(";") == 3  # four problems, one message


def test_missing_equals_named_with_line_number():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("tau=0.1\nnot a pair\n")


def test_last_duplicate_wins():
    assert parse_config_text("tau=0.1\ntau=0.3\n").tau == 0.3


def test_load_config_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("tau=0.09\nseeds=7,8\n")
    cfg = load_config_file(str(path))
    assert cfg.tau == 0.09
    assert cfg.seeds == (7, 8)


def test_validation_rules():
    assert validate_config(ExperimentConfig(split_ratios=(0.5, 0.5, 0.1)))
    assert validate_config(ExperimentConfig(loss_components=()))
    assert validate_config(ExperimentConfig(loss_components=("xx",)))
    assert validate_config(ExperimentConfig(corruption_p=1.5))
    assert validate_config(ExperimentConfig(activation_prob=-0.1))
    assert validate_config(ExperimentConfig(label_budget=0))
    assert validate_config(ExperimentConfig(segment_len=1))
