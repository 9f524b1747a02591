"""Flat key=value experiment configuration with typed validation.

Config files are plain text: one ``key=value`` per line, ``#`` comments and
blank lines ignored. Parsing validates every key and reports all offending
keys at once rather than stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

METHODS = ("segment-contrast", "instance-contrast", "random-init")
LOSS_COMPONENTS = ("ac", "sc", "jc")
CORRUPTION_MODES = ("none", "random", "semantic")


class ConfigError(ValueError):
    """One or more config keys failed validation; message lists them all."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs beyond the dataset contents.

    label_budget of None means every training label may be used; segment_len
    of None means half the instance length.
    """

    dataset: str = ""
    method: str = "segment-contrast"
    tau: float = 0.07
    learning_rate: float = 1e-3
    batch_size: int = 256
    pretrain_epochs: int = 240
    probe_epochs: int = 80
    finetune_epochs: int = 80
    label_budget: int | None = 5
    seeds: tuple[int, ...] = (0, 1, 2)
    encoder_widths: tuple[int, ...] = (32, 64, 64, 64)
    encoder_kernel: int = 5
    projector_hidden: int = 256
    projector_out: int = 128
    split_ratios: tuple[float, float, float] = (0.6, 0.1, 0.3)
    split_seed: int = 0
    segment_len: int | None = None
    random_crop: bool = False
    symmetric_anchors: bool = False
    loss_components: tuple[str, ...] = ("ac", "sc", "jc")
    augment_ops: tuple[str, ...] = ("mask", "scale", "shift", "rotate", "invert")
    activation_prob: float = 0.5
    corruption_mode: str = "none"
    corruption_p: float = 0.0
    corruption_freeze: bool = False
    device: str = "cpu"


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_or_none(text: str, none_word: str) -> int | None:
    return None if text.strip().lower() == none_word else int(text)


_PARSERS = {
    "dataset": str,
    "method": str,
    "tau": float,
    "learning_rate": float,
    "batch_size": int,
    "pretrain_epochs": int,
    "probe_epochs": int,
    "finetune_epochs": int,
    "label_budget": lambda t: _parse_int_or_none(t, "all"),
    "seeds": lambda t: tuple(int(s) for s in t.split(",") if s.strip() != ""),
    "encoder_widths": lambda t: tuple(int(s) for s in t.split(",") if s.strip() != ""),
    "encoder_kernel": int,
    "projector_hidden": int,
    "projector_out": int,
    "split_ratios": lambda t: tuple(float(s) for s in t.split(",")),
    "split_seed": int,
    "segment_len": lambda t: _parse_int_or_none(t, "none"),
    "random_crop": _parse_bool,
    "symmetric_anchors": _parse_bool,
    "loss_components": lambda t: tuple(s.strip() for s in t.split(",") if s.strip()),
    "augment_ops": lambda t: tuple(s.strip() for s in t.split(",") if s.strip()),
    "activation_prob": float,
    "corruption_mode": str,
    "corruption_p": float,
    "corruption_freeze": _parse_bool,
    "device": str,
}


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Return a list of human-readable problems; empty means valid."""
    problems = []
    if cfg.method not in METHODS:
        problems.append(f"method: {cfg.method!r} not in {METHODS}")
    if not cfg.tau > 0:
        problems.append(f"tau: must be > 0, got {cfg.tau}")
    if not cfg.learning_rate > 0:
        problems.append(f"learning_rate: must be > 0, got {cfg.learning_rate}")
    for key in ("batch_size", "pretrain_epochs", "probe_epochs", "finetune_epochs",
                "encoder_kernel", "projector_hidden", "projector_out"):
        if getattr(cfg, key) < 1:
            problems.append(f"{key}: must be >= 1, got {getattr(cfg, key)}")
    if cfg.label_budget is not None and cfg.label_budget < 1:
        problems.append(f"label_budget: must be >= 1 or 'all', got {cfg.label_budget}")
    if not cfg.seeds:
        problems.append("seeds: at least one seed required")
    if not cfg.encoder_widths:
        problems.append("encoder_widths: at least one width required")
    if len(cfg.split_ratios) != 3 or abs(sum(cfg.split_ratios) - 1.0) > 1e-9 \
            or any(r <= 0 for r in cfg.split_ratios):
        problems.append(f"split_ratios: need three positive values summing to 1, "
                        f"got {cfg.split_ratios}")
    if cfg.segment_len is not None and cfg.segment_len < 2:
        problems.append(f"segment_len: must be >= 2 or 'none', got {cfg.segment_len}")
    bad = [c for c in cfg.loss_components if c not in LOSS_COMPONENTS]
    if bad or not cfg.loss_components:
        problems.append(f"loss_components: need a non-empty subset of "
                        f"{LOSS_COMPONENTS}, got {cfg.loss_components}")
    if not 0.0 <= cfg.activation_prob <= 1.0:
        problems.append(f"activation_prob: must be in [0, 1], got {cfg.activation_prob}")
    if cfg.corruption_mode not in CORRUPTION_MODES:
        problems.append(f"corruption_mode: {cfg.corruption_mode!r} not in "
                        f"{CORRUPTION_MODES}")
    if not 0.0 <= cfg.corruption_p <= 1.0:
        problems.append(f"corruption_p: must be in [0, 1], got {cfg.corruption_p}")
    return problems


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse key=value lines on top of ``base`` (or the defaults).

    Raises ConfigError naming every unknown key, every unparsable value, and
    every failed validation rule in one message.
    """
    cfg = base if base is not None else ExperimentConfig()
    problems = []
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: not a key=value pair: {line!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        parser = _PARSERS.get(key)
        if parser is None:
            problems.append(f"{key}: unknown key")
            continue
        try:
            updates[key] = parser(value)
        except (ValueError, TypeError) as exc:
            problems.append(f"{key}: cannot parse {value!r} ({exc})")
    # Validate whatever did parse so one error names every problem at once.
    cfg = replace(cfg, **updates)
    problems += validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def load_config_file(path: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def config_to_lines(cfg: ExperimentConfig) -> list[str]:
    """Serialize so that parse_config_text round-trips the config."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            text = "all" if f.name == "label_budget" else "none"
        elif isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        lines.append(f"{f.name}={text}")
    return lines
