"""Layered run configuration.

Values resolve in three layers: built-in defaults, then a config file,
then command-line overrides. Keys are flat dotted paths
(``backbone.channels``); the file format is one ``section.key = value``
assignment per line with ``#`` comments. Unknown keys are rejected, not
ignored. The fully resolved configuration is echoed into every output
directory so a run can always be reproduced.
"""

from __future__ import annotations

from pathlib import Path

from .backbone import BackboneConfig
from .errors import ConfigError
from .model import ModelConfig
from .objective import LossConfig

_BOOL = {"true": True, "false": False}

# key -> (type, default)
SCHEMA = {
    "model.joints": (int, 14),
    "model.precision": (str, "single"),
    "backbone.input_size": (int, 96),
    "backbone.feature_size": (int, 24),
    "backbone.channels": (int, 136),
    "backbone.depth": (int, 2),
    "backbone.stages": (int, 2),
    "backbone.pool": (str, "max"),
    "jgr.enabled": (bool, True),
    "jgr.graph": (str, "skeleton"),
    "jgr.topology": (str, "synth14"),
    "loss.delta": (float, 1.0),
    "loss.beta": (float, 0.0001),
    "loss.stages": (int, 2),
    "train.learning_rate": (float, 0.0001),
    "train.lr_decay": (float, 0.96),
    "train.weight_decay": (float, 0.00005),
    "train.batch_size": (int, 32),
    "train.epochs": (int, 10),
    "train.seed": (int, 1),
    "train.augment": (bool, True),
    "train.checkpoint_every": (int, 0),
    "augment.rotate_deg": (float, 180.0),
    "augment.scale_low": (float, 0.9),
    "augment.scale_high": (float, 1.1),
    "augment.translate_mm": (float, 10.0),
    "data.cube_mm": (float, 250.0),
    "data.fx": (float, 120.0),
    "data.fy": (float, 120.0),
    "data.cx": (float, 47.5),
    "data.cy": (float, 47.5),
    "eval.threshold_max_mm": (float, 80.0),
    "eval.threshold_step_mm": (float, 1.0),
}


def _parse_value(key, text, want):
    text = text.strip()
    if want is bool:
        if text.lower() not in _BOOL:
            raise ConfigError(f"{key}: expected true/false, got {text!r}")
        return _BOOL[text.lower()]
    if want is int:
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected integer, got {text!r}") from exc
    if want is float:
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected number, got {text!r}") from exc
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return f'"{value}"'


class RunConfig:
    """Resolved flat configuration with typed accessors."""

    def __init__(self, values=None):
        self._values = {k: d for k, (_, d) in SCHEMA.items()}
        for key, val in (values or {}).items():
            self.set(key, val)

    def set(self, key, value):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        want = SCHEMA[key][0]
        if isinstance(value, str) and want is not str:
            value = _parse_value(key, value, want)
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, want) or (want is int and isinstance(value, bool)):
            raise ConfigError(
                f"{key}: expected {want.__name__}, got {type(value).__name__}"
            )
        self._values[key] = value

    def __getitem__(self, key):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        return self._values[key]

    def as_dict(self):
        return dict(self._values)

    # ------------------------------------------------------------------
    def apply_file(self, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, text = line.partition("=")
            key = key.strip()
            try:
                self.set(key, text.strip())
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        return self

    def apply_overrides(self, overrides):
        for item in overrides or ():
            if "=" not in item:
                raise ConfigError(f"override must be key=value, got {item!r}")
            key, _, text = item.partition("=")
            self.set(key.strip(), text.strip())
        return self

    def dump(self):
        lines = [f"{k} = {_format_value(self._values[k])}" for k in sorted(self._values)]
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.dump())

    # ------------------------------------------------------------------
    def model_config(self):
        return ModelConfig(
            backbone=BackboneConfig(
                input_size=self["backbone.input_size"],
                feature_size=self["backbone.feature_size"],
                channels=self["backbone.channels"],
                depth=self["backbone.depth"],
                stages=self["backbone.stages"],
                pool=self["backbone.pool"],
            ),
            joints=self["model.joints"],
            graph=self["jgr.graph"],
            topology=self["jgr.topology"],
            jgr_enabled=self["jgr.enabled"],
            precision=self["model.precision"],
        )

    def loss_config(self):
        if self["loss.stages"] != self["backbone.stages"]:
            raise ConfigError(
                f"loss.stages ({self['loss.stages']}) must match backbone.stages "
                f"({self['backbone.stages']})"
            )
        return LossConfig(
            delta=self["loss.delta"],
            beta=self["loss.beta"],
            stages=self["loss.stages"],
        )


def load_config(path=None, overrides=None, seed=None):
    cfg = RunConfig()
    if path is not None:
        cfg.apply_file(path)
    cfg.apply_overrides(overrides)
    if seed is not None:
        cfg.set("train.seed", int(seed))
    return cfg
