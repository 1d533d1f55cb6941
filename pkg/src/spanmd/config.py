"""Run configuration: flat JSON/TOML file plus CLI-flag overrides."""

from __future__ import annotations

import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .edit_queue import QueueConfig
from .editability import ClassifierKind, HeuristicRules
from .errors import ValidationError
from .executor import DEFAULT_PAD_TOKEN

ENDPOINT_ENV = "SPANMD_BACKBONE_ENDPOINT"


@dataclass
class RunConfig:
    classifier_kind: str = "oracle"           # oracle | heuristic | remote
    classifier_endpoint: Optional[str] = None
    header_frac: float = 0.05
    footer_frac: float = 0.05
    math_markers: Optional[str] = None        # string of marker characters
    font_size_delta: float = 2.0

    min_copy_chars: int = 5
    stop_sign_words: int = 3
    skip_window_words: int = 5

    max_new_tokens: int = 1024
    pad_token: str = DEFAULT_PAD_TOKEN

    backbone_kind: str = "scripted"           # scripted | remote
    backbone_endpoint: Optional[str] = None
    backbone_script: Optional[str] = None     # path; None = replay references

    batch_size: int = 1
    workers: int = 1
    out_dir: str = "out"
    seed: int = 0
    timeout_s: float = 30.0
    retries: int = 2

    def validate(self) -> None:
        if self.skip_window_words <= self.stop_sign_words:
            raise ValidationError(
                "skip_window_words must exceed stop_sign_words",
                rule="config")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1", rule="config")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1", rule="config")
        if self.classifier_kind not in ("oracle", "heuristic", "remote"):
            raise ValidationError(
                f"unknown classifier_kind {self.classifier_kind!r}",
                rule="config")
        if self.backbone_kind not in ("scripted", "remote"):
            raise ValidationError(
                f"unknown backbone_kind {self.backbone_kind!r}", rule="config")
        # instantiating surfaces range errors early
        self.queue_config()

    def queue_config(self) -> QueueConfig:
        return QueueConfig(min_copy_chars=self.min_copy_chars,
                           stop_sign_words=self.stop_sign_words,
                           skip_window_words=self.skip_window_words)

    def heuristic_rules(self) -> HeuristicRules:
        kwargs: dict[str, Any] = {
            "header_frac": self.header_frac,
            "footer_frac": self.footer_frac,
            "font_size_delta": self.font_size_delta,
        }
        if self.math_markers is not None:
            kwargs["math_markers"] = frozenset(self.math_markers)
        return HeuristicRules(**kwargs)

    def classifier(self) -> ClassifierKind:
        return ClassifierKind(self.classifier_kind)

    def effective_endpoint(self) -> Optional[str]:
        return os.environ.get(ENDPOINT_ENV) or self.backbone_endpoint


def load_config(path: Optional[str], overrides: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from an optional file plus overrides (flags win)."""
    values: dict[str, Any] = {}
    if path:
        p = Path(path)
        if p.suffix == ".toml":
            raw = tomllib.loads(p.read_text())
        else:
            raw = json.loads(p.read_text())
        if not isinstance(raw, dict):
            raise ValidationError("config file must hold a flat table",
                                  rule="config")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(
                f"unknown config keys: {sorted(unknown)}", rule="config")
        values.update(raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg
