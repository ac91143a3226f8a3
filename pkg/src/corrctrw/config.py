"""Declarative run configuration shared by all CLI commands (JSON or YAML)."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigurationError

COMMANDS = ("simulate", "experiment", "pde", "report")
OUTPUT_ENV = "CORRCTRW_OUTPUT_DIR"
DEFAULT_OUTPUT = "corrctrw_out"
SECTIONS = ("simulate", "experiment", "pde", "report")


@dataclass
class RunConfig:
    command: str
    master_seed: int = 0
    output_dir: Optional[str] = None
    workers: int = 1
    simulate: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    pde: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}", code="command_id",
                                     command=self.command)
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must be a 64-bit non-negative integer",
                                     code="master_seed", master_seed=self.master_seed)
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigurationError("workers must be a positive integer", code="workers")

    def resolved_output_dir(self) -> str:
        return self.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT

    def section(self) -> dict:
        return getattr(self, self.command)

    def to_dict(self) -> dict:
        d = {"command": self.command, "master_seed": self.master_seed,
             "output_dir": self.output_dir, "workers": self.workers}
        for s in SECTIONS:
            if getattr(self, s):
                d[s] = copy.deepcopy(getattr(self, s))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigurationError("config must be a mapping", code="config_type")
        known = {"command", "master_seed", "output_dir", "workers", *SECTIONS}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigurationError(f"unknown config keys {extra}", code="config_keys",
                                     keys=extra)
        if "command" not in d:
            raise ConfigurationError("config needs a command", code="command_id")
        return cls(**copy.deepcopy(d))


def dumps(cfg: RunConfig, fmt: str = "json") -> str:
    if fmt == "yaml":
        import yaml
        return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def loads(text: str, fmt: str = "json") -> RunConfig:
    try:
        if fmt == "yaml":
            import yaml
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:  # parser errors differ between json and yaml
        raise ConfigurationError(f"cannot parse config: {exc}", code="config_parse") from exc
    return RunConfig.from_dict(data)


def load(path: str) -> RunConfig:
    fmt = "yaml" if path.endswith((".yaml", ".yml")) else "json"
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}", code="config_read") from exc
    return loads(text, fmt)
