"""Run configs, scan reports and atomic, deterministic file output."""
from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .spec_io import canonical_json

TAGS = ("empirical", "closed_form", "parameter")


def tool_version() -> str:
    from . import __version__
    return __version__


@dataclass
class RunConfig:
    """Everything a command needs; ``output_dir`` is not part of the identity."""

    command: str
    params: dict = field(default_factory=dict)
    measure: Optional[dict] = None
    seed: Optional[int] = None
    depth: Optional[int] = None
    output_dir: str = "."

    def identity(self) -> dict:
        return {"command": self.command, "params": dict(sorted(self.params.items())),
                "measure": self.measure, "seed": self.seed, "depth": self.depth}

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.identity()).encode()).hexdigest()

    @staticmethod
    def from_identity(doc: dict, output_dir: str = ".") -> "RunConfig":
        try:
            return RunConfig(doc["command"], dict(doc.get("params") or {}), doc.get("measure"),
                             doc.get("seed"), doc.get("depth"), output_dir)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed embedded config: {exc}") from None


def value(v, tag="empirical", error=None) -> dict:
    """A tagged summary entry; empirical values always carry an error field."""
    if tag not in TAGS:
        raise ValueError(f"unknown tag {tag!r}")
    if tag == "empirical" and error is None:
        raise ValueError("empirical values need an error estimate")
    return {"value": v, "tag": tag, "error": error}


@dataclass
class ScanReport:
    command: str
    summary: dict
    config: RunConfig
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "summary": self.summary,
            "provenance": {"config": self.config.identity(), "config_hash": self.config.config_hash(),
                           "seed": self.config.seed, "depth": self.config.depth,
                           "tool_version": tool_version()},
            "data_files": sorted(self.data),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def write(self, output_dir=None) -> list:
        """Write data files then ``summary.json``, each atomically."""
        out = Path(self.config.output_dir if output_dir is None else output_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self.data):
            written.append(atomic_write(out / name, self.data[name]))
        written.append(atomic_write(out / "summary.json", self.to_json()))
        return written


def atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
