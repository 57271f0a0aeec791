"""Bundled experiment presets, one per reproducible figure."""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidInputError
from .runner import ExperimentConfig


def _preset_dir():
    return resources.files("vatom") / "presets"


def list_presets() -> list[str]:
    names = [p.name[:-5] for p in _preset_dir().iterdir() if p.name.endswith(".toml")]
    return sorted(names)


def preset_path(name: str) -> Path:
    path = _preset_dir() / f"{name}.toml"
    if not path.is_file():
        raise InvalidInputError(
            f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return Path(str(path))


def load_preset(name: str) -> ExperimentConfig:
    with preset_path(name).open("rb") as fh:
        return ExperimentConfig.from_dict(tomllib.load(fh))
