"""Model specifications from JSON files or shipped presets."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .model import MsmdParams
from .rivals import AcdParams, LmsdParams

__all__ = ["preset_names", "load_spec", "load_model", "model_from_dict"]


def preset_names() -> list[str]:
    root = resources.files("msmd") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_spec(source) -> dict:
    """Parse a JSON string, a JSON file path or a preset name."""
    text = str(source)
    if text.lstrip().startswith("{"):
        return json.loads(text)
    path = Path(text)
    if path.is_file():
        return json.loads(path.read_text())
    res = resources.files("msmd") / "presets" / f"{text}.json"
    if res.is_file():
        return json.loads(res.read_text())
    raise FileNotFoundError(f"{text!r} is neither a JSON file nor a preset ({', '.join(preset_names())})")


def model_from_dict(d: dict):
    kind = d.get("model", "msmd")
    if kind == "msmd":
        return MsmdParams.from_dict(d)
    if kind == "acd":
        return AcdParams.from_dict(d)
    if kind == "lmsd":
        return LmsdParams.from_dict(d)
    raise ValueError(f"unknown model kind {kind!r}")


def load_model(source):
    """``MsmdParams``, ``AcdParams`` or ``LmsdParams`` from a spec source."""
    return model_from_dict(load_spec(source))
