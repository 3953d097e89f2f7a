"""Flat ``key = value`` scenario files.

Top-level keys configure the run; ``[trace]``, ``[train]`` and ``[policy]``
sections configure the generator, the trainer and the orchestrator. ``#``
starts a comment. Missing keys take their defaults, unknown keys are
rejected. :func:`echo_scenario` renders a fully-resolved config that parses
back to the same value.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .errors import ConfigError
from .lstm_core import TrainConfig
from .orchestrator import PolicyConfig
from .ric_sim import ScenarioConfig
from .traffic import TraceConfig

ECHO_NAME = "scenario.resolved.cfg"

_SECTIONS = {"": ScenarioConfig, "trace": TraceConfig, "train": TrainConfig, "policy": PolicyConfig}
_NESTED = ("trace", "train", "policy")
# train.seed is driven by the top-level seed_train
_HIDDEN = {("train", "seed")}


def _keys(section):
    names = [f.name for f in dataclasses.fields(_SECTIONS[section])]
    if not section:
        names = [n for n in names if n not in _NESTED]
    return [n for n in names if (section, n) not in _HIDDEN]


def _parse_value(section, key, raw, line):
    default = getattr(_SECTIONS[section](), key)
    try:
        if key == "critical_model":
            return None if raw in ("", "auto") else raw
        if key == "peak_hours":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if key == "critical_windows":
            out = []
            for item in raw.replace(",", " ").split():
                start, length = item.split(":")
                out.append((int(start), int(length)))
            return tuple(out)
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        kind = type(default).__name__ if key not in ("peak_hours", "critical_windows") else \
            {"peak_hours": "list of hours", "critical_windows": "list of start:length"}[key]
        name = f"{section}.{key}" if section else key
        raise ConfigError(f"{name}: expected {kind}, got {raw!r}", keys=[key], line=line) from None


def _format_value(key, value):
    if key == "critical_model":
        return "auto" if value is None else value
    if key == "peak_hours":
        return ", ".join(str(h) for h in value)
    if key == "critical_windows":
        return ", ".join(f"{s}:{n}" for s, n in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_scenario_text(text: str, source: str = "<scenario>") -> ScenarioConfig:
    values = {s: {} for s in _SECTIONS}
    section = ""
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in _NESTED:
                raise ConfigError(f"{source}: unknown section {line}; expected one of "
                                  f"{['[' + s + ']' for s in _NESTED]}", keys=[line], line=lineno)
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value', got {line!r}", line=lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _keys(section):
            where = f"section [{section}]" if section else "top level"
            raise ConfigError(f"{source}: unknown key {key!r} at {where}", keys=[key], line=lineno)
        if key in values[section]:
            raise ConfigError(f"{source}: duplicate key {key!r}", keys=[key], line=lineno)
        values[section][key] = _parse_value(section, key, raw, lineno)

    defaults = ScenarioConfig()
    nested = {s: dataclasses.replace(getattr(defaults, s), **values[s]) for s in _NESTED}
    cfg = dataclasses.replace(defaults, **values[""], **nested)
    cfg.validate()
    return cfg


def parse_scenario(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file {path} does not exist", keys=["scenario"])
    return parse_scenario_text(path.read_text(), source=str(path))


def echo_scenario(cfg: ScenarioConfig) -> str:
    lines = ["# fully resolved scenario"]
    for key in _keys(""):
        lines.append(f"{key} = {_format_value(key, getattr(cfg, key))}")
    for section in _NESTED:
        sub = getattr(cfg, section)
        lines += ["", f"[{section}]"]
        for key in _keys(section):
            lines.append(f"{key} = {_format_value(key, getattr(sub, key))}")
    return "\n".join(lines) + "\n"


def write_echo(cfg: ScenarioConfig, out_dir) -> Path:
    out = Path(out_dir) / ECHO_NAME
    out.write_text(echo_scenario(cfg))
    return out
