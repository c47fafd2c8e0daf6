"""Flat key-value scenario files.

Grammar, one item per line::

    # comment                    (also allowed after a value)
    key = value                  key: [A-Za-z_][A-Za-z0-9_.]*
    base = paper-set-11          start from a bundled scenario
    sweep.<path> = v1, v2, ...   sweep axis over a numeric field

Keys are the dotted paths of :meth:`SimConfig.to_flat`.  A key may appear
once per file.  ``--set key=value`` overrides use the same syntax.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .harness import DEFAULT_SWEEP_CAP, NUMERIC_KEYS, ConfigError, SimConfig, SweepSpec

_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")
SWEEP_PREFIX = "sweep."
SWEEP_CAP_KEY = "sweep.max_cells"


@dataclass(frozen=True)
class ScenarioFile:
    config: SimConfig
    axes: tuple = ()
    max_cells: int = DEFAULT_SWEEP_CAP

    def sweep_spec(self, extra_axes=()) -> SweepSpec:
        axes = dict(self.axes)
        axes.update(extra_axes)
        return SweepSpec(self.config, tuple(axes.items()), self.max_cells)


def parse_assignment(line: str, where: str = "override") -> tuple[str, str]:
    """Split ``key = value``; the value keeps inner spaces."""
    if "=" not in line:
        raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
    key, value = (part.strip() for part in line.split("=", 1))
    if not _KEY.match(key):
        raise ConfigError(f"{where}: invalid key {key!r}")
    if not value:
        raise ConfigError(f"{where}: empty value for {key!r}")
    return key, value


def parse_values(text: str, where: str) -> tuple[float, ...]:
    try:
        return tuple(float(item) for item in text.split(","))
    except ValueError:
        raise ConfigError(f"{where}: expected comma-separated numbers, got {text!r}") from None


def parse_text(text: str, source: str = "<string>") -> ScenarioFile:
    flat: dict = {}
    axes: dict = {}
    max_cells = DEFAULT_SWEEP_CAP
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        key, value = parse_assignment(line, where)
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        seen.add(key)
        if key == "base":
            if flat:
                raise ConfigError(f"{where}: 'base' must come before other keys")
            flat.update(bundled_scenario(value).to_flat())
        elif key == SWEEP_CAP_KEY:
            try:
                max_cells = int(value)
            except ValueError:
                raise ConfigError(f"{where}: {key} must be an integer") from None
        elif key.startswith(SWEEP_PREFIX):
            path = key[len(SWEEP_PREFIX):]
            if path not in NUMERIC_KEYS:
                raise ConfigError(f"{where}: sweep axis {path!r} is not a numeric scenario field")
            axes[path] = parse_values(value, where)
        else:
            flat[key] = value
    try:
        config = SimConfig.from_flat(flat)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return ScenarioFile(config, tuple(axes.items()), max_cells)


def _bundled_dir():
    return resources.files(__package__) / "scenarios"


def bundled_names() -> list[str]:
    return sorted(p.name[:-4] for p in _bundled_dir().iterdir() if p.name.endswith(".cfg"))


def bundled_scenario(name: str) -> SimConfig:
    resource = _bundled_dir() / f"{name}.cfg"
    if not resource.is_file():
        raise ConfigError(f"unknown bundled scenario {name!r} (have: {', '.join(bundled_names())})")
    return parse_text(resource.read_text(), name).config


def load(source: str) -> ScenarioFile:
    """Read a scenario file, or a bundled scenario when `source` names one."""
    path = Path(source)
    if path.is_file():
        return parse_text(path.read_text(), str(path))
    if source in bundled_names():
        return parse_text((_bundled_dir() / f"{source}.cfg").read_text(), source)
    raise ConfigError(f"config file {source!r} not found")


def format_number(x) -> str:
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def format_config(config: SimConfig) -> str:
    lines = []
    for key, value in config.to_flat().items():
        if key in ("name", "description") and not value:
            continue
        shown = value if isinstance(value, str) else format_number(value)
        lines.append(f"{key} = {shown}")
    return "\n".join(lines) + "\n"
