"""Run configuration: TOML files, figure presets, manifests and CSV output.

A configuration is a nested dict with up to three sections::

    [network]     k_d, k_u, m_d, m_u
    [simulation]  snr_grid_db, trials, seed, residual_si_power
    [multicell]   j_grid, alpha_pl, p_ref_db, scheduler

Values are layered preset < file < command-line flags. Every CSV written by
the CLI starts with ``# key: value`` manifest lines, one of which
(``# config:``) holds the fully resolved configuration as JSON, so an output
file can be passed back as ``--config`` to regenerate it.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Iterable, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidScenarioError

SECTIONS = {
    "network": {"k_d": int, "k_u": int, "m_d": int, "m_u": int},
    "simulation": {"snr_grid_db": list, "trials": int, "seed": int, "residual_si_power": float},
    "multicell": {"j_grid": list, "alpha_pl": float, "p_ref_db": float, "scheduler": str},
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "network": {"k_d": 2, "k_u": 2, "m_d": 2, "m_u": 2},
    "simulation": {
        "snr_grid_db": [0.0, 10.0, 20.0, 30.0, 40.0],
        "trials": 1000,
        "seed": 2016,
        "residual_si_power": 1.0,
    },
    "multicell": {"j_grid": [2, 4, 6, 8], "alpha_pl": 3.0, "p_ref_db": 10.0, "scheduler": "both"},
}

PRESETS: dict[str, dict[str, Any]] = {
    # symmetric DoF curve K = M = 1..8
    "fig3": {"command": "dof", "sweep": list(range(1, 9))},
    "fig5": {
        "command": "rate-sweep",
        "network": {"k_d": 2, "k_u": 2, "m_d": 2, "m_u": 2},
        "simulation": {
            "snr_grid_db": [float(x) for x in range(0, 45, 5)],
            "trials": 2000,
            "seed": 2016,
            "residual_si_power": 1.0,
        },
    },
    "fig6": {
        "command": "multicell",
        "network": {"k_d": 2, "k_u": 2, "m_d": 2, "m_u": 2},
        "simulation": {"trials": 500, "seed": 2016, "residual_si_power": 1.0},
        "multicell": {"j_grid": [2, 4, 6, 8], "alpha_pl": 3.0, "p_ref_db": 10.0, "scheduler": "both"},
    },
}

SCHEDULER_CHOICES = ("max-snr", "round-robin", "both")


def _coerce(section: str, key: str, value):
    kind = SECTIONS[section][key]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidScenarioError(f"[{section}] {key} must be an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidScenarioError(f"[{section}] {key} must be a number, got {value!r}")
        return float(value)
    if kind is list:
        if not isinstance(value, list) or not value:
            raise InvalidScenarioError(f"[{section}] {key} must be a nonempty list")
        if key == "j_grid":
            return [_coerce_int(section, key, v) for v in value]
        return [float(v) for v in value]
    if key == "scheduler" and value not in SCHEDULER_CHOICES:
        raise InvalidScenarioError(f"[multicell] scheduler must be one of {SCHEDULER_CHOICES}")
    return str(value)


def _coerce_int(section, key, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise InvalidScenarioError(f"[{section}] {key} entries must be integers, got {v!r}")
    return v


def validate(raw: dict) -> dict:
    """Check section and key names and value types; unknown keys are errors."""
    out: dict[str, dict] = {}
    for section, values in raw.items():
        if section not in SECTIONS:
            raise InvalidScenarioError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise InvalidScenarioError(f"[{section}] must be a table")
        out[section] = {}
        for key, value in values.items():
            if key not in SECTIONS[section]:
                raise InvalidScenarioError(f"unknown key {key!r} in [{section}]")
            out[section][key] = _coerce(section, key, value)
    return out


def merge(*layers: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for layer in layers:
        for section, values in layer.items():
            out.setdefault(section, {}).update(values)
    return out


def load_config(path: str | Path) -> dict:
    """Read a TOML config, or the manifest of an earlier CSV output."""
    path = Path(path)
    if not path.is_file():
        raise InvalidScenarioError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".csv" or text.startswith("# command:"):
        return validate(read_manifest(text)["config"])
    try:
        return validate(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise InvalidScenarioError(f"cannot parse {path}: {exc}") from exc


def preset(name: str, command: str) -> dict:
    if name not in PRESETS:
        raise InvalidScenarioError(f"unknown preset {name!r}")
    p = PRESETS[name]
    if p["command"] != command:
        raise InvalidScenarioError(f"preset {name} belongs to the {p['command']} command")
    return {k: copy.deepcopy(v) for k, v in p.items() if k in SECTIONS}


# -- manifest and CSV ----------------------------------------------------------------------


def manifest_lines(command: str, config: dict, seed: int | None, version: str, outputs: Sequence[str]) -> list[str]:
    return [
        f"# command: {command}",
        f"# config: {json.dumps(config, sort_keys=True)}",
        f"# seed: {seed}",
        f"# version: {version}",
        f"# outputs: {json.dumps(list(outputs))}",
    ]


def read_manifest(text: str) -> dict:
    out: dict[str, Any] = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition(": ")
        out[key] = value
    if "config" not in out:
        raise InvalidScenarioError("file has no '# config:' manifest line")
    out["config"] = json.loads(out["config"])
    return out


def fmt(x) -> str:
    """Full-precision, platform-stable number formatting."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def render_csv(header: Sequence[str], rows: Iterable[Sequence], manifest: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in manifest:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def csv_body(text: str) -> str:
    """The CSV without its manifest comment lines."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))
