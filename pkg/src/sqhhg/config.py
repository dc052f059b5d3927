"""Run configuration: TOML files with a strict, typed schema.

Every section and key is declared below; anything else is rejected with the
line it appears on. Physical quantities are in atomic units, pump amplitudes
in units of the coherent-state parameter.
"""
from __future__ import annotations

import copy
import math
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

__all__ = ["RunConfig", "load_config", "load_preset", "list_presets", "SCHEMA"]

_num = (int, float)

# section -> key -> (accepted types, default); a default of None means optional
SCHEMA: dict[str, dict[str, tuple]] = {
    "pump": {
        "type": (str, "coherent"),
        "gamma_x": (_num, 0.0),
        "gamma_y": (_num, 0.0),
        "r": (_num, 0.0),
        "squeeze_angle": (_num, 0.0),
        "nbar": (_num, 0.0),
    },
    "field": {
        "omega_au": (_num, 0.057),
        "epsilon1_au": (_num, 1.0),
        "n_atoms": (_num, 1.0),
        "n_cycles": (int, 8),
        "envelope": (str, "flat"),
        "points_per_cycle": (int, 512),
        "e_au": (_num, None),
    },
    "atom": {
        "ip_au": (_num, 0.579),
        "dme_kind": (str, "hydrogenic-1s"),
    },
    "harmonic": {
        "q": (int, 15),
        "q_list": (list, None),
        "branch": (str, "all"),
    },
    "model": {
        "kind": (str, "sfa"),
        "c": (_num, 1.0),
        "c_im": (_num, 0.0),
        "eta": (_num, 1.0),
        "kappa": (_num, 0.0),
        "alpha0": (_num, 1.0),
        "interpolate": (bool, False),
        "interp_points": (int, 21),
        "interp_sigma": (_num, 6.0),
    },
    "grid": {
        "extent": (_num, None),
        "center_x": (_num, 0.0),
        "center_y": (_num, 0.0),
        "points": (int, 201),
        "n_sigma": (_num, 6.0),
        "search_extent": (_num, None),
        "seed_points": (int, 256),
        "jacobian_power": (int, 2),
        "branch_reduce": (str, "sum"),
        "normalization_tol": (_num, 1e-3),
    },
    "mc": {
        "samples": (int, 0),
        "seed": (int, 12345),
        "grid_points": (int, 41),
    },
    "variance": {
        "e_gamma_au": (_num, 0.0756),
        "orientations": (list, ["amplitude", "phase"]),
        "r_max": (_num, 2.0),
        "r_points": (int, 201),
        "theta": (_num, 0.0),
        "prefactor": (_num, None),
    },
    "spectrum": {
        "q_max_factor": (_num, 1.5),
    },
    "scaling": {
        "up_min_over_omega": (_num, 2.0),
        "up_max_over_omega": (_num, 12.0),
        "points": (int, 21),
    },
    "validate": {
        "checks": (list, ["normalization", "shot_noise", "boundary", "trajectories", "identity_map",
                          "phase_covariance", "crosscheck"]),
        "crosscheck_samples": (int, 100_000),
    },
    "output": {
        "directory": (str, "out"),
        "formats": (list, ["csv", "json"]),
    },
    "meta": {
        "name": (str, ""),
        "description": (str, ""),
        "assumptions": (list, []),
    },
}

_CHOICES = {
    ("pump", "type"): {"coherent", "squeezed_coherent", "squeezed_vacuum", "thermal", "vacuum"},
    ("field", "envelope"): {"flat"},
    ("atom", "dme_kind"): {"hydrogenic-1s", "gaussian"},
    ("harmonic", "branch"): {"all", "short"},
    ("model", "kind"): {"sfa", "synthetic", "linear"},
    ("grid", "branch_reduce"): {"sum", "max"},
    ("grid", "jacobian_power"): {0, 1, 2},
}

_POSITIVE = {("field", "omega_au"), ("field", "epsilon1_au"), ("atom", "ip_au"), ("grid", "points"),
             ("field", "points_per_cycle"), ("model", "alpha0")}


def _key_line(text: str, section: str | None, key: str | None) -> int | None:
    """Best-effort line number of ``key`` inside ``[section]``."""
    lines = text.splitlines()
    current = None
    for i, raw in enumerate(lines, 1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return i
    return None


@dataclass
class RunConfig:
    """Resolved configuration: every section with defaults filled in."""

    sections: dict
    source: str = "<defaults>"
    preset: str | None = None
    overrides: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.sections[name]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.sections)

    @property
    def q_list(self) -> list[int]:
        h = self.sections["harmonic"]
        return list(h["q_list"]) if h["q_list"] else [h["q"]]


def _validate(raw: dict, text: str, source: str) -> dict:
    out = {}
    for sec, body in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", _key_line(text, sec, None), source)
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table", _key_line(text, sec, None), source)
        for key, val in body.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in [{sec}]", _key_line(text, sec, key), source)
            types, _ = SCHEMA[sec][key]
            ok = isinstance(val, types) and not (isinstance(val, bool) and types is not bool and bool not in
                                                  (types if isinstance(types, tuple) else (types,)))
            if not ok:
                raise ConfigError(f"[{sec}] {key} has type {type(val).__name__}", _key_line(text, sec, key), source)
            choice = _CHOICES.get((sec, key))
            if choice is not None and val not in choice:
                raise ConfigError(f"[{sec}] {key} = {val!r} not in {sorted(choice, key=str)}",
                                  _key_line(text, sec, key), source)
            if (sec, key) in _POSITIVE and not val > 0:
                raise ConfigError(f"[{sec}] {key} must be > 0", _key_line(text, sec, key), source)
            if isinstance(val, float) and not math.isfinite(val):
                raise ConfigError(f"[{sec}] {key} must be finite", _key_line(text, sec, key), source)
    for sec, keys in SCHEMA.items():
        body = raw.get(sec, {})
        out[sec] = {k: copy.deepcopy(body.get(k, default)) for k, (_, default) in keys.items()}
    p = out["pump"]
    if p["r"] < 0:
        raise ConfigError("[pump] r must be >= 0", _key_line(text, "pump", "r"), source)
    if p["nbar"] < 0:
        raise ConfigError("[pump] nbar must be >= 0", _key_line(text, "pump", "nbar"), source)
    if p["type"] == "squeezed_vacuum" and (p["gamma_x"] or p["gamma_y"]):
        raise ConfigError("[pump] squeezed_vacuum needs gamma = 0", _key_line(text, "pump", "type"), source)
    samples = out["mc"]["samples"]
    if samples and samples < 10_000:
        raise ConfigError("[mc] samples must be >= 1e4 when Monte Carlo is requested",
                          _key_line(text, "mc", "samples"), source)
    if out["harmonic"]["q_list"] is not None:
        if not all(isinstance(q, int) and q > 0 for q in out["harmonic"]["q_list"]):
            raise ConfigError("[harmonic] q_list must hold positive integers",
                              _key_line(text, "harmonic", "q_list"), source)
    return out


def parse_text(text: str, source: str = "<string>") -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", int(m.group(1)) if m else None, source) from None
    return RunConfig(_validate(raw, text, source), source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(path)) from None
    return parse_text(text, str(path))


def list_presets() -> list[str]:
    root = resources.files("sqhhg") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_preset(name: str) -> RunConfig:
    root = resources.files("sqhhg") / "presets"
    f = root / f"{name}.toml"
    if not f.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    cfg = parse_text(f.read_text(), f"preset:{name}")
    cfg.preset = name
    return cfg
