"""Flat key=value run configuration."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ConfigError
from .harness import ExperimentConfig
from .models import model_from_options

DEFAULTS = {
    "model": "bargmann-fock",
    "dim": "2",
    "alpha": "0.0",
    "degree_n": "0",
    "custom_csv": "",
    "R": "12",
    "r": "",
    "N": "",
    "seed": "0",
    "h": "",
    "method": "auto",
    "threads": "1",
    "out": "results",
}
ALIASES = {"R_list": "R", "r_list": "r", "replicates": "N", "master_seed": "seed", "spacing": "h"}


def parse_text(text):
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = ALIASES.get(key, key)
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key: {key}")
        out[key] = value.strip().strip('"').strip("'")
    return out


def _floats(text):
    text = text.strip().strip("()[]")
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def resolve(values):
    """Merge over defaults and validate; returns (ExperimentConfig, raw dict)."""
    for key in values:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key: {key}")
    raw = {**DEFAULTS, **{k: v for k, v in values.items() if v is not None}}
    try:
        dim = int(raw["dim"])
    except ValueError:
        raise ConfigError("dim must be an integer") from None
    if dim not in (2, 3):
        raise ConfigError("unsupported dimension")
    try:
        model = model_from_options(
            raw["model"],
            dim,
            alpha=float(raw["alpha"]),
            degree_n=int(raw["degree_n"]),
            custom_csv=raw["custom_csv"] or None,
        )
        R_list = _floats(raw["R"])
        r_list = _floats(raw["r"])
        n_default = 200 if dim == 2 else 50
        replicates = int(raw["N"]) if raw["N"] else n_default
        spacing = float(raw["h"]) if raw["h"] else None
        seed = int(raw["seed"])
        threads = int(raw["threads"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if r_list and R_list and max(r_list) >= min(R_list):
        raise ConfigError("invalid radius ordering")
    config = ExperimentConfig(
        model=model,
        R_list=R_list,
        r_list=r_list,
        replicates=replicates,
        master_seed=seed,
        spacing=spacing,
        method=raw["method"],
        threads=threads,
    )
    if config.spacing > model.h_max():
        from .errors import GridTooCoarseError

        raise GridTooCoarseError()
    return config, raw


def parse_config(path=None, overrides=None):
    """Read a config file (optional) and apply flag overrides on top."""
    values = {}
    if path is not None:
        try:
            values = parse_text(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            values[ALIASES.get(k, k)] = str(v)
    return resolve(values)


def canonical(config: ExperimentConfig):
    """Result-determining fields only (threads and paths excluded)."""
    return {
        "model": config.model.to_dict(),
        "R_list": list(config.R_list),
        "r_list": list(config.r_list),
        "replicates": config.replicates,
        "master_seed": config.master_seed,
        "spacing": config.spacing,
        "method": config.method,
    }


def config_hash(config: ExperimentConfig):
    blob = json.dumps(canonical(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
