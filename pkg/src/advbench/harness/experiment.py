"""Experiment configuration: schema validation, canonical hashing, run records."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .. import __version__
from ..errors import ConfigValidationError, ContractError

PHASES = ("train", "attack", "defend", "bench", "eval", "report")

DEFAULTS = {
    "seed": None,                       # mandatory
    "out": "runs/experiment",
    "phases": ["train", "eval", "report"],
    "dataset": {"name": "digits", "path": None,
                "train": 3500, "val": 500, "test": 500},
    "model": {"arch": "small_cnn"},
    "train": {"epochs": 10, "batch_size": 64, "lr": 0.08, "momentum": 0.9},
    "attack": {
        "kind": "pgd",                  # pgd | fgsm | gap
        "epsilon": 2.0 / 255.0,
        "alpha": None,
        "steps": 1,
        "random_init": False,
        "mode": "non-target",
        "target": None,                 # class index or 0/1 list for targeted mode
        "max_images": None,
        "gap": {"epochs": 6, "batch_size": 64, "lr": 1e-3},
    },
    "defend": {
        "methods": ["standard", "mpadvt", "maadvt"],
        "epochs": 8, "batch_size": 64, "lr": 0.05, "momentum": 0.9,
        "standard": {"epsilon": 4.0 / 255.0, "steps": 4},
        "mpadvt": {"epsilon": [0.01, 0.04], "steps": [1, 5],
                   "branch_threshold": 0.5},
        "maadvt": {"epsilon": 0.03, "steps": 5, "lam": 1.0},
    },
    "bench": {"types": None, "n_frames": 21, "max_images": 20,
              "max_severity": 1.0},
    "eval": {
        "budget": {"epsilon": 0.03, "alpha": None, "steps": 5,
                   "random_init": True},
        "introspect": False,
        "samples": 6,
    },
}

_SCHEMA_TYPES = {
    "seed": int,
    "out": str,
    "phases": list,
    "dataset": dict,
    "model": dict,
    "train": dict,
    "attack": dict,
    "defend": dict,
    "bench": dict,
    "eval": dict,
}


def _merge(defaults, override, path, problems):
    if override is None:
        return json.loads(json.dumps(defaults))
    merged = json.loads(json.dumps(defaults))
    for key, value in override.items():
        if key not in defaults:
            problems.append(f"unknown key {'.'.join(path + [key])!r}")
            continue
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            merged[key] = _merge(defaults[key], value, path + [key], problems)
        else:
            merged[key] = value
    return merged


def validate_config(raw: dict) -> dict:
    """Merge a raw config dict over defaults; raise listing offending keys."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigValidationError(["config root must be a mapping"])
    resolved = _merge(DEFAULTS, raw, [], problems)
    if resolved.get("seed") is None:
        problems.append("'seed' is mandatory")
    elif not isinstance(resolved["seed"], int):
        problems.append("'seed' must be an integer")
    for key, expected in _SCHEMA_TYPES.items():
        if resolved.get(key) is not None and not isinstance(resolved[key], expected):
            problems.append(f"{key!r} must be {expected.__name__}")
    phases = resolved.get("phases") or []
    bad = [p for p in phases if p not in PHASES]
    if bad:
        problems.append(f"unknown phase(s) {bad}; valid: {list(PHASES)}")
    if len(phases) != len(set(phases)):
        problems.append("phases must not repeat")
    order = [PHASES.index(p) for p in phases if p in PHASES]
    if order != sorted(order):
        problems.append(f"phases must respect the order {list(PHASES)}")
    if problems:
        raise ConfigValidationError(problems)
    return resolved


def load_config(path) -> dict:
    path = Path(path)
    with open(path) as fh:
        if path.suffix in (".yaml", ".yml"):
            raw = yaml.safe_load(fh)
        else:
            raw = json.load(fh)
    return validate_config(raw or {})


def config_hash(config: dict) -> str:
    """Order-independent hash of the resolved config."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class RunRecord:
    config: dict
    config_hash: str
    version: str = __version__
    phase_timings: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    @classmethod
    def start(cls, config: dict) -> "RunRecord":
        return cls(config=config, config_hash=config_hash(config))

    def time_phase(self, phase: str, started: float) -> None:
        self.phase_timings[phase] = round(time.time() - started, 3)

    def add_artifact(self, phase: str, path) -> None:
        self.artifacts.setdefault(phase, []).append(str(path))

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config": self.config,
            "config_hash": self.config_hash,
            "phase_timings": self.phase_timings,
            "artifacts": self.artifacts,
            "metrics": self.metrics,
        }

    def save(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
        return path


def load_run_record(path) -> RunRecord:
    with open(path) as fh:
        payload = json.load(fh)
    recomputed = config_hash(payload["config"])
    if recomputed != payload["config_hash"]:
        raise ContractError(
            f"run record hash mismatch: stored {payload['config_hash'][:12]}, "
            f"recomputed {recomputed[:12]}"
        )
    return RunRecord(
        config=payload["config"], config_hash=payload["config_hash"],
        version=payload.get("version", "?"),
        phase_timings=payload.get("phase_timings", {}),
        artifacts=payload.get("artifacts", {}),
        metrics=payload.get("metrics", {}),
    )
