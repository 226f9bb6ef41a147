"""Experiment configuration and the built-in presets.

A config is a single JSON document. Values are resolved with the precedence
command-line flags > config file > preset.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .model import ActivationSpec
from .optim import LbfgsConfig
from .systems import SystemSpec, paper_initial_condition, validation_perturbation
from .train import TrainConfig

__all__ = ["PRESETS", "ExperimentConfig", "ConfigError", "preset", "deep_merge",
           "set_dotted", "config_hash"]


class ConfigError(ValueError):
    pass


_LBFGS = {"history": 100, "inner_iterations": 20, "c1": 1e-4, "c2": 0.9, "max_line_search": 25}

PRESETS = {
    "rossler6": {
        "seed": 0,
        "system": {"name": "rossler", "params": {"c": 6.0}},
        "data": {"t0": 0.0, "t1": 10.0, "gen_step": 0.001, "snapshot_stride": 50,
                 "initial_condition": "paper", "validation_perturbation": "paper"},
        "model": {"hidden_2m": 32, "activation": {"kind": "snake", "a": 0.2}},
        "reference": {"j_a_norm": 0.9937},
        "train": {"alpha": 0.07, "epochs": 10, "h": 0.005, "warmup_epochs": 4, "lbfgs": dict(_LBFGS)},
        "analysis": {"rollout_horizon": 100.0, "long_horizon": 10000.0, "ground_truth_step": 0.01,
                     "cluster_tolerance": 0.02, "section": None},
    },
    "rossler18": {
        "seed": 0,
        "system": {"name": "rossler", "params": {"c": 18.0}},
        "data": {"t0": 0.0, "t1": 10.0, "gen_step": 0.001, "snapshot_stride": 10,
                 "initial_condition": "paper", "validation_perturbation": "paper"},
        "model": {"hidden_2m": 64, "activation": {"kind": "x_plus_sin"}},
        "reference": {"j_a_norm": 0.6318},
        "train": {"alpha": 2.0, "epochs": 10, "h": 0.005, "warmup_epochs": 4, "lbfgs": dict(_LBFGS)},
        "analysis": {"rollout_horizon": 100.0, "long_horizon": 10000.0, "ground_truth_step": 0.01,
                     "cluster_tolerance": 0.02, "section": None},
    },
    "sprott21": {
        "seed": 0,
        "system": {"name": "sprott", "params": {"nu": 2.1}},
        "data": {"t0": 0.0, "t1": 15.0, "gen_step": 0.001, "snapshot_stride": 10,
                 "initial_condition": "paper", "validation_perturbation": "paper"},
        "model": {"hidden_2m": 32, "activation": {"kind": "snake", "a": 0.3}},
        "reference": {"j_a_norm": 0.0085},
        "train": {"alpha": 1.0, "epochs": 20, "h": 0.01, "warmup_epochs": 4, "lbfgs": dict(_LBFGS)},
        "analysis": {"rollout_horizon": 100.0, "long_horizon": 10000.0, "ground_truth_step": 0.01,
                     "cluster_tolerance": 0.02, "section": None},
    },
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def set_dotted(cfg: dict, dotted: str, value) -> None:
    """Set ``cfg["a"]["b"] = value`` for ``dotted == "a.b"``."""
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    seed: int
    system: SystemSpec
    t0: float
    t1: float
    gen_step: float
    snapshot_stride: int
    initial_condition: np.ndarray
    perturbation: np.ndarray
    hidden_2m: int
    activation: ActivationSpec
    train: TrainConfig
    rollout_horizon: float
    long_horizon: float
    ground_truth_step: float
    cluster_tolerance: float
    section: dict | None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            return cls._build(d)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"invalid config: {err!r}") from None

    @classmethod
    def _build(cls, d: dict) -> "ExperimentConfig":
        sysd = d["system"]
        system = SystemSpec(sysd["name"], dict(sysd["params"]))
        data = d["data"]
        stride = int(data["snapshot_stride"])
        if stride < 1:
            raise ConfigError("data.snapshot_stride must be >= 1")
        t0, t1 = float(data["t0"]), float(data["t1"])
        if not t1 > t0:
            raise ConfigError("data.t1 must exceed data.t0")
        ic = data.get("initial_condition", "paper")
        ic = paper_initial_condition(system) if ic == "paper" else np.array(ic, dtype=float)
        pert = data.get("validation_perturbation", "paper")
        if pert == "paper":
            try:
                pert = validation_perturbation(system)
            except LookupError:
                pert = np.zeros(system.dim)
        pert = np.array(pert, dtype=float)
        if ic.shape != (system.dim,) or pert.shape != (system.dim,):
            raise ConfigError("initial condition and perturbation must match the system dimension")
        model = d["model"]
        hidden = int(model["hidden_2m"])
        if hidden < 2 or hidden % 2:
            raise ConfigError("model.hidden_2m must be even and >= 2")
        act = model["activation"]
        activation = ActivationSpec(act["kind"], float(act.get("a", 1.0)))
        tr = d["train"]
        lb = LbfgsConfig(**tr.get("lbfgs", {}))
        train = TrainConfig(alpha=float(tr["alpha"]), epochs=int(tr["epochs"]), h=float(tr["h"]),
                            lbfgs=lb, seed=int(d.get("seed", 0)),
                            warmup_epochs=int(tr.get("warmup_epochs", 0)))
        an = d.get("analysis", {})
        return cls(
            raw=d, seed=int(d.get("seed", 0)), system=system, t0=t0, t1=t1,
            gen_step=float(data["gen_step"]), snapshot_stride=stride,
            initial_condition=ic, perturbation=pert, hidden_2m=hidden, activation=activation,
            train=train,
            rollout_horizon=float(an.get("rollout_horizon", 100.0)),
            long_horizon=float(an.get("long_horizon", 10000.0)),
            ground_truth_step=float(an.get("ground_truth_step", 0.01)),
            cluster_tolerance=float(an.get("cluster_tolerance", 0.02)),
            section=an.get("section"),
        )

    @property
    def validation_ic(self) -> np.ndarray:
        return self.initial_condition + self.perturbation

    @property
    def reference_j_a_norm(self) -> float | None:
        ref = self.raw.get("reference") or {}
        return ref.get("j_a_norm")

    def digest(self) -> str:
        return config_hash(self.raw)
