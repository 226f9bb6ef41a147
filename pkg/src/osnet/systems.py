"""Benchmark chaotic flows: Rossler (a = b = 0.1) and Sprott's quadratic jerk flow."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ode import VectorField

__all__ = [
    "SystemSpec",
    "NoPaperICError",
    "make_field",
    "paper_initial_condition",
    "validation_perturbation",
]

_PARAMS = {"rossler": "c", "sprott": "nu"}

# (name, parameter value) -> (initial condition, validation perturbation)
_EXPERIMENTS = {
    ("rossler", 6.0): ([0.0, -9.1238, 0.0], [0.0, 0.01, 0.0]),
    ("rossler", 18.0): ([0.0, -22.9049, 0.0], [0.0, 0.01, 0.0]),
    ("sprott", 2.1): ([5.7043, 0.0, -2.12778], [0.01, 0.0, 0.0]),
}


class NoPaperICError(LookupError):
    pass


@dataclass(frozen=True)
class SystemSpec:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _PARAMS:
            raise ValueError(f"unknown system {self.name!r}; expected one of {sorted(_PARAMS)}")
        required = _PARAMS[self.name]
        extra = set(self.params) - {required}
        if extra:
            raise ValueError(f"unknown parameter(s) {sorted(extra)} for {self.name}")
        if required not in self.params:
            raise ValueError(f"{self.name} needs parameter {required!r}")
        value = float(self.params[required])
        if not np.isfinite(value):
            raise ValueError(f"parameter {required} must be finite")
        object.__setattr__(self, "params", {required: value})

    @property
    def dim(self) -> int:
        return 3

    @property
    def value(self) -> float:
        return self.params[_PARAMS[self.name]]


def make_field(spec: SystemSpec) -> VectorField:
    if spec.name == "rossler":
        c = spec.value

        def f(s):
            x, y, z = s
            return np.array([-y - z, x + 0.1 * y, 0.1 + z * (x - c)])

        def jac(s):
            x, _, z = s
            return np.array([[0.0, -1.0, -1.0], [1.0, 0.1, 0.0], [z, 0.0, x - c]])

    else:
        nu = spec.value

        def f(s):
            x, y, z = s
            return np.array([y, z, -nu * z - x + y * y])

        def jac(s):
            _, y, _ = s
            return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 2.0 * y, -nu]])

    return VectorField(dim=3, eval=f, jacobian=jac)


def _lookup(spec: SystemSpec):
    key = (spec.name, spec.value)
    if key not in _EXPERIMENTS:
        raise NoPaperICError(f"no paper initial condition for {spec.name} with {spec.params}")
    return _EXPERIMENTS[key]


def paper_initial_condition(spec: SystemSpec) -> np.ndarray:
    return np.array(_lookup(spec)[0])


def validation_perturbation(spec: SystemSpec) -> np.ndarray:
    """Offset added to the initial condition for held-out validation runs."""
    return np.array(_lookup(spec)[1])
