"""Fixed-step classical Runge-Kutta integration."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .numerics import as_matrix, as_vector

__all__ = [
    "DIVERGENCE_THRESHOLD",
    "DivergenceError",
    "VectorField",
    "Trajectory",
    "rk4_step",
    "integrate",
    "subsample",
    "integrate_linear",
]

DIVERGENCE_THRESHOLD = 1e8

# overflow is caught by the divergence check; numpy need not warn about it
def _quiet_overflow():
    return np.errstate(over="ignore", invalid="ignore")


class DivergenceError(ArithmeticError):
    """The integrated state blew up (non-finite or beyond the threshold).

    ``time`` is when the failure was detected and ``state`` the last finite
    state. ``partial`` holds the trajectory recorded up to that point, if any.
    """

    def __init__(self, time: float, state=None, partial: "Trajectory | None" = None):
        super().__init__(f"integration diverged at t={time:.6g}")
        self.time = float(time)
        self.state = state
        self.partial = partial


@dataclass(frozen=True)
class VectorField:
    """An autonomous vector field ``x' = f(x)`` on R^dim."""

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x):
        return self.eval(x)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64)
        states = np.array(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if times.ndim != 1 or len(times) < 1 or len(times) != len(states):
            raise ValueError("times and states must be non-empty and of equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory states must be finite")
        times.flags.writeable = False
        states.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


def _blown_up(x) -> bool:
    # also true for NaN, since NaN comparisons are False
    return not np.abs(x).max() <= DIVERGENCE_THRESHOLD


@_quiet_overflow()
def rk4_step(field, state, h: float, t: float = 0.0) -> np.ndarray:
    """One classical RK4 step of size ``h``.

    ``t`` is only used to label a DivergenceError.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    f = field.eval if isinstance(field, VectorField) else field
    k1 = f(state)
    k2 = f(state + 0.5 * h * k1)
    k3 = f(state + 0.5 * h * k2)
    k4 = f(state + h * k3)
    out = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if _blown_up(out):
        raise DivergenceError(t + h, state)
    return out


def step_grid(t0: float, t1: float, h: float) -> np.ndarray:
    """Times t0, t0 + h, ... with a final shortened step landing on t1."""
    n_full = int(np.floor((t1 - t0) / h * (1 + 1e-12)))
    times = t0 + h * np.arange(n_full + 1)
    if t1 - times[-1] > 1e-12 * max(1.0, abs(t1)):
        times = np.append(times, t1)
    else:
        times[-1] = t1
    return times


@_quiet_overflow()
def integrate(field, x0, t0: float, t1: float, h: float) -> Trajectory:
    """Integrate ``field`` from ``x0`` over [t0, t1], recording every step.

    The last step is shortened so that ``t1`` is always a sample.
    """
    if not t1 > t0:
        raise ValueError("integration needs t1 > t0")
    if not h > 0:
        raise ValueError("step size must be positive")
    x = as_vector(x0, "x0")
    f = field.eval if isinstance(field, VectorField) else field
    times = step_grid(t0, t1, h)
    states = np.empty((len(times), len(x)))
    states[0] = x
    for i in range(1, len(times)):
        try:
            x = rk4_step(f, x, times[i] - times[i - 1], times[i - 1])
        except DivergenceError as err:
            partial = Trajectory(times[:i], states[:i]) if i > 0 else None
            raise DivergenceError(err.time, states[i - 1].copy(), partial) from None
        states[i] = x
    return Trajectory(times, states)


def subsample(traj: Trajectory, stride: int) -> Trajectory:
    """Keep samples 0, stride, 2*stride, ..."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return Trajectory(traj.times[::stride], traj.states[::stride])


@_quiet_overflow()
def integrate_linear(coef, y0, t0: float, t1: float, h: float) -> np.ndarray:
    """Solve the matrix ODE ``Y' = A(t) Y`` with RK4 and return ``Y(t1)``.

    ``coef`` maps a time to the square matrix ``A(t)``.
    """
    if not t1 > t0:
        raise ValueError("integration needs t1 > t0")
    y = as_matrix(y0, "y0")
    times = step_grid(t0, t1, h)
    for t, t_next in zip(times[:-1], times[1:]):
        dt = t_next - t
        a1 = coef(t)
        a2 = coef(t + 0.5 * dt)
        a4 = coef(t_next)
        k1 = a1 @ y
        k2 = a2 @ (y + 0.5 * dt * k1)
        k3 = a2 @ (y + 0.5 * dt * k2)
        k4 = a4 @ (y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if _blown_up(y):
            raise DivergenceError(t_next, None)
    return y
