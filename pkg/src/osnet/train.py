"""Trajectory-matching training of OS-net.

The data term is the mean squared error between the model rollout and the
snapshots (averaged over snapshots and state components, the initial
snapshot excluded). Gradients come from the continuous adjoint equations,
integrated backward one snapshot interval at a time and restarted from the
stored forward state at every snapshot.
"""
from __future__ import annotations

import math
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import Gradients, OsNet, as_field, regularizer, regularizer_gradient
from .ode import DIVERGENCE_THRESHOLD, DivergenceError, Trajectory, _quiet_overflow
from .optim import LbfgsConfig, lbfgs_minimize

__all__ = [
    "TrainConfig",
    "LossValue",
    "EpochRecord",
    "TrainReport",
    "loss",
    "adjoint_gradient",
    "train",
    "normalized_mse",
]


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.0
    epochs: int = 10
    h: float = 0.005
    lbfgs: LbfgsConfig = LbfgsConfig()
    seed: int = 0
    warmup_epochs: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if not self.h > 0:
            raise ValueError("rollout step h must be positive")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be nonnegative")

    def window_fraction(self, epoch: int) -> float:
        """Fraction of the data window fitted in a 1-based epoch."""
        return min(1.0, epoch / (self.warmup_epochs + 1))


@dataclass(frozen=True)
class LossValue:
    total: float
    data_loss: float
    reg: float


def _substeps(times: np.ndarray, h: float) -> np.ndarray:
    # uniform sub-steps per snapshot interval, never longer than h
    gaps = np.diff(times)
    return np.maximum(1, np.ceil(gaps / h - 1e-9)).astype(int)


@_quiet_overflow()
def _rollout(f, x0, times, nsub):
    """RK4 from x0 hitting every snapshot time; returns snapshot states."""
    out = np.empty((len(times), len(x0)))
    out[0] = x = np.array(x0, dtype=np.float64)
    for k in range(1, len(times)):
        dt = (times[k] - times[k - 1]) / nsub[k - 1]
        for _ in range(nsub[k - 1]):
            k1 = f(x)
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.abs(x).max() <= DIVERGENCE_THRESHOLD:
            raise DivergenceError(times[k], out[k - 1].copy())
        out[k] = x
    return out


def _check_data(net: OsNet, data: Trajectory):
    if len(data) < 2:
        raise ValueError("training data needs at least two snapshots")
    if data.dim != net.n:
        raise ValueError(f"data dimension {data.dim} does not match model dimension {net.n}")


def loss(net: OsNet, data: Trajectory, cfg: TrainConfig) -> LossValue:
    """Rollout MSE plus ``alpha * ||J_a||_2^2``.

    Raises DivergenceError if the rollout blows up.
    """
    _check_data(net, data)
    pred = _rollout(as_field(net).eval, data.states[0], data.times, _substeps(data.times, cfg.h))
    resid = pred[1:] - data.states[1:]
    data_loss = float(np.mean(resid * resid))
    reg, _ = regularizer(net)
    return LossValue(data_loss + cfg.alpha * reg, data_loss, reg)


@_quiet_overflow()
def adjoint_gradient(net: OsNet, data: Trajectory, cfg: TrainConfig) -> tuple[LossValue, Gradients]:
    """Loss and its parameter gradient via the continuous adjoint method."""
    _check_data(net, data)
    times = data.times
    nsub = _substeps(times, cfg.h)
    W = net.W
    Wt = np.ascontiguousarray(W.T)
    b = net.b
    om = net.omega
    dec = net.decoder
    spec = net.activation
    if spec.kind == "snake":
        a_freq = spec.a

        def act(u):
            s = np.sin(a_freq * u)
            return u + s * s / a_freq, 1.0 + np.sin(2.0 * a_freq * u)
    else:
        def act(u):
            return u + np.sin(u), 1.0 + np.cos(u)

    def f(x):
        return dec @ act(Wt @ x + b)[0]

    pred = _rollout(f, data.states[0], times, nsub)
    resid = pred[1:] - data.states[1:]
    count = resid.size
    data_loss = float(np.sum(resid * resid) / count)

    def aug(x, lam):
        # state derivative, adjoint derivative, and the parameter integrand pieces
        s, d = act(Wt @ x + b)
        p = Wt @ lam
        q = -(om @ p)
        dq = d * q
        return dec @ s, -(W @ dq), s, p, dq

    gW = np.zeros_like(W)
    gOm = np.zeros_like(om)
    gb = np.zeros_like(b)
    lam = np.zeros(net.n)
    for k in range(len(times) - 1, 0, -1):
        lam = lam + (2.0 / count) * resid[k - 1]
        x = pred[k].copy()
        dt = (times[k] - times[k - 1]) / nsub[k - 1]
        for _ in range(nsub[k - 1]):
            fx1, fl1, s1, p1, q1 = aug(x, lam)
            x2, l2 = x - 0.5 * dt * fx1, lam - 0.5 * dt * fl1
            fx2, fl2, s2, p2, q2 = aug(x2, l2)
            x3, l3 = x - 0.5 * dt * fx2, lam - 0.5 * dt * fl2
            fx3, fl3, s3, p3, q3 = aug(x3, l3)
            x4, l4 = x - dt * fx3, lam - dt * fl3
            fx4, fl4, s4, p4, q4 = aug(x4, l4)
            w = dt / 6.0
            # integrand of a^T df/dtheta at each stage, RK4-weighted
            gW += w * (np.outer(lam, om @ s1) + 2.0 * np.outer(l2, om @ s2)
                       + 2.0 * np.outer(l3, om @ s3) + np.outer(l4, om @ s4)
                       + np.outer(x, q1) + 2.0 * np.outer(x2, q2)
                       + 2.0 * np.outer(x3, q3) + np.outer(x4, q4))
            gOm += w * (np.outer(p1, s1) + 2.0 * np.outer(p2, s2)
                        + 2.0 * np.outer(p3, s3) + np.outer(p4, s4))
            gb += w * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
            x = x - w * (fx1 + 2.0 * fx2 + 2.0 * fx3 + fx4)
            lam = lam - w * (fl1 + 2.0 * fl2 + 2.0 * fl3 + fl4)
        if not np.all(np.isfinite(lam)):
            raise DivergenceError(times[k - 1], None)

    grads = Gradients(gW, gOm - gOm.T, gb)
    reg, g_reg = regularizer_gradient(net)
    if cfg.alpha:
        grads = grads + cfg.alpha * g_reg
    return LossValue(data_loss + cfg.alpha * reg, data_loss, reg), grads


@dataclass
class EpochRecord:
    epoch: int
    data_loss: float
    reg_value: float
    total_loss: float
    gradient_norm: float
    line_search_evals: int
    iterations: int
    status: str
    window_end: float


@dataclass
class TrainReport:
    alpha: float
    epochs: list = field(default_factory=list)
    j_a_norm: float = 0.0
    wall_time: float = 0.0
    omega_entry_range: tuple = (0.0, 0.0)
    normalized_mse: float | None = None
    diverged: bool = False
    line_search_failures: int = 0
    divergent_trials: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega_entry_range"] = list(self.omega_entry_range)
        epochs = d.pop("epochs")
        return {"epochs": epochs, "final": d}


def normalized_mse(data_loss: float, data: Trajectory) -> float:
    """Data loss divided by the mean per-component variance of the snapshots."""
    var = float(np.mean(np.var(data.states, axis=0)))
    return data_loss / var if var > 0 else math.inf


class _Objective:
    """Flat-parameter objective for the optimizer, with a small result cache."""

    def __init__(self, net: OsNet, data: Trajectory, cfg: TrainConfig):
        self.template = net
        self.data = data
        self.cfg = cfg
        self.cache: OrderedDict = OrderedDict()
        self.divergent_trials = 0

    def __call__(self, theta):
        net = self.template.with_flat(theta)
        try:
            value, grads = adjoint_gradient(net, self.data, self.cfg)
        except DivergenceError:
            self.divergent_trials += 1
            return math.inf, None
        self.cache[theta.tobytes()] = value
        if len(self.cache) > 64:
            self.cache.popitem(last=False)
        return value.total, grads.flat()

    def value_at(self, theta) -> LossValue:
        key = theta.tobytes()
        if key in self.cache:
            return self.cache[key]
        return loss(self.template.with_flat(theta), self.data, self.cfg)


def _window(data: Trajectory, fraction: float) -> Trajectory:
    if fraction >= 1.0:
        return data
    count = max(2, int(round(fraction * (len(data) - 1))) + 1)
    return Trajectory(data.times[:count], data.states[:count])


def train(net: OsNet, data: Trajectory, cfg: TrainConfig, log=None) -> tuple[OsNet, TrainReport]:
    """Run ``cfg.epochs`` L-BFGS calls, each warm-started with fresh curvature history.

    During the first ``cfg.warmup_epochs`` epochs only a leading part of the
    data window is fitted (growing linearly up to the full window).
    Divergence and line-search failures are recorded in the report; the
    remaining epochs still run.
    """
    _check_data(net, data)
    start = time.perf_counter()
    report = TrainReport(alpha=cfg.alpha)
    theta = net.flat()
    trials = 0
    for epoch in range(1, cfg.epochs + 1):
        window = _window(data, cfg.window_fraction(epoch))
        obj = _Objective(net, window, cfg)
        try:
            res = lbfgs_minimize(obj, theta, cfg.lbfgs)
        except ValueError:
            # objective not finite at the starting point
            report.diverged = True
            report.epochs.append(EpochRecord(epoch, math.inf, math.nan, math.inf, math.nan,
                                             0, 0, "diverged", float(window.times[-1])))
            break
        finally:
            trials += obj.divergent_trials
        theta = res.x
        value = obj.value_at(theta)
        if res.line_search_failed:
            report.line_search_failures += 1
        rec = EpochRecord(epoch, value.data_loss, value.reg, value.total,
                          float(np.linalg.norm(res.grad)), res.evals, res.iterations,
                          res.status, float(window.times[-1]))
        report.epochs.append(rec)
        if log is not None:
            log(rec)
    final = net.with_flat(theta)
    report.divergent_trials = trials
    report.j_a_norm = regularizer(final)[1]
    om = final.omega
    report.omega_entry_range = (float(om.min()), float(om.max()))
    if report.epochs and not report.diverged:
        try:
            report.normalized_mse = normalized_mse(loss(final, data, cfg).data_loss, data)
        except DivergenceError:
            report.diverged = True
    report.wall_time = time.perf_counter() - start
    return final, report
