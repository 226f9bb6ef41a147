"""Orbital stability diagnostics.

Poincare sections and period detection for sampled trajectories, monodromy
matrices and Floquet multipliers from the first variational equation, the
Krein central-zone criterion for canonical systems ``y' = lambda J H(t) y``,
and the norm bound ``||J_a||_2 < 2 / (L T)`` for OS-net.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .model import OsNet, regularizer
from .numerics import (as_matrix, as_vector, eigenvalues, perron_root,
                       spectral_norm, trapezoid_integral)
from .ode import DIVERGENCE_THRESHOLD, DivergenceError, Trajectory, _quiet_overflow, step_grid

__all__ = [
    "SectionSpec",
    "Crossing",
    "PeriodResult",
    "AttractorReport",
    "FloquetResult",
    "StabilityReport",
    "KreinPreconditionError",
    "default_section",
    "poincare_crossings",
    "detect_period",
    "analyze_attractor",
    "monodromy",
    "floquet_stability",
    "krein_central_zone",
    "corollary_report",
]

DEFAULT_CLUSTER_TOL = 0.02
DEFAULT_K_MAX = 8
MIN_CROSSINGS = 8
RADIUS_FLOOR = 1e-4  # relative to the largest crossing coordinate


@dataclass(frozen=True)
class SectionSpec:
    anchor: np.ndarray
    normal: np.ndarray
    direction: str = "positive"
    transient_skip: float = 0.0

    def __post_init__(self):
        anchor = as_vector(self.anchor, "anchor")
        normal = as_vector(self.normal, "normal")
        if normal.shape != anchor.shape:
            raise ValueError("anchor and normal must have the same dimension")
        if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            raise ValueError("section normal must be a unit vector")
        if self.direction not in ("positive", "negative"):
            raise ValueError("direction must be 'positive' or 'negative'")
        if self.transient_skip < 0:
            raise ValueError("transient_skip must be nonnegative")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "normal", normal)

    def to_dict(self) -> dict:
        return {"anchor": self.anchor.tolist(), "normal": self.normal.tolist(),
                "direction": self.direction, "transient_skip": self.transient_skip}


@dataclass(frozen=True)
class Crossing:
    time: float
    point: np.ndarray
    index: int  # first trajectory sample after the crossing


def default_section(traj: Trajectory, skip_fraction: float = 0.2) -> SectionSpec:
    """Plane through the post-transient mean, normal to the highest-variance axis."""
    t_skip = skip_fraction * traj.duration
    keep = traj.times >= traj.times[0] + t_skip
    states = traj.states[keep] if np.count_nonzero(keep) > 1 else traj.states
    axis = int(np.argmax(np.var(states, axis=0)))
    normal = np.zeros(traj.dim)
    normal[axis] = 1.0
    return SectionSpec(states.mean(axis=0), normal, "positive", t_skip)


def poincare_crossings(traj: Trajectory, section: SectionSpec) -> list[Crossing]:
    """Crossings of the section plane in the requested direction.

    Crossing times and points are refined by cubic interpolation around the
    bracketing samples. Crossings before ``t0 + transient_skip`` are dropped.
    """
    if traj.dim != len(section.normal):
        raise ValueError("trajectory and section dimensions differ")
    g = (traj.states - section.anchor) @ section.normal
    if section.direction == "positive":
        hits = np.nonzero((g[:-1] < 0) & (g[1:] >= 0))[0]
    else:
        hits = np.nonzero((g[:-1] > 0) & (g[1:] <= 0))[0]
    t_min = traj.times[0] + section.transient_skip
    out = []
    for i in hits:
        if traj.times[i + 1] < t_min:
            continue
        t, point = _refine(traj.times, traj.states, g, i)
        if t < t_min:
            continue
        out.append(Crossing(t, point, int(i + 1)))
    return out


def _refine(times, states, g, i):
    """Locate the zero of g between samples i and i+1.

    Cubic Lagrange interpolation through samples i-1..i+2 (linear near the
    ends of the record), root polished by Newton from the linear guess.
    """
    tau = g[i] / (g[i] - g[i + 1])
    lo, hi = i - 1, i + 3
    if lo < 0 or hi > len(times):
        t = times[i] + tau * (times[i + 1] - times[i])
        return float(t), states[i] + tau * (states[i + 1] - states[i])
    ts = times[lo:hi]
    gs = g[lo:hi]

    def basis(t):
        w = np.empty(4)
        dw = np.empty(4)
        for j in range(4):
            others = ts[np.arange(4) != j]
            den = np.prod(ts[j] - others)
            w[j] = np.prod(t - others) / den
            dw[j] = sum(np.prod(t - np.delete(others, m)) for m in range(3)) / den
        return w, dw

    t = times[i] + tau * (times[i + 1] - times[i])
    for _ in range(8):
        w, dw = basis(t)
        slope = dw @ gs
        if slope == 0:
            break
        step = (w @ gs) / slope
        t_new = min(max(t - step, times[i]), times[i + 1])
        if abs(t_new - t) <= 1e-15 * max(1.0, abs(t)):
            t = t_new
            break
        t = t_new
    w, _ = basis(t)
    return float(t), w @ states[lo:hi]


@dataclass(frozen=True)
class PeriodResult:
    period_k: Optional[int]
    status: str  # "periodic", "aperiodic" or "inconclusive"
    period_T: Optional[float]
    n_clusters: int
    cluster_radius: float
    labels: tuple = ()


def _cluster(points: np.ndarray, radius: float) -> list[int]:
    centers: list[np.ndarray] = []
    labels = []
    for p in points:
        for j, c in enumerate(centers):
            if np.linalg.norm(p - c) <= radius:
                labels.append(j)
                break
        else:
            centers.append(p)
            labels.append(len(centers) - 1)
    return labels


def detect_period(crossings, tolerance: float = DEFAULT_CLUSTER_TOL,
                  k_max: int = DEFAULT_K_MAX) -> PeriodResult:
    """Classify a crossing sequence as period-k, aperiodic or inconclusive.

    Points are clustered greedily with radius ``tolerance`` times the
    diameter of the crossing set, floored at ``RADIUS_FLOOR`` times the
    point scale so that a converged period-1 set stays one cluster. The
    sequence is period-k for the smallest ``k <= k_max`` with ``label[i] == label[i + k]`` throughout.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if len(crossings) < MIN_CROSSINGS:
        return PeriodResult(None, "inconclusive", None, 0, 0.0)
    times = np.array([c.time for c in crossings])
    pts = np.array([c.point for c in crossings])
    diffs = pts[:, None, :] - pts[None, :, :]
    diameter = float(np.sqrt((diffs ** 2).sum(-1)).max())
    radius = max(tolerance * diameter, RADIUS_FLOOR * max(1.0, float(np.abs(pts).max())))
    labels = _cluster(pts, radius)
    n_clusters = max(labels) + 1
    lab = np.array(labels)
    for k in range(1, k_max + 1):
        if len(lab) <= k:
            break
        if np.all(lab[k:] == lab[:-k]):
            period_T = float(np.mean(times[k:] - times[:-k]))
            return PeriodResult(k, "periodic", period_T, n_clusters, radius, tuple(labels))
    return PeriodResult(None, "aperiodic", None, n_clusters, radius, tuple(labels))


@dataclass
class AttractorReport:
    crossings: list
    detected_period_k: object  # int, "aperiodic" or "inconclusive"
    period_T: Optional[float]
    cluster_tolerance_used: float
    cluster_radius: float
    n_clusters: int
    bounded: bool
    max_norm: float
    section: dict = field(default_factory=dict)

    @property
    def is_periodic(self) -> bool:
        return isinstance(self.detected_period_k, int)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crossings"] = [{"t": c.time, "x": c.point.tolist()} for c in self.crossings]
        return d


def analyze_attractor(traj: Trajectory, section: SectionSpec | None = None,
                      tolerance: float = DEFAULT_CLUSTER_TOL, k_max: int = DEFAULT_K_MAX,
                      bound: float = DIVERGENCE_THRESHOLD) -> AttractorReport:
    section = default_section(traj) if section is None else section
    crossings = poincare_crossings(traj, section)
    res = detect_period(crossings, tolerance, k_max)
    max_norm = float(np.linalg.norm(traj.states, axis=1).max())
    label = res.period_k if res.status == "periodic" else res.status
    return AttractorReport(crossings, label, res.period_T, tolerance, res.cluster_radius,
                           res.n_clusters, max_norm < bound, max_norm, section.to_dict())


@_quiet_overflow()
def monodromy(field, orbit_point, period_T: float, h: float) -> np.ndarray:
    """Principal matrix solution of the variational equation after one period.

    Integrates ``x' = f(x)`` together with ``P' = Df(x) P`` from ``(x0, I)``
    over ``[0, period_T]`` with RK4.
    """
    if field.jacobian is None:
        raise ValueError("monodromy needs a vector field with a Jacobian")
    if not period_T > 0:
        raise ValueError("period must be positive")
    f, jac = field.eval, field.jacobian
    x = as_vector(orbit_point, "orbit_point")
    P = np.eye(len(x))
    times = step_grid(0.0, period_T, h)
    for t0, t1 in zip(times[:-1], times[1:]):
        dt = t1 - t0
        kx1, kp1 = f(x), jac(x) @ P
        x2, P2 = x + 0.5 * dt * kx1, P + 0.5 * dt * kp1
        kx2, kp2 = f(x2), jac(x2) @ P2
        x3, P3 = x + 0.5 * dt * kx2, P + 0.5 * dt * kp2
        kx3, kp3 = f(x3), jac(x3) @ P3
        x4, P4 = x + dt * kx3, P + dt * kp3
        kx4, kp4 = f(x4), jac(x4) @ P4
        x = x + (dt / 6.0) * (kx1 + 2 * kx2 + 2 * kx3 + kx4)
        P = P + (dt / 6.0) * (kp1 + 2 * kp2 + 2 * kp3 + kp4)
        if not (np.abs(x).max() <= DIVERGENCE_THRESHOLD and np.abs(P).max() <= DIVERGENCE_THRESHOLD):
            raise DivergenceError(t1, x)
    return P


@dataclass
class FloquetResult:
    multipliers: np.ndarray
    trivial: complex
    nontrivial: np.ndarray
    stable: bool
    note: str = ""

    @property
    def nontrivial_moduli(self) -> np.ndarray:
        return np.abs(self.nontrivial)


def floquet_stability(mono, margin: float = 1e-6) -> FloquetResult:
    """Floquet multipliers of a monodromy matrix and the stability verdict.

    The multiplier closest to 1 is taken as the trivial one (flow direction);
    the orbit is stable when every other multiplier has modulus below
    ``1 - margin``.
    """
    mults = eigenvalues(as_matrix(mono, "monodromy"))
    i = int(np.argmin(np.abs(mults - 1.0)))
    rest = np.delete(mults, i)
    moduli = np.abs(rest)
    stable = bool(np.all(moduli < 1.0 - margin))
    note = ""
    if abs(mults[i] - 1.0) > 1e-3:
        note = f"trivial multiplier {mults[i]:.6g} is not close to 1; orbit point or period may be off"
    if moduli.size and np.any(np.abs(moduli - 1.0) <= 1e-3):
        note = (note + "; " if note else "") + "marginal: a nontrivial multiplier lies on the unit circle"
    return FloquetResult(mults, complex(mults[i]), rest, stable, note)


class KreinPreconditionError(ValueError):
    """A premise of the central-zone criterion does not hold."""


def krein_central_zone(J, H_samples, T: float) -> tuple[float, bool]:
    """Central-zone bound ``2 / M(|J| int_0^T |H| dt)`` for ``y' = lambda J H(t) y``.

    ``H_samples`` is a list of ``(t, H(t))`` covering ``[0, T]``. Returns the
    bound and whether ``lambda = 1`` lies strictly inside it. Raises
    KreinPreconditionError when J is not skew-symmetric or H is not of
    positive type.
    """
    J = as_matrix(J, "J")
    n = J.shape[0]
    if J.shape != (n, n):
        raise KreinPreconditionError("J must be square")
    if spectral_norm(J + J.T) > 1e-10:
        raise KreinPreconditionError("J is not skew-symmetric")
    if len(H_samples) < 2:
        raise KreinPreconditionError("need at least two samples of H")
    t_first, t_last = H_samples[0][0], H_samples[-1][0]
    if abs(t_first) > 1e-12 or abs(t_last - T) > 1e-9 * max(1.0, T):
        raise KreinPreconditionError("H samples must span [0, T]")
    for t, H in H_samples:
        H = as_matrix(H, "H")
        if H.shape != (n, n):
            raise KreinPreconditionError(f"H({t:g}) has shape {H.shape}, expected {(n, n)}")
        if np.max(np.abs(H - H.T)) > 1e-10:
            raise KreinPreconditionError(f"H({t:g}) is not symmetric")
        if eigenvalues(H).real.min() < -1e-10:
            raise KreinPreconditionError(f"H({t:g}) is indefinite (not positive semidefinite)")
    integral = trapezoid_integral(H_samples)
    if eigenvalues(integral).real.min() <= 1e-12:
        raise KreinPreconditionError("integral of H over [0, T] is not positive definite")
    C = np.abs(J) @ trapezoid_integral([(t, np.abs(H)) for t, H in H_samples])
    rho = perron_root(C)
    bound = 2.0 / rho if rho > 0 else np.inf
    return float(bound), bool(1.0 < bound)


@dataclass
class StabilityReport:
    j_a_norm: float
    corollary_threshold: float
    corollary_satisfied: bool
    horizon_T: float
    derivative_bound_L: float
    floquet_multipliers: Optional[list] = None
    floquet_stable: Optional[bool] = None
    krein_bound: Optional[float] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def corollary_report(net: OsNet, horizon_T: float) -> StabilityReport:
    """Check ``||J_a||_2 < 2 / (L T)`` with ``T`` standing in for the orbit period."""
    if not horizon_T > 0:
        raise ValueError("horizon_T must be positive")
    L = net.activation.derivative_bound
    norm = regularizer(net)[1]
    threshold = 2.0 / (L * horizon_T)
    notes = [f"T={horizon_T:g} is a surrogate for the unknown orbit period "
             "(defaults to the training-data duration)"]
    return StabilityReport(norm, threshold, bool(norm < threshold), horizon_T, L, notes=notes)
