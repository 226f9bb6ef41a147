"""Pipeline steps shared by the command-line driver and scripted runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .model import OsNet, as_field, init_net
from .ode import Trajectory, integrate, subsample
from .stability import (AttractorReport, FloquetResult, SectionSpec, StabilityReport,
                        analyze_attractor, corollary_report, default_section,
                        floquet_stability, monodromy)
from .systems import make_field

__all__ = ["generate_data", "initial_net", "rollout", "ground_truth_run", "section_from_config",
           "orbit_floquet", "AnalysisResult", "analyze"]


def generate_data(cfg: ExperimentConfig) -> Trajectory:
    """Ground-truth run at ``gen_step`` thinned to every ``snapshot_stride``-th sample."""
    full = integrate(make_field(cfg.system), cfg.initial_condition, cfg.t0, cfg.t1, cfg.gen_step)
    return subsample(full, cfg.snapshot_stride)


def initial_net(cfg: ExperimentConfig) -> OsNet:
    return init_net(cfg.system.dim, cfg.hidden_2m, cfg.activation, cfg.seed)


def rollout(net: OsNet, x0, horizon: float, h: float) -> Trajectory:
    """Integrate the learned field from ``x0`` over ``[0, horizon]``."""
    if not horizon > 0:
        raise ValueError("rollout horizon must be positive")
    return integrate(as_field(net), x0, 0.0, horizon, h)


def ground_truth_run(cfg: ExperimentConfig, horizon: float | None = None,
                     h: float | None = None) -> Trajectory:
    horizon = cfg.long_horizon if horizon is None else horizon
    h = cfg.ground_truth_step if h is None else h
    return integrate(make_field(cfg.system), cfg.initial_condition, cfg.t0, cfg.t0 + horizon, h)


def section_from_config(spec: dict | None) -> SectionSpec | None:
    if not spec:
        return None
    normal = np.asarray(spec["normal"], dtype=float)
    return SectionSpec(np.asarray(spec["anchor"], dtype=float), normal / np.linalg.norm(normal),
                       spec.get("direction", "positive"), float(spec.get("transient_skip", 0.0)))


def orbit_floquet(field, report: AttractorReport, h: float) -> FloquetResult:
    """Floquet multipliers along the detected orbit, starting at the last crossing."""
    if not report.is_periodic:
        raise ValueError("no period was detected")
    mono = monodromy(field, report.crossings[-1].point, report.period_T, h)
    return floquet_stability(mono)


@dataclass
class AnalysisResult:
    attractor: AttractorReport
    floquet: FloquetResult | None = None
    stability: StabilityReport | None = None


def analyze(traj: Trajectory, field=None, h: float = 0.01, net: OsNet | None = None,
            horizon_T: float | None = None, section: SectionSpec | None = None,
            tolerance: float = 0.02, skip_fraction: float = 0.2) -> AnalysisResult:
    """Period detection on ``traj``; Floquet analysis when ``field`` is given and a period is found.

    With ``net`` the corollary bound is also evaluated for ``horizon_T``.
    """
    if section is None:
        section = default_section(traj, skip_fraction)
    att = analyze_attractor(traj, section, tolerance)
    out = AnalysisResult(att)
    if field is not None and att.is_periodic:
        out.floquet = orbit_floquet(field, att, h)
    if net is not None:
        rep = corollary_report(net, horizon_T)
        if out.floquet is not None:
            rep.floquet_multipliers = out.floquet.multipliers.tolist()
            rep.floquet_stable = out.floquet.stable
            if out.floquet.note:
                rep.notes.append(out.floquet.note)
        elif not att.is_periodic:
            rep.notes.append(f"no Floquet analysis: period detection returned {att.detected_period_k}")
        out.stability = rep
    return out
