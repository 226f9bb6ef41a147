"""Limited-memory BFGS with a strong Wolfe line search."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["LbfgsConfig", "StepRecord", "LbfgsResult", "strong_wolfe", "lbfgs_minimize"]

CURVATURE_EPS = 1e-10
VALUE_RTOL = 1e-14


@dataclass(frozen=True)
class LbfgsConfig:
    history: int = 100
    inner_iterations: int = 20
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 25
    gtol: float = 1e-9

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        if self.history < 1 or self.inner_iterations < 1 or self.max_line_search < 1:
            raise ValueError("history, inner_iterations and max_line_search must be >= 1")


@dataclass
class StepRecord:
    """One accepted L-BFGS step, with what is needed to re-check Wolfe."""

    f_start: float
    slope_start: float
    alpha: float
    f_new: float
    slope_new: float
    grad_norm: float
    evals: int


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    iterations: int
    evals: int
    status: str
    steps: list = field(default_factory=list)

    @property
    def line_search_failed(self) -> bool:
        return self.status == "line_search_failed"


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if rad < 0 or not math.isfinite(rad):
        return None
    d2 = math.copysign(math.sqrt(rad), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def strong_wolfe(phi, f0, d0, alpha0=1.0, c1=1e-4, c2=0.9, max_evals=25, alpha_max=1e10):
    """Find a step satisfying the strong Wolfe conditions along a descent ray.

    ``phi(alpha)`` returns ``(value, slope, payload)``; a non-finite value is
    treated as a failed sufficient-decrease test. Returns
    ``(alpha, value, slope, payload, evals, ok)``. On failure the best point
    satisfying sufficient decrease (if any) is returned with ``ok=False``.
    """
    evals = 0
    best = None  # best Armijo-satisfying trial seen
    # values closer than rounding noise are not distinguishable
    f_tol = VALUE_RTOL * abs(f0)

    def armijo(a, fa):
        return math.isfinite(fa) and fa <= f0 + c1 * a * d0 + f_tol

    def note(a, fa, da, pl):
        nonlocal best
        if armijo(a, fa) and (best is None or fa < best[1]):
            best = (a, fa, da, pl)

    def fail():
        if best is None:
            return 0.0, f0, d0, None, evals, False
        return (*best, evals, False)

    prev = (0.0, f0, d0, None)
    alpha = alpha0
    lo = hi = None
    while evals < max_evals:
        fa, da, pl = phi(alpha)
        evals += 1
        note(alpha, fa, da, pl)
        if not armijo(alpha, fa) or (evals > 1 and fa >= prev[1]):
            lo, hi = prev, (alpha, fa, da, pl)
            break
        if abs(da) <= -c2 * d0:
            return alpha, fa, da, pl, evals, True
        if da >= 0:
            lo, hi = (alpha, fa, da, pl), prev
            break
        prev = (alpha, fa, da, pl)
        alpha = min(2.0 * alpha, alpha_max)
        if alpha >= alpha_max:
            return fail()
    else:
        return fail()

    # zoom: lo satisfies sufficient decrease and has the lower value
    while evals < max_evals:
        a_lo, f_lo, d_lo, _ = lo
        a_hi, f_hi, d_hi, _ = hi
        width = abs(a_hi - a_lo)
        if width <= 1e-16 * max(1.0, abs(a_lo)):
            break
        trial = None
        if math.isfinite(f_hi) and math.isfinite(d_hi):
            trial = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
        left, right = min(a_lo, a_hi), max(a_lo, a_hi)
        margin = 0.1 * width
        if trial is None or not (left + margin <= trial <= right - margin):
            trial = 0.5 * (a_lo + a_hi)
        fa, da, pl = phi(trial)
        evals += 1
        note(trial, fa, da, pl)
        if not armijo(trial, fa) or fa >= f_lo:
            hi = (trial, fa, da, pl)
        else:
            if abs(da) <= -c2 * d0:
                return trial, fa, da, pl, evals, True
            if da * (a_hi - a_lo) >= 0:
                hi = lo
            lo = (trial, fa, da, pl)
    return fail()


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        beta = rho * (y @ q)
        q += (a - beta) * s
    return q


def lbfgs_minimize(objective: Callable, x0, cfg: LbfgsConfig = LbfgsConfig(),
                   max_iter: int | None = None) -> LbfgsResult:
    """Minimize ``objective(x) -> (value, gradient)`` with L-BFGS.

    Stops when the gradient norm drops below ``cfg.gtol``, after
    ``max_iter`` (default ``cfg.inner_iterations``) iterations, or when the
    line search fails. The first trial step is 1 except on the very first
    iteration, where it is ``min(1, 1/|g|_1)`` because no curvature is known;
    that first step is then polished by one cubic-interpolation trial.
    """
    max_iter = cfg.inner_iterations if max_iter is None else max_iter
    x = np.array(x0, dtype=np.float64)
    f, g = objective(x)
    if not math.isfinite(f):
        raise ValueError("objective is not finite at the initial point")
    evals = 1
    pairs: deque = deque(maxlen=cfg.history)
    steps = []
    status = "max_iter"
    it = 0
    if np.linalg.norm(g) < cfg.gtol:
        return LbfgsResult(x, f, g, 0, evals, "converged", steps)

    while it < max_iter:
        if pairs:
            p = -_two_loop(g, list(pairs))
            alpha0 = 1.0
        else:
            p = -g
            alpha0 = min(1.0, 1.0 / np.sum(np.abs(g)))
        d0 = float(g @ p)
        if not d0 < 0:
            pairs.clear()
            p = -g
            alpha0 = min(1.0, 1.0 / np.sum(np.abs(g)))
            d0 = float(g @ p)

        def phi(a, x=x, p=p):
            xt = x + a * p
            ft, gt = objective(xt)
            if not math.isfinite(ft):
                return math.inf, math.nan, None
            return ft, float(gt @ p), gt

        alpha, f_new, d_new, g_new, n_ev, ok = strong_wolfe(
            phi, f, d0, alpha0, cfg.c1, cfg.c2, cfg.max_line_search)
        evals += n_ev
        if ok and not pairs:
            # no curvature yet: polish the blind first step with one cubic fit
            cand = _cubic_min(0.0, f, d0, alpha, f_new, d_new)
            if cand is not None and 0 < cand <= 10 * alpha and abs(cand - alpha) > 1e-3 * alpha:
                fc, dc, gc = phi(cand)
                evals += 1
                if (fc < f_new and fc <= f + cfg.c1 * cand * d0
                        and abs(dc) <= -cfg.c2 * d0):
                    alpha, f_new, d_new, g_new = cand, fc, dc, gc
                    n_ev += 1
        if g_new is None:
            status = "line_search_failed"
            break
        it += 1
        s = alpha * p
        y = g_new - g
        sy = float(s @ y)
        if ok and sy > CURVATURE_EPS:
            pairs.append((s, y, 1.0 / sy))
        if ok:
            steps.append(StepRecord(f, d0, alpha, f_new, d_new,
                                    float(np.linalg.norm(g_new)), n_ev))
        x, f, g = x + s, f_new, g_new
        if not ok:
            status = "line_search_failed"
            break
        if np.linalg.norm(g) < cfg.gtol:
            status = "converged"
            break
    return LbfgsResult(x, f, g, it, evals, status, steps)
