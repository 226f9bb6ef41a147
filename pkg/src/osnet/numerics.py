"""Small dense linear algebra used throughout the package.

Matrices and vectors are plain float64 numpy arrays. Every function here is
pure: inputs are never modified and fresh arrays are returned.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "EigenConvergenceError",
    "as_matrix",
    "as_vector",
    "spectral_norm",
    "leading_singular_pair",
    "perron_root",
    "eigenvalues",
    "hessenberg",
    "elementwise_abs",
    "trapezoid_integral",
]

POWER_TOL = 1e-12
POWER_MAX_ITER = 10_000
EIG_MAX_ORDER = 64
EIG_MAX_SWEEPS = 60  # per eigenvalue


class EigenConvergenceError(ArithmeticError):
    """Raised when shifted QR fails to deflate within its iteration cap."""


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_vector(v, name: str = "vector") -> np.ndarray:
    a = np.array(v, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _start_vector(n: int) -> np.ndarray:
    # fixed seed: results must not depend on global RNG state
    v = np.random.default_rng(20230501).standard_normal(n)
    return v / np.linalg.norm(v)


def leading_singular_pair(m) -> tuple[float, np.ndarray, np.ndarray]:
    """Largest singular value of ``m`` with its left/right singular vectors.

    Power iteration on ``m.T @ m`` from a seeded start vector. Returns
    ``(sigma, u, v)`` with ``m @ v = sigma * u``; for a zero matrix ``u`` and
    ``v`` are zero vectors.
    """
    a = as_matrix(m)
    gram = a.T @ a
    v = _start_vector(a.shape[1])
    lam = 0.0
    for _ in range(POWER_MAX_ITER):
        w = gram @ v
        wn = np.linalg.norm(w)
        if wn == 0.0:
            return 0.0, np.zeros(a.shape[0]), np.zeros(a.shape[1])
        v_new = w / wn
        lam_new = float(v_new @ gram @ v_new)
        done = abs(lam_new - lam) <= POWER_TOL * lam_new and np.linalg.norm(v_new - v) <= 1e-8
        v, lam = v_new, lam_new
        if done:
            break
    mv = a @ v
    sigma = float(np.linalg.norm(mv))
    u = mv / sigma if sigma > 0 else np.zeros(a.shape[0])
    return sigma, u, v


def spectral_norm(m) -> float:
    """Largest singular value (the matrix 2-norm)."""
    return leading_singular_pair(m)[0]


def perron_root(m) -> float:
    """Perron root of a square nonnegative matrix (its spectral radius).

    Power iteration on ``m + I`` from the all-ones vector, stopped when the
    Collatz-Wielandt bracket ``min(Av/v) <= rho <= max(Av/v)`` is tight. The
    unit shift keeps imprimitive matrices (e.g. permutations) from cycling.
    Reducible inputs that leave zero components fall back to the dense
    eigensolver.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"perron_root needs a square matrix, got {a.shape}")
    if np.any(a < 0):
        raise ValueError("perron_root needs a matrix with nonnegative entries")
    n = a.shape[0]
    if not np.any(a):
        return 0.0
    shifted = a + np.eye(n)
    v = np.ones(n) / np.sqrt(n)
    for _ in range(POWER_MAX_ITER):
        w = shifted @ v
        if np.all(v > 1e-300):
            ratios = w / v
            lo, hi = ratios.min(), ratios.max()
            if hi - lo <= POWER_TOL * hi:
                return float(0.5 * (lo + hi) - 1.0)
        v = w / np.linalg.norm(w)
    return float(np.max(np.abs(eigenvalues(a))))


def elementwise_abs(m) -> np.ndarray:
    return np.abs(as_matrix(m))


def trapezoid_integral(samples) -> np.ndarray:
    """Composite trapezoid rule for a sampled matrix-valued function.

    ``samples`` is a sequence of ``(time, matrix)`` pairs with strictly
    increasing times.
    """
    if len(samples) < 2:
        raise ValueError("trapezoid_integral needs at least two samples")
    times = np.array([t for t, _ in samples], dtype=np.float64)
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    mats = [as_matrix(h, "sample") for _, h in samples]
    shape = mats[0].shape
    if any(h.shape != shape for h in mats):
        raise ValueError("all samples must share one shape")
    stack = np.stack(mats)
    dt = np.diff(times)[:, None, None]
    return np.sum(0.5 * dt * (stack[1:] + stack[:-1]), axis=0)


# --- eigenvalues -----------------------------------------------------------

def hessenberg(m) -> np.ndarray:
    """Upper Hessenberg form via Householder similarity transforms."""
    h = as_matrix(m).astype(np.complex128)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k].copy()
        if not np.any(x[1:]):
            continue
        # scaled, unnormalized reflector: exact for columns with a single nonzero
        x /= np.abs(x).max()
        alpha = np.linalg.norm(x)
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        x[0] += phase * alpha
        tau = 2.0 / np.real(np.vdot(x, x))
        h[k + 1:, :] -= tau * np.outer(x, x.conj() @ h[k + 1:, :])
        h[:, k + 1:] -= tau * np.outer(h[:, k + 1:] @ x, x.conj())
        h[k + 2:, k] = 0.0
    return h


def _wilkinson_shift(a, b, c, d):
    # eigenvalue of [[a, b], [c, d]] closest to d
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt(tr * tr / 4 - det)
    l1, l2 = tr / 2 + disc, tr / 2 - disc
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


_BALANCE_CAP = 2.0 ** 100


def _givens(a, b):
    # pre-scaled so subnormal inputs cannot produce inf/nan
    big = max(abs(a), abs(b))
    if big == 0.0:
        return 1.0, 0.0
    a, b = a / big, b / big
    r = np.hypot(abs(a), abs(b))
    return a / r, b / r


def _isolate(a: np.ndarray) -> tuple[list, np.ndarray]:
    """Split off eigenvalues exposed by a row or column with zero off-diagonal part.

    Such a diagonal entry is an exact eigenvalue (a permutation makes the
    matrix block triangular), and deleting its row and column leaves the rest
    of the spectrum. Returns the isolated values and the remaining core.
    """
    isolated = []
    keep = list(range(a.shape[0]))
    found = True
    while found and keep:
        found = False
        core = a[np.ix_(keep, keep)]
        off = np.abs(core)
        np.fill_diagonal(off, 0.0)
        for j in range(len(keep)):
            if not off[j].any() or not off[:, j].any():
                isolated.append(core[j, j])
                del keep[j]
                found = True
                break
    return isolated, a[np.ix_(keep, keep)]


def _balance(a: np.ndarray) -> np.ndarray:
    """Parlett-Reinsch diagonal similarity by powers of two (spectrum unchanged, exactly)."""
    a = a.copy()
    n = a.shape[0]
    total = np.ones(n)
    converged = False
    while not converged:
        converged = True
        for i in range(n):
            c = np.sum(np.abs(a[:, i])) - abs(a[i, i])
            r = np.sum(np.abs(a[i, :])) - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            f = 1.0
            s = c + r
            while c < r / 2 and total[i] * f < _BALANCE_CAP:
                c, r, f = c * 2, r / 2, f * 2
            while c >= r * 2 and total[i] * f > 1 / _BALANCE_CAP:
                c, r, f = c / 2, r * 2, f / 2
            if (c + r) < 0.95 * s:
                converged = False
                total[i] *= f
                a[i, :] /= f
                a[:, i] *= f
    return a


def eigenvalues(m) -> np.ndarray:
    """Eigenvalues of a small real square matrix.

    Eigenvalues exposed by rows or columns with zero off-diagonal part are
    split off exactly; the rest is balanced, reduced to Hessenberg form by
    Householder reflections and finished by single-shift QR in complex
    arithmetic (Wilkinson shifts, exceptional shifts on stagnation).
    Complex eigenvalues are returned as exact conjugate pairs. The result is
    sorted by (real part, imaginary part).

    Raises EigenConvergenceError if some eigenvalue fails to deflate.
    """
    a = as_matrix(m)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"eigenvalues needs a square matrix, got {a.shape}")
    if n > EIG_MAX_ORDER:
        raise ValueError(f"order {n} exceeds the supported maximum {EIG_MAX_ORDER}")
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return np.zeros(n, dtype=np.complex128)
    a = a / scale
    # a perturbation of eps^2 * |A| is far below the QR backward error; dropping
    # such entries keeps subnormals and runaway balancing factors out
    a[np.abs(a) < np.finfo(np.float64).eps ** 2] = 0.0
    isolated, a = _isolate(a)
    n = a.shape[0]
    if n == 0:
        return _pair_conjugates(np.array(isolated, dtype=np.complex128) * scale, tol=1e-9 * scale)
    h = hessenberg(_balance(a))
    eps = np.finfo(np.float64).eps
    out = np.empty(n, dtype=np.complex128)
    hi = n - 1
    its = 0
    while hi >= 0:
        if hi == 0:
            out[0] = h[0, 0]
            break
        # find the start of the active unreduced block
        lo = hi
        while lo > 0:
            small = eps * (abs(h[lo, lo]) + abs(h[lo - 1, lo - 1]))
            if abs(h[lo, lo - 1]) <= max(small, eps * 1e-3):
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            out[hi] = h[hi, hi]
            hi -= 1
            its = 0
            continue
        its += 1
        if its > EIG_MAX_SWEEPS:
            raise EigenConvergenceError(
                f"QR iteration did not converge for eigenvalue index {hi}")
        if its % 11 == 0:
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1]) * (1 + 1j)
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi],
                                  h[hi, hi - 1], h[hi, hi])
        # one shifted QR sweep on the block lo..hi, applied to the full rows/cols
        for i in range(lo, hi + 1):
            h[i, i] -= mu
        rots = []
        for k in range(lo, hi):
            c, s = _givens(h[k, k], h[k + 1, k])
            rots.append((c, s))
            row_k = h[k, k:].copy()
            row_k1 = h[k + 1, k:].copy()
            h[k, k:] = np.conj(c) * row_k + np.conj(s) * row_k1
            h[k + 1, k:] = -s * row_k + c * row_k1
        for k, (c, s) in zip(range(lo, hi), rots):
            top = min(k + 2, hi) + 1
            col_k = h[:top, k].copy()
            col_k1 = h[:top, k + 1].copy()
            h[:top, k] = c * col_k + s * col_k1
            h[:top, k + 1] = -np.conj(s) * col_k + np.conj(c) * col_k1
        for i in range(lo, hi + 1):
            h[i, i] += mu
    out = np.concatenate([np.array(isolated, dtype=np.complex128), out])
    return _pair_conjugates(out * scale, tol=1e-9 * scale)


def _pair_conjugates(vals: np.ndarray, tol: float) -> np.ndarray:
    """Symmetrize a spectrum of a real matrix into exact conjugate pairs."""
    vals = vals.copy()
    real_mask = np.abs(vals.imag) <= tol
    result = list(vals[real_mask].real.astype(np.complex128))
    upper = sorted((v for v in vals[~real_mask] if v.imag > 0), key=lambda z: (z.real, z.imag))
    lower = [v for v in vals[~real_mask] if v.imag < 0]
    for z in upper:
        if lower:
            j = int(np.argmin([abs(z - np.conj(w)) for w in lower]))
            w = lower.pop(j)
            z = 0.5 * (z + np.conj(w))
        result.extend([z, np.conj(z)])
    for w in lower:  # unmatched leftovers: keep as-is with their partner
        result.extend([np.conj(w), w])
    result = np.array(result[: len(vals)], dtype=np.complex128)
    order = np.lexsort((result.imag, result.real))
    return result[order]
