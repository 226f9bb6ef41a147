"""The OS-net vector field ``x' = W Omega sigma(W^T x + b)`` with ``Omega = K - K^T``.

``W`` is n x 2m, ``K`` is 2m x 2m. The encoder is ``W^T``, the decoder
``W Omega``, so the product ``J = W Omega W^T`` is skew-symmetric for every
parameter value.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix, as_vector, leading_singular_pair
from .ode import VectorField

__all__ = [
    "ActivationSpec",
    "OsNet",
    "Gradients",
    "activation_eval",
    "init_net",
    "forward",
    "state_jacobian",
    "j_matrix",
    "regularizer",
    "regularizer_gradient",
    "parameter_gradient_products",
    "as_field",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_dict",
    "net_from_dict",
]

ACTIVATION_KINDS = ("snake", "x_plus_sin")


@dataclass(frozen=True)
class ActivationSpec:
    kind: str = "snake"
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.kind == "snake" and not self.a > 0:
            raise ValueError("snake frequency must be positive")

    @property
    def derivative_bound(self) -> float:
        # sup of 1 + sin(2 a x) and of 1 + cos(x)
        return 2.0

    def to_dict(self) -> dict:
        if self.kind == "snake":
            return {"kind": "snake", "a": self.a}
        return {"kind": self.kind}


def activation_eval(spec: ActivationSpec, v):
    """Return ``(sigma(v), sigma'(v))`` componentwise."""
    v = np.asarray(v, dtype=np.float64)
    if spec.kind == "snake":
        a = spec.a
        s = np.sin(a * v)
        return v + s * s / a, 1.0 + np.sin(2.0 * a * v)
    return v + np.sin(v), 1.0 + np.cos(v)


@dataclass(frozen=True)
class OsNet:
    W: np.ndarray
    K: np.ndarray
    b: np.ndarray
    activation: ActivationSpec = ActivationSpec()

    def __post_init__(self):
        W = as_matrix(self.W, "W")
        K = as_matrix(self.K, "K")
        b = as_vector(self.b, "b")
        width = W.shape[1]
        if width % 2:
            raise ValueError(f"hidden width must be even, got {width}")
        if K.shape != (width, width) or b.shape != (width,):
            raise ValueError(
                f"inconsistent shapes: W {W.shape}, K {K.shape}, b {b.shape}")
        for arr in (W, K, b):
            arr.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[1] // 2

    @property
    def omega(self) -> np.ndarray:
        return self.K - self.K.T

    @property
    def decoder(self) -> np.ndarray:
        return self.W @ self.omega

    def replace(self, W=None, K=None, b=None) -> "OsNet":
        return OsNet(self.W if W is None else W, self.K if K is None else K,
                     self.b if b is None else b, self.activation)

    # flat parameter vector, ordering W, K, b (row-major)
    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.K.ravel(), self.b])

    def with_flat(self, theta) -> "OsNet":
        n, w = self.W.shape
        i, j = n * w, n * w + w * w
        return self.replace(theta[:i].reshape(n, w), theta[i:j].reshape(w, w), theta[j:])


def init_net(n: int, hidden: int, activation: ActivationSpec, seed: int) -> OsNet:
    """Uniform(-s, s) weights with ``s = 1/sqrt(hidden)``, zero bias."""
    if hidden < 2 or hidden % 2:
        raise ValueError("hidden width must be even and >= 2")
    rng = np.random.default_rng(seed)
    s = 1.0 / np.sqrt(hidden)
    W = rng.uniform(-s, s, size=(n, hidden))
    K = rng.uniform(-s, s, size=(hidden, hidden))
    return OsNet(W, K, np.zeros(hidden), activation)


def _check_x(net: OsNet, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.n,):
        raise ValueError(f"state must have shape ({net.n},), got {x.shape}")
    return x


def forward(net: OsNet, x) -> np.ndarray:
    x = _check_x(net, x)
    value, _ = activation_eval(net.activation, net.W.T @ x + net.b)
    return net.decoder @ value


def state_jacobian(net: OsNet, x) -> np.ndarray:
    """``d forward / dx = W Omega diag(sigma') W^T``."""
    x = _check_x(net, x)
    _, d = activation_eval(net.activation, net.W.T @ x + net.b)
    return (net.decoder * d) @ net.W.T


def j_matrix(net: OsNet) -> np.ndarray:
    """``W Omega W^T``; the product is replaced by its skew part so ``J + J^T`` is exactly zero."""
    b = net.W @ net.omega @ net.W.T
    return 0.5 * (b - b.T)


def regularizer(net: OsNet) -> tuple[float, float]:
    """``(||J_a||_2^2, ||J_a||_2)`` where ``J_a`` is ``|J|`` entrywise."""
    norm = leading_singular_pair(np.abs(j_matrix(net)))[0]
    return norm * norm, norm


@dataclass
class Gradients:
    """Gradient blocks with the shapes of ``W``, ``K`` and ``b``."""

    W: np.ndarray
    K: np.ndarray
    b: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.K.ravel(), self.b])

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(self.W + other.W, self.K + other.K, self.b + other.b)

    def __mul__(self, c: float) -> "Gradients":
        return Gradients(c * self.W, c * self.K, c * self.b)

    __rmul__ = __mul__


def _omega_to_k(g_omega: np.ndarray) -> np.ndarray:
    # Omega = K - K^T, so dL/dK = G - G^T
    return g_omega - g_omega.T


def regularizer_gradient(net: OsNet) -> tuple[float, Gradients]:
    """Value and parameter gradient of ``||J_a||_2^2``.

    Uses the leading singular pair ``(u, v)`` of ``|J|``:
    ``d||J_a||/dJ = sign(J) * u v^T``, with sign(0) = 0.
    """
    J = j_matrix(net)
    sigma, u, v = leading_singular_pair(np.abs(J))
    g_J = 2.0 * sigma * np.sign(J) * np.outer(u, v)
    W, om = net.W, net.omega
    g_W = g_J @ W @ om.T + g_J.T @ W @ om
    g_om = W.T @ g_J @ W
    return sigma * sigma, Gradients(g_W, _omega_to_k(g_om), np.zeros_like(net.b))


def parameter_gradient_products(net: OsNet, x, adjoint) -> Gradients:
    """Gradient of ``adjoint . forward(net, x)`` with respect to W, K and b."""
    x = _check_x(net, x)
    adjoint = np.asarray(adjoint, dtype=np.float64)
    if adjoint.shape != (net.n,):
        raise ValueError(f"adjoint must have shape ({net.n},), got {adjoint.shape}")
    om = net.omega
    s, d = activation_eval(net.activation, net.W.T @ x + net.b)
    p = net.W.T @ adjoint
    q = -(om @ p)  # Omega^T p
    dq = d * q
    g_W = np.outer(adjoint, om @ s) + np.outer(x, dq)
    g_om = np.outer(p, s)
    return Gradients(g_W, _omega_to_k(g_om), dq)


def as_field(net: OsNet) -> VectorField:
    """Wrap the net as a VectorField with cached matrices for fast rollouts."""
    Wt = np.ascontiguousarray(net.W.T)
    b = net.b.copy()
    dec = net.decoder
    spec = net.activation

    if spec.kind == "snake":
        a = spec.a
        inv_a = 1.0 / a

        def f(x):
            u = Wt @ x + b
            s = np.sin(a * u)
            return dec @ (u + inv_a * s * s)
    else:
        def f(x):
            u = Wt @ x + b
            return dec @ (u + np.sin(u))

    def jac(x):
        _, d = activation_eval(spec, Wt @ x + b)
        return (dec * d) @ Wt

    return VectorField(dim=net.n, eval=f, jacobian=jac)


# --- checkpoints -----------------------------------------------------------

def checkpoint_dict(net: OsNet, seed: int | None = None, provenance: str | None = None) -> dict:
    return {
        "n": net.n,
        "m": net.m,
        "activation": net.activation.to_dict(),
        "W": net.W.ravel().tolist(),
        "K": net.K.ravel().tolist(),
        "b": net.b.tolist(),
        "seed": seed,
        "provenance": provenance,
    }


def net_from_dict(d: dict) -> OsNet:
    n, m = int(d["n"]), int(d["m"])
    act = d["activation"]
    spec = ActivationSpec(act["kind"], float(act.get("a", 1.0)))
    W = np.array(d["W"], dtype=np.float64).reshape(n, 2 * m)
    K = np.array(d["K"], dtype=np.float64).reshape(2 * m, 2 * m)
    return OsNet(W, K, np.array(d["b"], dtype=np.float64), spec)


def save_checkpoint(path, net: OsNet, seed: int | None = None, provenance: str | None = None):
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(net, seed, provenance), fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> OsNet:
    with open(path) as fh:
        return net_from_dict(json.load(fh))
