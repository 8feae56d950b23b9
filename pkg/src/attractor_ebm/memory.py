"""Continuous-attractor memory: fixed low-rank recurrent dynamics with adaptation.

The memory is a rate network whose synaptic input ``I`` relaxes toward the
sum of recurrent feedback ``W m``, negative adaptation ``-V`` and an
external drive (top-layer latent activity plus a projected action)::

    tau_I dI/dt = -I + W m - V + drive        m = H(I)
    tau_V dV/dt = -V + beta m

``W`` is a randomly generated low-rank matrix rescaled to spectral norm
``alpha``; it is fixed at construction and never learned.  Actions enter
through a fixed projection ``A`` with unit-norm columns.  A memory
transition relaxes these dynamics for a fixed duration under constant
drive and is fully deterministic.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, DivergenceError
from .rng import RngStream

__all__ = [
    "MemoryState",
    "MemorySpec",
    "build_recurrent",
    "build_action_matrix",
    "encode_action",
    "cann_step",
    "memory_update",
    "one_hot",
    "zero_action",
    "validate_one_hot",
    "spectral_norm_power_iteration",
    "matrix_digest",
]

FIRING_FNS = {
    "tanh": np.tanh,
    "identity": lambda x: np.asarray(x, dtype=np.float64),
}


def one_hot(index: int, n: int) -> np.ndarray:
    a = np.zeros(n)
    a[index] = 1.0
    return a


def zero_action(n: int) -> np.ndarray:
    return np.zeros(n)


def validate_one_hot(action) -> int:
    """Return the hot index; raise if the vector is not exactly one-hot."""
    a = np.asarray(action, dtype=np.float64)
    if a.ndim != 1:
        raise ContractError(f"action must be a vector, got shape {a.shape}")
    ones = np.flatnonzero(a == 1.0)
    if len(ones) != 1 or np.count_nonzero(a) != 1:
        raise ContractError("action is not one-hot")
    return int(ones[0])


def spectral_norm_power_iteration(W, iters=200, seed=0) -> float:
    """Largest singular value estimated by power iteration on ``W^T W``."""
    n = W.shape[1]
    v = RngStream(seed, 0).standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = W.T @ (W @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return float(np.sqrt(v @ (W.T @ (W @ v))))


def matrix_digest(M) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(M.shape, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(M, dtype=np.float64).tobytes())
    return h.hexdigest()


def build_recurrent(n: int, rank: int, alpha: float, seed: int) -> np.ndarray:
    """Random low-rank recurrent matrix rescaled to spectral norm ``alpha``.

    ``W = alpha * U V^T / sigma_max(U V^T)`` with ``U, V`` standard Gaussian
    ``n x rank`` draws from the seed.  The rescaled norm is re-verified by
    power iteration (200 iterations) to one part in a thousand.
    """
    if not 1 <= rank <= n:
        raise ContractError(f"rank must lie in [1, {n}], got {rank}")
    if alpha < 0:
        raise ContractError("alpha must be non-negative")
    rng = RngStream(int(seed), 0)
    u = rng.standard_normal((n, rank))
    v = rng.standard_normal((n, rank))
    if alpha == 0.0:
        return np.zeros((n, n))
    raw = u @ v.T
    W = alpha * raw / np.linalg.norm(raw, 2)
    measured = spectral_norm_power_iteration(W, iters=200, seed=int(seed))
    if abs(measured - alpha) > 1e-3:
        raise ContractError(
            f"spectral norm {measured:.6f} deviates from alpha {alpha:.6f}"
        )
    return W


def build_action_matrix(n: int, n_actions: int, seed: int, gain: float = 1.0) -> np.ndarray:
    """Fixed action projection: seeded Gaussian, unit-norm columns, scaled by gain."""
    if n_actions < 1:
        raise ContractError("need at least one action dimension")
    rng = RngStream(int(seed), 0)
    g = rng.standard_normal((n, n_actions))
    A = gain * g / np.linalg.norm(g, axis=0, keepdims=True)
    _validate_action_columns(A)
    return A


def _validate_action_columns(A) -> None:
    """Distinct actions must produce distinct drives."""
    n_actions = A.shape[1]
    for j in range(n_actions):
        for k in range(j + 1, n_actions):
            if np.linalg.norm(A[:, j] - A[:, k]) <= 1e-6:
                raise ContractError(f"action columns {j} and {k} are not distinct")


def encode_action(action, A) -> np.ndarray:
    """Project an action vector (or batch of them) into the memory space."""
    a = np.asarray(action, dtype=np.float64)
    if a.shape[-1] != A.shape[1]:
        raise ContractError(
            f"action has width {a.shape[-1]}, projection expects {A.shape[1]}"
        )
    return a @ A.T


@dataclass
class MemoryState:
    """Instantaneous CANN state plus its fixed construction-time structure.

    ``I``, ``m``, ``V`` may be vectors or ``(B, n)`` batches.  ``W`` and
    ``A`` are shared, read-only structure; transitions return new states
    and never touch them.
    """

    I: np.ndarray
    m: np.ndarray
    V: np.ndarray
    W: np.ndarray
    A: np.ndarray
    alpha: float
    beta: float
    tau_I: float = 1.0
    tau_V: float = 1.0
    firing: str = "tanh"

    def firing_fn(self):
        return FIRING_FNS[self.firing]

    def copy(self) -> "MemoryState":
        return replace(self, I=self.I.copy(), m=self.m.copy(), V=self.V.copy())


@dataclass
class MemorySpec:
    """Construction recipe for the memory; everything regenerable from seeds."""

    n: int
    rank: int
    alpha: float
    beta: float
    n_actions: int
    w_seed: int
    a_seed: int
    action_gain: float = 1.0
    firing: str = "tanh"
    tau_I: float = 1.0
    tau_V: float = 1.0
    duration: float = 10.0
    init_std: float = 0.1

    def build_matrices(self):
        W = build_recurrent(self.n, self.rank, self.alpha, self.w_seed)
        A = build_action_matrix(self.n, self.n_actions, self.a_seed, self.action_gain)
        return W, A

    def initial_state(self, rng, batch=None) -> MemoryState:
        """Random start: small Gaussian synaptic input, zero adaptation."""
        W, A = self.build_matrices()
        shape = (self.n,) if batch is None else (batch, self.n)
        I = self.init_std * rng.standard_normal(shape)
        H = FIRING_FNS[self.firing]
        return MemoryState(
            I=I,
            m=H(I),
            V=np.zeros(shape),
            W=W,
            A=A,
            alpha=self.alpha,
            beta=self.beta,
            tau_I=self.tau_I,
            tau_V=self.tau_V,
            firing=self.firing,
        )


def cann_step(state: MemoryState, drive, dt: float) -> MemoryState:
    """One Euler step of the attractor dynamics under the given drive."""
    drive = np.asarray(drive, dtype=np.float64)
    if drive.shape[-1] != state.W.shape[0]:
        raise ContractError(
            f"drive has width {drive.shape[-1]}, memory expects {state.W.shape[0]}"
        )
    I = state.I + dt * (-state.I + state.m @ state.W.T - state.V + drive) / state.tau_I
    V = state.V + dt * (-state.V + state.beta * state.m) / state.tau_V
    if not (np.all(np.isfinite(I)) and np.all(np.isfinite(V))):
        raise DivergenceError("memory dynamics diverged", layer="memory")
    m = state.firing_fn()(I)
    return replace(state, I=I, m=m, V=V)


def memory_update(state: MemoryState, s_top, action, duration: float, dt: float) -> MemoryState:
    """Deterministic memory transition: relax under constant drive ``s_top + A a``.

    Applies ``duration/dt`` Euler steps.  No noise enters, so identical
    inputs produce identical outputs.
    """
    if duration < dt:
        raise ContractError("duration must be at least one Euler step")
    drive = np.asarray(s_top, dtype=np.float64) + encode_action(action, state.A)
    steps = int(round(duration / dt))
    for _ in range(steps):
        state = cann_step(state, drive, dt)
    return state
