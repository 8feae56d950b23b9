"""Hierarchical Gaussian energy model with local learning and Langevin inference.

The generative stack is a Markov chain of layers ``s^0 .. s^L``.  Layer
``l < L`` is Gaussian around a top-down prediction::

    s^l | s^{l+1}  ~  N( theta^l f(s^{l+1}),  lambda_l^{-1} I )

with ``f`` an element-wise leaky rectifier, and the top layer is Gaussian
around the memory vector ``m``.  Because every conditional is Gaussian the
normalizer is constant and never computed; all training signals reduce to
prediction errors ``e = value - prediction`` carried by error units.

Three dynamical processes operate on the stack, all integrated with the
Euler(-Maruyama) scheme using step ``dt`` over a phase of duration ``T``:

* prediction: ancestral sampling of the prior, either exact per layer
  (``direct``) or by simulating the per-layer Langevin dynamics
  (``langevin``), or noise-free mean propagation (``mean``);
* learning: gradient flow of ``theta^l`` down the quadratic prediction
  bound, an outer product of the local error and the local presynaptic
  rate (the update never references non-adjacent layers);
* inference: Langevin dynamics whose stationary law is the posterior
  combining the likelihood from below with the top-down prior.

Vectors may be passed as 1-d arrays or as ``(B, n)`` batches; batched
learning averages the gradient-flow drift over the batch.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, DivergenceError

__all__ = [
    "HierarchyParams",
    "LayerStack",
    "StepMetrics",
    "leaky_relu",
    "leaky_relu_deriv",
    "layer_mean",
    "layer_loss",
    "learn_layer",
    "sample_prior_stack",
    "posterior_sample",
    "step_observation",
    "predict_mean",
    "params_digest",
]

PRIOR_MODES = ("direct", "langevin", "mean")


def leaky_relu(x, slope):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, x, slope * x)


def leaky_relu_deriv(x, slope):
    """Derivative of the leaky rectifier; the kink at 0 takes the value 1."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, 1.0, slope)


@dataclass
class HierarchyParams:
    """Connection matrices and integration constants of the layer stack.

    ``n`` lists the layer widths ``n_0 .. n_L`` (``n_0`` is the observation
    width).  ``theta[l]`` has shape ``(n_l, n_{l+1})`` and maps rectified
    upper-layer activity down one level.  ``lam`` holds the L+1 scalar
    precisions; the precision matrices are ``lam[l] * I``.
    """

    n: tuple
    theta: list
    lam: np.ndarray
    slope: float = 0.01
    tau_s: float = 1.0
    tau_theta: float = 10.0
    dt: float = 0.05
    T: float = 10.0
    prior_mode: str = "direct"
    co_integrate: bool = False

    @property
    def L(self) -> int:
        return len(self.n) - 1

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    @classmethod
    def init(cls, widths, seed, *, lam=1.0, **kwargs) -> "HierarchyParams":
        """Fresh parameters with fan-in scaled Gaussian weights."""
        from .rng import RngStream, STREAM_PARAMS

        widths = tuple(int(w) for w in widths)
        rng = RngStream(int(seed), STREAM_PARAMS)
        theta = [
            rng.standard_normal((widths[l], widths[l + 1])) / np.sqrt(widths[l + 1])
            for l in range(len(widths) - 1)
        ]
        lam_arr = np.broadcast_to(np.asarray(lam, dtype=np.float64), (len(widths),))
        params = cls(n=widths, theta=theta, lam=np.array(lam_arr), **kwargs)
        params.validate()
        return params

    def validate(self) -> None:
        if len(self.n) < 2:
            raise ContractError("need at least one latent layer")
        if len(self.theta) != self.L:
            raise ContractError(f"expected {self.L} weight matrices, got {len(self.theta)}")
        for l, th in enumerate(self.theta):
            want = (self.n[l], self.n[l + 1])
            if th.shape != want:
                raise ContractError(f"theta[{l}] has shape {th.shape}, expected {want}")
            if not np.all(np.isfinite(th)):
                raise ContractError(f"theta[{l}] contains non-finite entries")
        if len(self.lam) != self.L + 1:
            raise ContractError(f"expected {self.L + 1} precisions, got {len(self.lam)}")
        if not np.all(np.asarray(self.lam) > 0):
            raise ContractError("all precisions must be positive")
        if not (self.dt > 0 and self.T >= self.dt):
            raise ContractError("need dt > 0 and T >= dt")
        if not (self.tau_s > 0 and self.tau_theta > 0):
            raise ContractError("time constants must be positive")
        if self.prior_mode not in PRIOR_MODES:
            raise ContractError(f"prior_mode must be one of {PRIOR_MODES}")

    def copy(self) -> "HierarchyParams":
        return replace(self, theta=[th.copy() for th in self.theta], lam=self.lam.copy())


@dataclass
class LayerStack:
    """Per-timestep samples and errors of the layer stack.

    ``s_hat`` holds the top-down prediction samples, ``s`` the received
    observation (index 0) and the posterior samples (indices 1..L).  The
    error fields are derived: ``e_hat[l] = s[l] - theta[l] f(s_hat[l+1])``
    (with the memory vector as the top-level prediction) and
    ``e[l] = s[l] - theta[l] f(s[l+1])``.  They are populated after an
    observation step and are recomputable from the other fields.
    """

    s_hat: list = None
    s: list = None
    e_hat: list = None
    e: list = None


@dataclass
class StepMetrics:
    """Per-timestep diagnostics: layer losses before learning, prediction MSE."""

    mse: float
    losses: np.ndarray


def _check_vector(x, width, what) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[-1] != width:
        raise ContractError(f"{what} must have trailing dimension {width}, got shape {arr.shape}")
    return arr


def layer_mean(theta_l, s_upper, slope):
    """Top-down Gaussian mean: ``theta_l @ f(s_upper)`` (batched on 2-d input)."""
    theta_l = np.asarray(theta_l, dtype=np.float64)
    if theta_l.ndim != 2:
        raise ContractError(f"theta must be a matrix, got shape {theta_l.shape}")
    s_upper = _check_vector(s_upper, theta_l.shape[1], "upper-layer sample")
    return leaky_relu(s_upper, slope) @ theta_l.T


def layer_loss(e_hat_l, lambda_l):
    """Quadratic prediction bound ``0.5 * lambda * ||e||^2`` (per batch row)."""
    e = np.asarray(e_hat_l, dtype=np.float64)
    if not np.all(np.isfinite(e)):
        raise ContractError("error vector contains non-finite entries")
    val = 0.5 * float(lambda_l) * np.sum(e * e, axis=-1)
    return float(val) if val.ndim == 0 else val


def _learn_phase_closed(theta_t, targets, feats, coef, steps):
    """Endpoint of `steps` Euler steps of the linear learning flow.

    With fixed presynaptic features F and targets Y the flow
    ``W <- W + coef * F^T (Y - F W)`` is linear; its k-step endpoint is
    evaluated spectrally through the SVD of F.  Modes with ``coef*d``
    below the cancellation floor use the exact small-d limit ``k*coef``.
    """
    u, sig, vt = np.linalg.svd(feats, full_matrices=False)
    resid0 = targets - feats @ theta_t
    d = sig * sig
    cd = coef * d
    with np.errstate(over="ignore", invalid="ignore"):
        decay = np.power(1.0 - cd, steps)
        phi = np.where(cd > 1e-12, (1.0 - decay) / np.where(d > 0, d, 1.0), steps * coef)
    gain = phi * sig
    return theta_t + vt.T @ (gain[:, None] * (u.T @ resid0))


def learn_layer(theta_l, target, s_hat_upper, lambda_l, params, *, method="closed"):
    """Integrate the Hebbian gradient flow of one connection matrix.

    The flow is ``d theta / dt = lambda/tau_theta * e f(s_hat_upper)^T``
    with the prediction error ``e = target - theta f(s_hat_upper)``
    re-evaluated continuously while the presynaptic sample stays fixed,
    run for ``T/dt`` Euler steps.  For 2-d inputs the drift is averaged
    over the batch.  ``method="closed"`` evaluates the identical linear
    iteration in closed form; ``method="euler"`` loops the steps.
    """
    theta_l = np.asarray(theta_l, dtype=np.float64)
    target = _check_vector(target, theta_l.shape[0], "target")
    upper = _check_vector(s_hat_upper, theta_l.shape[1], "presynaptic sample")
    targets = np.atleast_2d(target)
    feats = leaky_relu(np.atleast_2d(upper), params.slope)
    if targets.shape[0] != feats.shape[0]:
        raise ContractError("target and presynaptic batch sizes differ")
    batch = targets.shape[0]
    coef = params.dt * float(lambda_l) / (params.tau_theta * batch)
    steps = params.n_steps

    theta_t = theta_l.T.copy()
    if method == "closed":
        theta_t = _learn_phase_closed(theta_t, targets, feats, coef, steps)
    elif method == "euler":
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(steps):
                resid = targets - feats @ theta_t
                theta_t += coef * (feats.T @ resid)
    else:
        raise ContractError(f"unknown learning method {method!r}")

    updated = theta_t.T
    if not np.all(np.isfinite(updated)):
        raise DivergenceError("learning flow diverged (non-finite weights)")
    return updated


def _ou_chain(mean, lam, params, rng):
    """Langevin relaxation toward `mean` with precision `lam`, from the mean."""
    state = mean.copy()
    step = params.dt / params.tau_s
    noise_scale = np.sqrt(2.0 * params.dt / params.tau_s)
    noise = rng.normal_block(params.n_steps, state.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(params.n_steps):
            state += step * (-lam * (state - mean)) + noise_scale * noise[k]
    return state


def sample_prior_stack(params, m, rng, mode=None) -> LayerStack:
    """Ancestral top-down sample of the prior given the memory vector.

    ``direct`` draws each layer exactly (mean plus scaled unit Gaussian),
    ``langevin`` simulates the per-layer noise dynamics for T/dt steps from
    the mean, ``mean`` propagates means without noise.  Returns a stack
    with the prediction fields ``s_hat[0..L]`` populated.
    """
    mode = params.prior_mode if mode is None else mode
    if mode not in PRIOR_MODES:
        raise ContractError(f"mode must be one of {PRIOR_MODES}")
    m = _check_vector(m, params.n[-1], "memory vector")
    s_hat = [None] * (params.L + 1)
    mean = np.array(m, dtype=np.float64)
    for l in range(params.L, -1, -1):
        if l < params.L:
            mean = layer_mean(params.theta[l], s_hat[l + 1], params.slope)
        lam = float(params.lam[l])
        if mode == "direct":
            sample = mean + lam ** -0.5 * rng.standard_normal(mean.shape)
        elif mode == "langevin":
            sample = _ou_chain(mean, lam, params, rng)
        else:
            sample = mean.copy()
        if not np.all(np.isfinite(sample)):
            raise DivergenceError(f"prior sampling diverged at layer {l}", layer=l)
        s_hat[l] = sample
    return LayerStack(s_hat=s_hat)


def posterior_sample(
    target_below,
    s_init,
    s_hat_upper,
    theta_below,
    theta_here,
    lambdas,
    params,
    rng,
    *,
    deterministic=False,
):
    """Langevin sample of one layer's posterior, balancing data and prior.

    Integrates, for T/dt Euler steps from ``s_init``::

        ds = [ f'(s) * theta_below^T lam_b e_below  -  lam_h (s - mu) ] dt/tau_s
             + sqrt(2 dt / tau_s) xi

    where ``e_below = target_below - theta_below f(s)`` and the prior mean
    ``mu`` is ``theta_here f(s_hat_upper)``, or ``s_hat_upper`` itself when
    ``theta_here`` is None (top layer: the prior is centered on the memory).
    ``deterministic=True`` suppresses the noise, leaving pure drift.
    """
    lam_below, lam_here = (float(v) for v in lambdas)
    theta_below = np.asarray(theta_below, dtype=np.float64)
    target = np.atleast_2d(_check_vector(target_below, theta_below.shape[0], "target below"))
    state = np.atleast_2d(_check_vector(s_init, theta_below.shape[1], "initial state")).copy()
    squeeze = np.asarray(s_init).ndim == 1
    if theta_here is None:
        mu = np.atleast_2d(_check_vector(s_hat_upper, theta_below.shape[1], "prior mean"))
    else:
        mu = np.atleast_2d(layer_mean(theta_here, s_hat_upper, params.slope))

    step = params.dt / params.tau_s
    noise_scale = np.sqrt(2.0 * params.dt / params.tau_s)
    noise = None if deterministic else rng.normal_block(params.n_steps, state.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(params.n_steps):
            rate = leaky_relu(state, params.slope)
            e_below = target - rate @ theta_below.T
            drift = leaky_relu_deriv(state, params.slope) * (
                lam_below * (e_below @ theta_below)
            )
            drift -= lam_here * (state - mu)
            state += step * drift
            if noise is not None:
                state += noise_scale * noise[k]
    if not np.all(np.isfinite(state)):
        raise DivergenceError("posterior dynamics diverged")
    return state[0] if squeeze else state


def _phase(hook, name, **info):
    if hook is not None:
        hook(name, **info)


def step_observation(
    params,
    stack,
    m,
    observation,
    rng,
    *,
    phase_hook=None,
    learn=True,
    prior_samples=1,
    deterministic=False,
):
    """One observation timestep: per-layer learning then posterior inference.

    For ``l = 0 .. L-1`` the connection ``theta^l`` first follows its
    gradient flow toward the current target (the observation at the bottom,
    the freshly inferred posterior sample above), evaluated against the
    *prediction* sample of layer l+1; then layer l+1 is inferred by
    Langevin dynamics using the just-updated weights below.  Layer losses
    are recorded before each weight update.

    ``learn=False`` runs the same cascade with frozen weights (testing
    protocols).  ``prior_samples > 1`` draws extra prediction stacks from
    the same memory vector and averages the learning drift over them.
    Returns ``(params', stack', metrics)``; the input params object is not
    modified.
    """
    if stack.s_hat is None:
        raise ContractError("stack has no prediction samples; run sample_prior_stack first")
    m = np.asarray(m, dtype=np.float64)
    obs = _check_vector(observation, params.n[0], "observation")
    L = params.L

    mse = float(np.mean((stack.s_hat[0] - obs) ** 2))

    extra = []
    if learn and prior_samples > 1:
        extra = [
            sample_prior_stack(params, m, rng, mode=params.prior_mode)
            for _ in range(prior_samples - 1)
        ]

    new_theta = list(params.theta)
    targets = [obs]
    losses = np.zeros(L)
    for l in range(L):
        target = targets[l]
        e_pre = target - layer_mean(new_theta[l], stack.s_hat[l + 1], params.slope)
        losses[l] = float(np.mean(layer_loss(e_pre, params.lam[l])))
        try:
            if learn:
                _phase(
                    phase_hook,
                    "learn",
                    layer=l,
                    presynaptic=stack.s_hat[l + 1],
                    target=target,
                    theta_before=new_theta[l],
                )
                if params.co_integrate:
                    new_theta[l], post = _co_integrate_phase(
                        params, new_theta, stack, m, target, l, rng, deterministic
                    )
                    _phase(phase_hook, "infer", layer=l + 1)
                    targets.append(post)
                    continue
                if extra:
                    tiled_target = np.concatenate(
                        [np.atleast_2d(target)] * (1 + len(extra)), axis=0
                    )
                    wide_upper = np.concatenate(
                        [np.atleast_2d(stack.s_hat[l + 1])]
                        + [np.atleast_2d(st.s_hat[l + 1]) for st in extra],
                        axis=0,
                    )
                    new_theta[l] = learn_layer(
                        new_theta[l], tiled_target, wide_upper, params.lam[l], params
                    )
                else:
                    new_theta[l] = learn_layer(
                        new_theta[l], target, stack.s_hat[l + 1], params.lam[l], params
                    )
            upper = stack.s_hat[l + 2] if l + 1 < L else m
            theta_here = new_theta[l + 1] if l + 1 < L else None
            _phase(phase_hook, "infer", layer=l + 1)
            post = posterior_sample(
                target,
                stack.s_hat[l + 1],
                upper,
                new_theta[l],
                theta_here,
                (params.lam[l], params.lam[l + 1]),
                params,
                rng,
                deterministic=deterministic,
            )
        except DivergenceError as err:
            if err.layer is None:
                err.layer = l + 1
            raise
        targets.append(post)

    params2 = replace(params, theta=new_theta)
    e_hat, e = [], []
    for l in range(L + 1):
        pred = layer_mean(params2.theta[l], stack.s_hat[l + 1], params2.slope) if l < L else m
        e_hat.append(targets[l] - pred)
        recon = layer_mean(params2.theta[l], targets[l + 1], params2.slope) if l < L else m
        e.append(targets[l] - recon)
    stack2 = LayerStack(s_hat=list(stack.s_hat), s=targets, e_hat=e_hat, e=e)
    return params2, stack2, StepMetrics(mse=mse, losses=losses)


def _co_integrate_phase(params, new_theta, stack, m, target, l, rng, deterministic):
    """Simultaneous learning/inference variant: both flows share one clock."""
    L = params.L
    theta_t = new_theta[l].T.copy()
    feats = leaky_relu(np.atleast_2d(stack.s_hat[l + 1]), params.slope)
    targets2d = np.atleast_2d(target)
    batch = targets2d.shape[0]
    coef = params.dt * float(params.lam[l]) / (params.tau_theta * batch)

    upper = stack.s_hat[l + 2] if l + 1 < L else m
    theta_here = new_theta[l + 1] if l + 1 < L else None
    if theta_here is None:
        mu = np.atleast_2d(np.asarray(upper, dtype=np.float64))
    else:
        mu = np.atleast_2d(layer_mean(theta_here, upper, params.slope))
    state = np.atleast_2d(np.asarray(stack.s_hat[l + 1], dtype=np.float64)).copy()
    squeeze = np.asarray(stack.s_hat[l + 1]).ndim == 1
    lam_b, lam_h = float(params.lam[l]), float(params.lam[l + 1])
    step = params.dt / params.tau_s
    noise_scale = np.sqrt(2.0 * params.dt / params.tau_s)
    noise = None if deterministic else rng.normal_block(params.n_steps, state.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(params.n_steps):
            resid = targets2d - feats @ theta_t
            theta_t += coef * (feats.T @ resid)
            rate = leaky_relu(state, params.slope)
            e_below = targets2d - rate @ theta_t
            drift = leaky_relu_deriv(state, params.slope) * (lam_b * (e_below @ theta_t.T))
            drift -= lam_h * (state - mu)
            state += step * drift
            if noise is not None:
                state += noise_scale * noise[k]
    updated = theta_t.T
    if not np.all(np.isfinite(updated)) or not np.all(np.isfinite(state)):
        raise DivergenceError("co-integration diverged", layer=l)
    return updated, (state[0] if squeeze else state)


def predict_mean(params, top):
    """Noise-free readout: propagate layer means from a top-layer value down."""
    x = _check_vector(top, params.n[-1], "top-layer value")
    for l in range(params.L - 1, -1, -1):
        x = layer_mean(params.theta[l], x, params.slope)
    return x


def params_digest(params) -> str:
    """SHA-256 over the weight matrices (shape-delimited), for freeze checks."""
    h = hashlib.sha256()
    for th in params.theta:
        h.update(np.asarray(th.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(th, dtype=np.float64).tobytes())
    return h.hexdigest()
