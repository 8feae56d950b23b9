"""Training and evaluation orchestration.

The trainer runs the per-timestep cycle

    predict -> receive -> learn -> infer -> memory update

over a batch of independent environment streams that share one set of
connection weights; the learning drift is averaged across the batch at
every Euler step, so per-step dynamics do not depend on the batch size.
Evaluation protocols (memory initialization from a subset of patches,
whole-image generation, sequence replay, imagination rollouts) freeze the
weights and only run prediction, inference and memory transitions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import Checkpoint
from .envs import EyeMoveEnv, GridWorldEnv, SequenceEnv, patchify, unpatchify
from .errors import ContractError, DivergenceError
from .hierarchy import (
    HierarchyParams,
    layer_mean,
    params_digest,
    predict_mean,
    sample_prior_stack,
    step_observation,
)
from .memory import MemorySpec, MemoryState, memory_update, one_hot, zero_action
from .rng import (
    STREAM_MATRIX_SEEDS,
    STREAM_MEMORY_BASE,
    STREAM_NOISE_BASE,
    STREAM_POLICY_BASE,
    BatchedStreams,
    RngStream,
)

log = logging.getLogger("attractor_ebm")

ENV_NAMES = ("eye", "grid", "seq")
# Stream base for per-item draws in evaluation protocols (patch selection).
STREAM_SELECT_BASE = 4000


@dataclass
class TrainConfig:
    """Everything a training run needs; mirrors the config-file keys."""

    widths: tuple = (16, 64, 64)
    lam: tuple = (1.0,)
    slope: float = 0.01
    tau_s: float = 1.0
    inv_tau_theta: float = 0.1
    dt: float = 0.05
    T: float = 10.0
    prior_mode: str = "direct"
    prior_samples: int = 1
    co_integrate: bool = False
    deterministic: bool = False
    alpha: float = 0.5
    beta: float = 0.0
    rank: int = 0
    action_gain: float = 1.0
    firing: str = "tanh"
    tau_I: float = 1.0
    tau_V: float = 1.0
    memory_duration: float = 0.0
    epochs: int = 10
    batch_size: int = 32
    steps_per_epoch: int = 1
    switch_every: int = 16
    seed: int = 0
    dataset: str = ""
    env: str = "eye"
    k_init: int = 4
    eval_every: int = 0
    patch_rows: int = 4
    patch_cols: int = 4
    grid_rows: int = 0
    grid_cols: int = 0

    @property
    def tau_theta(self) -> float:
        return 1.0 / self.inv_tau_theta

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def resolved_rank(self) -> int:
        n_top = self.widths[-1]
        rank = self.rank if self.rank > 0 else max(8, n_top // 16)
        return min(rank, n_top)

    def resolved_memory_duration(self) -> float:
        return self.memory_duration if self.memory_duration > 0 else self.T

    def lambdas(self) -> np.ndarray:
        lam = np.asarray(self.lam, dtype=np.float64)
        return np.array(np.broadcast_to(lam, (len(self.widths),)))

    def validate(self) -> None:
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ContractError("widths must list at least two positive layer sizes")
        if self.env not in ENV_NAMES:
            raise ContractError(f"env must be one of {ENV_NAMES}")
        if len(self.lam) not in (1, len(self.widths)):
            raise ContractError("lambda must be one value or one per layer")
        if self.inv_tau_theta <= 0:
            raise ContractError("inv_tau_theta must be positive")
        if not (self.dt > 0 and self.T >= self.dt):
            raise ContractError("need dt > 0 and T >= dt")
        if self.epochs < 0 or self.batch_size < 1 or self.steps_per_epoch < 1:
            raise ContractError("epochs >= 0, batch_size >= 1, steps_per_epoch >= 1")
        if self.prior_samples < 1:
            raise ContractError("prior_samples must be at least 1")
        if self.switch_every < 1:
            raise ContractError("switch_every must be at least 1")
        if self.k_init < 1:
            raise ContractError("k_init must be at least 1")
        if self.env == "grid" and (self.grid_rows < 1 or self.grid_cols < 1):
            raise ContractError("grid env needs grid_rows and grid_cols")
        if self.firing not in ("tanh", "identity"):
            raise ContractError("firing must be 'tanh' or 'identity'")
        if self.prior_mode not in ("direct", "langevin", "mean"):
            raise ContractError("prior_mode must be direct, langevin or mean")
        if self.alpha < 0 or self.beta < 0:
            raise ContractError("alpha and beta must be non-negative")
        if self.action_gain <= 0:
            raise ContractError("action_gain must be positive")


@dataclass
class MetricsLog:
    """Per-epoch aggregates, one row per epoch: epoch, step, mse, loss per layer."""

    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @classmethod
    def for_layers(cls, n_layers: int) -> "MetricsLog":
        header = ["epoch", "step", "mse"] + [f"loss_l{l}" for l in range(n_layers)]
        return cls(header=header, rows=[])

    def csv_bytes(self) -> bytes:
        def fmt(v):
            return repr(float(v)) if isinstance(v, float) else str(v)

        lines = [",".join(self.header)]
        for row in self.rows:
            lines.append(",".join(fmt(v) for v in row))
        return ("\n".join(lines) + "\n").encode("ascii")


def make_hierarchy(config: TrainConfig) -> HierarchyParams:
    return HierarchyParams.init(
        config.widths,
        config.seed,
        lam=config.lambdas(),
        slope=config.slope,
        tau_s=config.tau_s,
        tau_theta=config.tau_theta,
        dt=config.dt,
        T=config.T,
        prior_mode="mean" if config.deterministic else config.prior_mode,
        co_integrate=config.co_integrate,
    )


def make_memory_spec(config: TrainConfig, n_actions: int) -> MemorySpec:
    seeds = RngStream(config.seed, STREAM_MATRIX_SEEDS).integers(0, 2**62, size=2)
    return MemorySpec(
        n=config.widths[-1],
        rank=config.resolved_rank(),
        alpha=config.alpha,
        beta=config.beta,
        n_actions=n_actions,
        w_seed=int(seeds[0]),
        a_seed=int(seeds[1]),
        action_gain=config.action_gain,
        firing=config.firing,
        tau_I=config.tau_I,
        tau_V=config.tau_V,
        duration=config.resolved_memory_duration(),
    )


def _check_dataset_range(dataset: np.ndarray) -> None:
    if dataset.size and (dataset.min() < 0.0 or dataset.max() > 1.0):
        raise ContractError("dataset values must lie in [0, 1]")


def _build_streams(config: TrainConfig, dataset: np.ndarray):
    """Per-batch-element environments, action policies and initial actions."""
    B = config.batch_size
    envs, cursors = [], []
    if config.env == "eye":
        if dataset.ndim != 4:
            raise ContractError("eye environment expects an (N, H, W, C) dataset")
        n_actions = config.patch_rows * config.patch_cols
        for b in range(B):
            envs.append(
                EyeMoveEnv(
                    dataset,
                    grid=(config.patch_rows, config.patch_cols),
                    switch_every=config.switch_every,
                    start_index=b % len(dataset),
                )
            )
    elif config.env == "grid":
        if dataset.ndim != 4 or len(dataset) != config.grid_rows * config.grid_cols:
            raise ContractError("grid environment expects grid_rows*grid_cols tiles")
        n_actions = 4
        for b in range(B):
            start = (b % config.grid_rows, b % config.grid_cols)
            envs.append(GridWorldEnv(dataset, config.grid_rows, config.grid_cols, start))
    else:
        if dataset.ndim < 3:
            raise ContractError("seq environment expects an (N, T, ...) dataset")
        n_actions = 1
        for b in range(B):
            cursors.append(b % len(dataset))
            envs.append(SequenceEnv(dataset[cursors[-1]]))
    return envs, cursors, n_actions


def _policy_action(config: TrainConfig, stream: RngStream, n_actions: int) -> np.ndarray:
    if config.env == "seq":
        return zero_action(1)
    return one_hot(int(stream.integers(0, n_actions)), n_actions)


def _env_meta(config: TrainConfig, dataset: np.ndarray, n_actions: int) -> dict:
    if config.env == "seq":
        h = dataset.shape[2]
        w = dataset.shape[3] if dataset.ndim > 3 else 1
        image_c = 1
    else:
        h, w, image_c = dataset.shape[1], dataset.shape[2], dataset.shape[3]
    return {
        "env": config.env,
        "image_h": int(h),
        "image_w": int(w),
        "image_c": int(image_c),
        "patch_rows": config.patch_rows,
        "patch_cols": config.patch_cols,
        "switch_every": config.switch_every,
        "grid_rows": config.grid_rows,
        "grid_cols": config.grid_cols,
        "n_actions": int(n_actions),
    }


def train(config: TrainConfig, dataset: np.ndarray, *, phase_hook=None, metrics=None):
    """Run the full training loop; returns ``(Checkpoint, MetricsLog)``.

    ``metrics`` may be a pre-built :class:`MetricsLog`; it is filled row by
    row so partial results survive a divergence abort.  On divergence the
    raised error carries the epoch and global step.
    """
    config.validate()
    dataset = np.asarray(dataset)
    _check_dataset_range(dataset)
    envs, seq_cursors, n_actions = _build_streams(config, dataset)
    B = config.batch_size
    L = config.n_layers

    params = make_hierarchy(config)
    if config.env == "eye":
        obs_dim = envs[0].patches(0).shape[1]
    elif config.env == "grid":
        obs_dim = envs[0].tiles.shape[1]
    else:
        obs_dim = envs[0].frames.shape[1]
    if obs_dim != config.widths[0]:
        raise ContractError(
            f"observation width {obs_dim} does not match widths[0]={config.widths[0]}"
        )

    spec = make_memory_spec(config, n_actions)
    mem_streams = BatchedStreams.for_batch(config.seed, STREAM_MEMORY_BASE, B)
    mem = spec.initial_state(mem_streams, batch=B)
    noise = BatchedStreams.for_batch(config.seed, STREAM_NOISE_BASE, B)
    policy = [RngStream(config.seed, STREAM_POLICY_BASE + b) for b in range(B)]
    pending = np.stack([_policy_action(config, policy[b], n_actions) for b in range(B)])
    duration = config.resolved_memory_duration()

    if metrics is None:
        metrics = MetricsLog.for_layers(L)
    elif not metrics.header:
        metrics.header = MetricsLog.for_layers(L).header

    def hook(name, **info):
        if phase_hook is not None:
            phase_hook(name, **info)

    global_step = 0
    for epoch in range(1, config.epochs + 1):
        mse_sum = 0.0
        loss_sum = np.zeros(L)
        for _ in range(config.steps_per_epoch):
            try:
                stack = sample_prior_stack(params, mem.m, noise)
                hook("predict", stack=stack)
                obs = np.stack(
                    [
                        envs[b].step() if config.env == "seq" else envs[b].step(pending[b])
                        for b in range(B)
                    ]
                )
                hook("receive", observation=obs)
                params, stack2, met = step_observation(
                    params,
                    stack,
                    mem.m,
                    obs,
                    noise,
                    phase_hook=phase_hook,
                    prior_samples=config.prior_samples,
                    deterministic=config.deterministic,
                )
                nxt = np.stack(
                    [_policy_action(config, policy[b], n_actions) for b in range(B)]
                )
                hook("memory")
                mem = memory_update(mem, stack2.s[L], nxt, duration, config.dt)
            except DivergenceError as err:
                err.epoch = epoch
                err.step = global_step
                log.error("divergence at epoch %d step %d: %s", epoch, global_step, err)
                raise
            if config.env == "seq":
                for b in range(B):
                    if envs[b].remaining == 0:
                        seq_cursors[b] = (seq_cursors[b] + B) % len(dataset)
                        envs[b] = SequenceEnv(dataset[seq_cursors[b]])
                        fresh = spec.initial_state(mem_streams.streams[b])
                        mem.I[b], mem.m[b], mem.V[b] = fresh.I, fresh.m, fresh.V
                        nxt[b] = zero_action(1)
            pending = nxt
            mse_sum += met.mse
            loss_sum += met.losses
            global_step += 1
        row = [epoch, global_step, mse_sum / config.steps_per_epoch]
        row.extend(loss_sum / config.steps_per_epoch)
        metrics.rows.append(row)
        if config.eval_every and epoch % config.eval_every == 0:
            log.info("epoch %d: mse=%.6f losses=%s", epoch, row[2], row[3:])
        else:
            log.debug("epoch %d: mse=%.6f", epoch, row[2])

    ckpt = Checkpoint(
        params=params,
        memory=spec,
        step_count=global_step,
        config_hash="",
        env_meta=_env_meta(config, dataset, n_actions),
    )
    return ckpt, metrics


def _frozen_infer_step(params, mem_m, obs, noise, deterministic):
    """Prediction plus posterior inference with frozen weights."""
    stack = sample_prior_stack(params, mem_m, noise)
    _, stack2, met = step_observation(
        params, stack, mem_m, obs, noise, learn=False, deterministic=deterministic
    )
    return stack2, met


def _init_memory_batched(
    params,
    mem: MemoryState,
    patch_bank: np.ndarray,
    allowed: np.ndarray,
    steps: int,
    duration: float,
    noise: BatchedStreams,
    policy: list,
    deterministic: bool,
) -> MemoryState:
    """Shared core of the memory-initialization protocol, batched over items.

    ``patch_bank[b, p]`` is the observation at position ``p`` for batch item
    ``b``; ``allowed[b]`` lists the positions the random gaze may visit.
    Runs ``steps`` prediction/inference/memory-update cycles with frozen
    weights; every transition, including the last, consumes the next
    planned gaze position so the returned state stays in the same regime
    the queries will drive it through.
    """
    B, P, _ = patch_bank.shape
    K = allowed.shape[1]
    pos = np.array([allowed[b, int(policy[b].integers(0, K))] for b in range(B)])
    for i in range(steps):
        obs = patch_bank[np.arange(B), pos]
        stack2, _ = _frozen_infer_step(params, mem.m, obs, noise, deterministic)
        pos = np.array([allowed[b, int(policy[b].integers(0, K))] for b in range(B)])
        actions = np.zeros((B, P))
        actions[np.arange(B), pos] = 1.0
        mem = memory_update(mem, stack2.s[params.L], actions, duration, params.dt)
    return mem


def init_memory_protocol(
    checkpoint: Checkpoint, patches, seed=0, steps=None, deterministic=False
) -> MemoryState:
    """Build a memory state from K observed patches with frozen weights.

    ``patches`` is a sequence of ``(position, observation)`` pairs.  The
    memory starts from the documented random state, then performs ``steps``
    (default 2K) cycles of random gaze restricted to the given positions,
    each cycle predicting, observing, inferring the posterior and updating
    the memory.  The connection weights are never touched.
    """
    params = checkpoint.params
    meta = checkpoint.env_meta
    P = meta["patch_rows"] * meta["patch_cols"]
    K = len(patches)
    if K < 1:
        raise ContractError("need at least one patch")
    if K > P:
        raise ContractError(f"K={K} exceeds the {P}-patch grid")
    positions = [int(p) for p, _ in patches]
    if any(p < 0 or p >= P for p in positions):
        raise ContractError("patch position out of range")
    if len(set(positions)) != K:
        raise ContractError("patch positions must be distinct")
    steps = 2 * K if steps is None else int(steps)

    digest_before = params_digest(params)
    patch_bank = np.zeros((1, P, params.n[0]))
    for p, obs in patches:
        patch_bank[0, int(p)] = np.asarray(obs, dtype=np.float64)
    mem = checkpoint.memory.initial_state(
        BatchedStreams.for_batch(seed, STREAM_MEMORY_BASE, 1), batch=1
    )
    mem = _init_memory_batched(
        params,
        mem,
        patch_bank,
        np.array([positions]),
        steps,
        checkpoint.memory.duration,
        BatchedStreams.for_batch(seed, STREAM_NOISE_BASE, 1),
        [RngStream(seed, STREAM_POLICY_BASE)],
        deterministic,
    )
    assert params_digest(params) == digest_before
    return replace(mem, I=mem.I[0], m=mem.m[0], V=mem.V[0])


def replay_observations(
    checkpoint: Checkpoint,
    observations,
    next_actions,
    mem: MemoryState = None,
    seed=0,
    deterministic=False,
) -> MemoryState:
    """Teacher-forced, frozen-weight replay that returns the final memory.

    ``observations[t]`` is inferred and the memory then transitions under
    ``next_actions[t]`` (the action taken after that observation).  Starts
    from ``mem`` or from the documented random state.
    """
    params = checkpoint.params
    obs = np.atleast_2d(np.asarray(observations, dtype=np.float64))
    acts = np.atleast_2d(np.asarray(next_actions, dtype=np.float64))
    if len(obs) != len(acts):
        raise ContractError("need one next-action per observation")
    if mem is None:
        mem = checkpoint.memory.initial_state(
            BatchedStreams.for_batch(seed, STREAM_MEMORY_BASE, 1), batch=1
        )
        single = True
    else:
        single = mem.m.ndim == 1
        if single:
            mem = replace(mem, I=mem.I[None], m=mem.m[None], V=mem.V[None])
    noise = BatchedStreams.for_batch(seed, STREAM_NOISE_BASE, 1)
    digest_before = params_digest(params)
    for t in range(len(obs)):
        stack2, _ = _frozen_infer_step(params, mem.m, obs[t][None], noise, deterministic)
        mem = memory_update(
            mem, stack2.s[params.L], acts[t][None], checkpoint.memory.duration, params.dt
        )
    assert params_digest(params) == digest_before
    if single:
        mem = replace(mem, I=mem.I[0], m=mem.m[0], V=mem.V[0])
    return mem


def imagine(checkpoint: Checkpoint, mem: MemoryState, actions, *, deterministic=True, seed=0):
    """Closed-loop rollout: predicted latents feed the memory, no observations.

    For each action the memory first transitions under the previous
    top-layer prediction (initially its own firing rate) and the action,
    then a new top-layer value is drawn from the prediction distribution
    (its mean in deterministic mode) and decoded to an observation.
    Returns an array of predicted observations; the input state is not
    modified.
    """
    params = checkpoint.params
    state = mem.copy()
    rng = RngStream(seed, STREAM_NOISE_BASE)
    lam_top = float(params.lam[-1])
    top_prev = np.array(state.m)
    preds = []
    for a in actions:
        state = memory_update(state, top_prev, a, checkpoint.memory.duration, params.dt)
        if deterministic:
            top = np.array(state.m)
        else:
            top = state.m + lam_top**-0.5 * rng.standard_normal(np.shape(state.m))
        preds.append(predict_mean(params, top))
        top_prev = top
    if not preds:
        return np.zeros((0, params.n[0]))
    return np.stack(preds)


def generate_whole_image(checkpoint: Checkpoint, mem: MemoryState) -> np.ndarray:
    """Envision every patch position from copies of one memory and assemble.

    Each of the grid positions is queried by a one-step imagination from
    its own copy of the memory (ordering can not matter), decoded with the
    noise-free readout, clamped to [0, 1] and placed into the image.
    """
    params = checkpoint.params
    meta = checkpoint.env_meta
    P = meta["patch_rows"] * meta["patch_cols"]
    tiled = replace(
        mem,
        I=np.tile(mem.I, (P, 1)),
        m=np.tile(mem.m, (P, 1)),
        V=np.tile(mem.V, (P, 1)),
    )
    actions = np.eye(P)
    stepped = memory_update(
        tiled, np.tile(mem.m, (P, 1)), actions, checkpoint.memory.duration, params.dt
    )
    patches = np.clip(predict_mean(params, stepped.m), 0.0, 1.0)
    grid = (meta["patch_rows"], meta["patch_cols"])
    return unpatchify(patches, grid, checkpoint.image_shape)


def evaluate_mse(predictions, ground_truth) -> float:
    """Mean squared difference over all elements and frames."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(ground_truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ContractError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def eval_eyemove_init_k(
    checkpoint: Checkpoint, images, K: int, seed=0, deterministic=False, collect_images=False
):
    """Memory-initialization test over a set of images.

    For every image, K distinct patch positions are drawn, the memory is
    initialized from them over 2K frozen-weight cycles, the whole image is
    generated, and the squared error is scored over all patches and over
    the unseen ones (NaN when K covers the grid).  All items run batched;
    each owns its own random streams, so results do not depend on the set
    size.
    """
    params = checkpoint.params
    meta = checkpoint.env_meta
    grid = (meta["patch_rows"], meta["patch_cols"])
    P = grid[0] * grid[1]
    if not 1 <= K <= P:
        raise ContractError(f"K must lie in [1, {P}]")
    images = np.asarray(images)
    N = len(images)
    digest_before = params_digest(params)

    patch_bank = np.stack([patchify(img, grid) for img in images]).astype(np.float64)
    allowed = np.stack(
        [
            RngStream(seed, STREAM_SELECT_BASE + i).choice(P, size=K, replace=False)
            for i in range(N)
        ]
    )
    mem = checkpoint.memory.initial_state(
        BatchedStreams.for_batch(seed, STREAM_MEMORY_BASE, N), batch=N
    )
    mem = _init_memory_batched(
        params,
        mem,
        patch_bank,
        allowed,
        2 * K,
        checkpoint.memory.duration,
        BatchedStreams.for_batch(seed, STREAM_NOISE_BASE, N),
        [RngStream(seed, STREAM_POLICY_BASE + i) for i in range(N)],
        deterministic,
    )

    # Query all positions of all items in one batch; each query starts from
    # a copy of that item's initialized memory.
    idx = np.repeat(np.arange(N), P)
    tiled = replace(mem, I=mem.I[idx], m=mem.m[idx], V=mem.V[idx])
    actions = np.tile(np.eye(P), (N, 1))
    stepped = memory_update(
        tiled, mem.m[idx], actions, checkpoint.memory.duration, params.dt
    )
    gen = np.clip(predict_mean(params, stepped.m), 0.0, 1.0).reshape(N, P, -1)

    sq = np.mean((gen - patch_bank) ** 2, axis=2)
    mse_all = sq.mean(axis=1)
    unseen_mask = np.ones((N, P), dtype=bool)
    for i in range(N):
        unseen_mask[i, allowed[i]] = False
    if K < P:
        mse_unseen = np.array(
            [sq[i, unseen_mask[i]].mean() for i in range(N)]
        )
    else:
        mse_unseen = np.full(N, np.nan)
    assert params_digest(params) == digest_before

    result = {
        "mse_all_patches": float(mse_all.mean()),
        "mse_unseen_patches": float(mse_unseen.mean()) if K < P else float("nan"),
        "per_image_all": mse_all,
        "per_image_unseen": mse_unseen,
        "positions": allowed,
        "memory": replace(mem, I=mem.I[0], m=mem.m[0], V=mem.V[0]),
    }
    if collect_images:
        result["images"] = np.stack(
            [unpatchify(gen[i], grid, checkpoint.image_shape) for i in range(N)]
        )
    return result


def eval_sequence_replay(
    checkpoint: Checkpoint, sequences, init_len=None, seed=0, deterministic=False
):
    """Initialize memory on a sequence prefix, then reproduce the whole thing.

    Emitted prediction ``t`` is the noise-free decode of the memory before
    frame ``t`` arrives.  During the first ``init_len`` frames (default:
    half the sequence) the posterior of each observed frame drives the
    memory; afterwards the rollout is pure imagination.  Also scores the
    constant-mean-frame predictor on the same data as a reference.
    """
    params = checkpoint.params
    seqs = np.asarray(sequences, dtype=np.float64)
    N, T = seqs.shape[0], seqs.shape[1]
    frames = seqs.reshape(N, T, -1)
    if init_len is None:
        init_len = T // 2
    if not 1 <= init_len <= T:
        raise ContractError(f"init_len must lie in [1, {T}]")
    digest_before = params_digest(params)

    mem = checkpoint.memory.initial_state(
        BatchedStreams.for_batch(seed, STREAM_MEMORY_BASE, N), batch=N
    )
    noise = BatchedStreams.for_batch(seed, STREAM_NOISE_BASE, N)
    duration = checkpoint.memory.duration
    zero_actions = np.zeros((N, checkpoint.memory.n_actions))
    preds = np.zeros_like(frames)
    for t in range(T):
        preds[:, t] = np.clip(predict_mean(params, mem.m), 0.0, 1.0)
        if t < init_len:
            stack2, _ = _frozen_infer_step(params, mem.m, frames[:, t], noise, deterministic)
            mem = memory_update(mem, stack2.s[params.L], zero_actions, duration, params.dt)
        else:
            mem = memory_update(mem, mem.m, zero_actions, duration, params.dt)

    assert params_digest(params) == digest_before
    mean_frame = frames.mean(axis=1, keepdims=True)
    return {
        "mse_replay": float(np.mean((preds - frames) ** 2)),
        "mse_baseline": float(np.mean((mean_frame - frames) ** 2)),
        "predictions": preds,
        "init_len": int(init_len),
    }
