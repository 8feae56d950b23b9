"""Action-conditioned observation sources.

Three environment families drive the model:

* eye movement over an image cut into a grid of patches; the action is a
  one-hot absolute patch position, and the underlying image changes on a
  fixed schedule;
* a toroidal grid world of fixed tiles navigated with four movement
  actions (a desk-scale stand-in for embodied motion data);
* static observation of a changing scene: frame sequences with the zero
  action.

All environments are deterministic functions of their construction
arguments and the actions applied; observations stay in [0, 1].
Synthetic generators (smooth random images, rotating bars) keep the test
suite self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ContractError
from .memory import one_hot, validate_one_hot, zero_action
from .rng import RngStream

__all__ = [
    "Episode",
    "PatchGrid",
    "EndOfEpisode",
    "patchify",
    "unpatchify",
    "EyeMoveEnv",
    "GridWorldEnv",
    "SequenceEnv",
    "run_episode",
    "synth_smooth_images",
    "synth_rotating_bars",
    "stack_episode_frames",
]

GRID_ACTIONS = ("up", "down", "left", "right")


class EndOfEpisode(Exception):
    """Raised by finite environments when stepped past their last observation."""


@dataclass
class Episode:
    """Aligned action/observation record; ``actions[t]`` precedes ``observations[t]``."""

    observations: np.ndarray
    actions: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.observations)

    def validate(self) -> None:
        if len(self.actions) != len(self.observations):
            raise ContractError(
                f"{len(self.actions)} actions vs {len(self.observations)} observations"
            )
        obs = np.asarray(self.observations)
        if len(obs) and (obs.min() < 0.0 or obs.max() > 1.0):
            raise ContractError("observations leave [0, 1]")


@dataclass
class PatchGrid:
    """A partition of an image into g_rows x g_cols equal patches."""

    image: np.ndarray
    g_rows: int = 4
    g_cols: int = 4

    def __post_init__(self):
        h, w = self.image.shape[:2]
        if h % self.g_rows or w % self.g_cols:
            raise ContractError(
                f"image {h}x{w} not divisible by grid {self.g_rows}x{self.g_cols}"
            )

    @property
    def patch_dim(self) -> int:
        h, w = self.image.shape[:2]
        channels = self.image.shape[2] if self.image.ndim == 3 else 1
        return (h // self.g_rows) * (w // self.g_cols) * channels


def patchify(image, grid=(4, 4)) -> np.ndarray:
    """Cut an image into row-major flattened patches.

    Returns an array of shape ``(g_rows * g_cols, patch_dim)``; each patch is
    flattened row-major with channels last.
    """
    img = np.asarray(image)
    g_rows, g_cols = grid
    h, w = img.shape[:2]
    if h % g_rows or w % g_cols:
        raise ContractError(f"image {h}x{w} not divisible by grid {g_rows}x{g_cols}")
    ph, pw = h // g_rows, w // g_cols
    patches = []
    for r in range(g_rows):
        for c in range(g_cols):
            patches.append(img[r * ph : (r + 1) * ph, c * pw : (c + 1) * pw].reshape(-1))
    return np.stack(patches)


def unpatchify(patches, grid, image_shape) -> np.ndarray:
    """Inverse of :func:`patchify` for the given grid and image shape."""
    g_rows, g_cols = grid
    patches = np.asarray(patches)
    if patches.shape[0] != g_rows * g_cols:
        raise ContractError(f"expected {g_rows * g_cols} patches, got {patches.shape[0]}")
    h, w = image_shape[:2]
    ph, pw = h // g_rows, w // g_cols
    patch_shape = (ph, pw) + tuple(image_shape[2:])
    img = np.zeros(image_shape, dtype=patches.dtype)
    for idx in range(patches.shape[0]):
        r, c = divmod(idx, g_cols)
        img[r * ph : (r + 1) * ph, c * pw : (c + 1) * pw] = patches[idx].reshape(patch_shape)
    return img


class EyeMoveEnv:
    """Patch observations addressed by one-hot gaze position.

    The current image advances every ``switch_every`` steps, cycling
    through the dataset from ``start_index``.
    """

    def __init__(self, images, grid=(4, 4), switch_every=16, start_index=0):
        self.images = np.asarray(images)
        if self.images.ndim != 4:
            raise ContractError("images must be (N, H, W, C)")
        self.grid = tuple(grid)
        self.switch_every = int(switch_every)
        self.start_index = int(start_index)
        self._t = 0
        self._patch_cache = {}
        self.n_actions = self.grid[0] * self.grid[1]

    @property
    def image_shape(self):
        return self.images.shape[1:]

    @property
    def current_image_index(self) -> int:
        return (self.start_index + self._t // self.switch_every) % len(self.images)

    def patches(self, image_index) -> np.ndarray:
        if image_index not in self._patch_cache:
            self._patch_cache[image_index] = patchify(self.images[image_index], self.grid)
        return self._patch_cache[image_index]

    def step(self, action) -> np.ndarray:
        pos = validate_one_hot(action)
        if pos >= self.n_actions:
            raise ContractError(f"position {pos} outside {self.n_actions}-patch grid")
        obs = self.patches(self.current_image_index)[pos].astype(np.float64)
        self._t += 1
        return obs


class GridWorldEnv:
    """Toroidal tile map navigated with up/down/left/right one-hot actions."""

    def __init__(self, tiles, rows, cols, start=(0, 0)):
        tiles = np.asarray(tiles)
        if tiles.ndim < 2 or tiles.shape[0] != rows * cols:
            raise ContractError(f"need {rows * cols} tiles, got shape {tiles.shape}")
        self.tile_shape = tiles.shape[1:]
        self.tiles = tiles.reshape(rows * cols, -1)
        self.rows, self.cols = int(rows), int(cols)
        self.pos = (int(start[0]) % self.rows, int(start[1]) % self.cols)
        self.n_actions = 4

    def observation(self) -> np.ndarray:
        r, c = self.pos
        return self.tiles[r * self.cols + c].astype(np.float64)

    def step(self, action) -> np.ndarray:
        idx = validate_one_hot(action)
        if idx >= 4:
            raise ContractError("grid world has 4 actions")
        r, c = self.pos
        if idx == 0:
            r -= 1
        elif idx == 1:
            r += 1
        elif idx == 2:
            c -= 1
        else:
            c += 1
        self.pos = (r % self.rows, c % self.cols)
        return self.observation()


class SequenceEnv:
    """Replays a frame sequence; every step is paired with the zero action."""

    n_actions = 1

    def __init__(self, frames):
        frames = np.asarray(frames)
        if frames.ndim < 2:
            raise ContractError("frames must be (T, ...)")
        self.frame_shape = frames.shape[1:]
        self.frames = frames.reshape(frames.shape[0], -1)
        self._t = 0

    @property
    def remaining(self) -> int:
        return len(self.frames) - self._t

    def step(self) -> np.ndarray:
        if self._t >= len(self.frames):
            raise EndOfEpisode(f"sequence exhausted after {len(self.frames)} frames")
        obs = self.frames[self._t].astype(np.float64)
        self._t += 1
        return obs


def run_episode(env, actions, meta=None) -> Episode:
    """Drive an environment with a list of action vectors and record the episode."""
    observations = []
    recorded = []
    for a in actions:
        observations.append(env.step(a))
        recorded.append(np.asarray(a, dtype=np.float64))
    n_act = getattr(env, "n_actions", 1)
    obs_arr = (
        np.asarray(observations)
        if observations
        else np.zeros((0, getattr(env, "tiles", np.zeros((1, 0))).shape[-1]))
    )
    act_arr = np.asarray(recorded) if recorded else np.zeros((0, n_act))
    ep = Episode(observations=obs_arr, actions=act_arr, meta=dict(meta or {}))
    ep.validate()
    return ep


def synth_smooth_images(n, height, width, channels=1, seed=0, smoothness=0.18):
    """Seeded low-frequency Gaussian random fields, min-max scaled to [0, 1].

    Returns float32 ``(N, H, W, C)``.  ``smoothness`` is the blur radius as
    a fraction of the smaller image side; filtering wraps around so the
    fields tile cleanly (useful as grid-world tiles).
    """
    rng = RngStream(int(seed), 0)
    noise = rng.standard_normal((n, height, width, channels))
    sigma = smoothness * min(height, width)
    fields = ndimage.gaussian_filter(noise, sigma=(0, sigma, sigma, 0), mode="wrap")
    lo = fields.min(axis=(1, 2, 3), keepdims=True)
    hi = fields.max(axis=(1, 2, 3), keepdims=True)
    span = np.where(hi > lo, hi - lo, 1.0)
    return ((fields - lo) / span).astype(np.float32)


def _bar_frame(size, angle, thickness, half_len):
    """Anti-aliased centered bar at the given angle, values in [0, 1]."""
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    u = coords[None, :]
    v = coords[:, None]
    c, s = np.cos(angle), np.sin(angle)
    d_perp = np.abs(-s * u + c * v)
    d_par = np.abs(c * u + s * v)
    across = np.clip(0.5 + thickness / 2.0 - d_perp, 0.0, 1.0)
    along = np.clip(half_len - d_par + 0.5, 0.0, 1.0)
    return across * along


def synth_rotating_bars(
    n_seq, frames, size, seed=0, delta=None, thickness=1.6, half_len=None
):
    """Sequences of a centered bar rotating by a fixed angle per frame.

    Each episode starts at a random angle drawn from the seed; ``delta``
    fixes the per-frame rotation (when None one dataset-level value is
    drawn from the seed).  Frames are ``size x size`` grayscale in [0, 1],
    rasterized with anti-aliasing; the bar is symmetric, so its period is
    pi.  Returns a list of :class:`Episode` with zero actions.
    """
    if frames < 2:
        raise ContractError("need at least 2 frames per sequence")
    rng = RngStream(int(seed), 0)
    if delta is None:
        delta = float(rng.generator().uniform(np.pi / 16, np.pi / 8))
    if half_len is None:
        half_len = 0.42 * size
    episodes = []
    for _ in range(n_seq):
        phi0 = float(rng.generator().uniform(0.0, np.pi))
        obs = np.stack(
            [
                _bar_frame(size, phi0 + t * delta, thickness, half_len).reshape(-1)
                for t in range(frames)
            ]
        ).astype(np.float32)
        ep = Episode(
            observations=obs,
            actions=np.zeros((frames, 1), dtype=np.float32),
            meta={"env": "seq", "frame_shape": (size, size), "delta": delta},
        )
        episodes.append(ep)
    return episodes


def stack_episode_frames(episodes, frame_shape) -> np.ndarray:
    """Stack episodes into a float32 (N, T, H, W) array for the dataset container."""
    return np.stack(
        [ep.observations.reshape((-1,) + tuple(frame_shape)) for ep in episodes]
    ).astype(np.float32)
