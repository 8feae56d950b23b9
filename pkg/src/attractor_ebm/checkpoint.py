"""Checkpoint bundles: a directory of tensor records plus a scalar manifest.

The bundle stores the connection matrices as tensor records and everything
else as ``key = value`` text (floats printed with 17 significant digits so
64-bit values round-trip).  The memory matrices are not stored; their
construction seeds are, together with SHA-256 digests so generator drift
is detected at load time.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .hierarchy import HierarchyParams
from .memory import MemorySpec, matrix_digest
from .tensorio import atomic_write_bytes, read_tensor, write_tensor

MANIFEST_NAME = "manifest.txt"
BUNDLE_SUFFIX = ".ebmt-bundle"

ENV_META_KEYS = (
    "env",
    "image_h",
    "image_w",
    "image_c",
    "patch_rows",
    "patch_cols",
    "switch_every",
    "grid_rows",
    "grid_cols",
    "n_actions",
)


def format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


@dataclass
class Checkpoint:
    """Trained weights plus the recipes to rebuild the rest of the system."""

    params: HierarchyParams
    memory: MemorySpec
    step_count: int = 0
    config_hash: str = ""
    env_meta: dict = field(default_factory=dict)

    @property
    def observation_shape(self):
        """Shape of a single observation (patch, tile or frame)."""
        meta = self.env_meta
        h, w, c = meta["image_h"], meta["image_w"], meta["image_c"]
        if meta["env"] == "eye":
            return (h // meta["patch_rows"], w // meta["patch_cols"], c)
        return (h, w, c)

    @property
    def image_shape(self):
        meta = self.env_meta
        return (meta["image_h"], meta["image_w"], meta["image_c"])


def _parse_manifest(text: str) -> dict:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"manifest line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if key in values:
            raise FormatError(f"manifest line {lineno}: duplicate key {key!r}")
        values[key] = val.strip()
    return values


def save_checkpoint(ckpt: Checkpoint, bundle_dir) -> None:
    bundle_dir = os.fspath(bundle_dir)
    os.makedirs(bundle_dir, exist_ok=True)
    p = ckpt.params
    for l, th in enumerate(p.theta):
        write_tensor(os.path.join(bundle_dir, f"theta_{l:02d}.ebmt"), th)
    W, A = ckpt.memory.build_matrices()
    mem = ckpt.memory
    lines = [
        ("format", 1),
        ("widths", ",".join(str(w) for w in p.n)),
        ("lambda", ",".join(format_scalar(float(v)) for v in p.lam)),
        ("slope", float(p.slope)),
        ("tau_s", float(p.tau_s)),
        ("tau_theta", float(p.tau_theta)),
        ("dt", float(p.dt)),
        ("T", float(p.T)),
        ("prior_mode", p.prior_mode),
        ("co_integrate", bool(p.co_integrate)),
        ("rank", mem.rank),
        ("alpha", float(mem.alpha)),
        ("beta", float(mem.beta)),
        ("w_seed", mem.w_seed),
        ("a_seed", mem.a_seed),
        ("action_gain", float(mem.action_gain)),
        ("firing", mem.firing),
        ("tau_I", float(mem.tau_I)),
        ("tau_V", float(mem.tau_V)),
        ("memory_duration", float(mem.duration)),
        ("memory_init_std", float(mem.init_std)),
        ("w_sha256", matrix_digest(W)),
        ("a_sha256", matrix_digest(A)),
        ("step_count", int(ckpt.step_count)),
        ("config_sha256", ckpt.config_hash or "unset"),
    ]
    for key in ENV_META_KEYS:
        if key in ckpt.env_meta:
            lines.append((key, ckpt.env_meta[key]))
    text = "".join(f"{k} = {format_scalar(v)}\n" for k, v in lines)
    atomic_write_bytes(os.path.join(bundle_dir, MANIFEST_NAME), text.encode("utf-8"))


def load_checkpoint(bundle_dir) -> Checkpoint:
    bundle_dir = os.fspath(bundle_dir)
    manifest_path = os.path.join(bundle_dir, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise FormatError(f"{bundle_dir}: missing {MANIFEST_NAME}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        values = _parse_manifest(fh.read())

    def need(key):
        if key not in values:
            raise FormatError(f"{manifest_path}: missing key {key!r}")
        return values[key]

    widths = tuple(int(v) for v in need("widths").split(","))
    lam = np.array([float(v) for v in need("lambda").split(",")])
    theta = []
    for l in range(len(widths) - 1):
        arr = read_tensor(os.path.join(bundle_dir, f"theta_{l:02d}.ebmt"))
        theta.append(arr.astype(np.float64))
    params = HierarchyParams(
        n=widths,
        theta=theta,
        lam=lam,
        slope=float(need("slope")),
        tau_s=float(need("tau_s")),
        tau_theta=float(need("tau_theta")),
        dt=float(need("dt")),
        T=float(need("T")),
        prior_mode=need("prior_mode"),
        co_integrate=need("co_integrate") == "true",
    )
    params.validate()
    memory = MemorySpec(
        n=widths[-1],
        rank=int(need("rank")),
        alpha=float(need("alpha")),
        beta=float(need("beta")),
        n_actions=int(need("n_actions")),
        w_seed=int(need("w_seed")),
        a_seed=int(need("a_seed")),
        action_gain=float(need("action_gain")),
        firing=need("firing"),
        tau_I=float(need("tau_I")),
        tau_V=float(need("tau_V")),
        duration=float(need("memory_duration")),
        init_std=float(need("memory_init_std")),
    )
    W, A = memory.build_matrices()
    if matrix_digest(W) != need("w_sha256"):
        raise FormatError(f"{bundle_dir}: regenerated recurrent matrix digest mismatch")
    if matrix_digest(A) != need("a_sha256"):
        raise FormatError(f"{bundle_dir}: regenerated action matrix digest mismatch")
    env_meta = {}
    for key in ENV_META_KEYS:
        if key in values:
            env_meta[key] = values[key] if key == "env" else int(values[key])
    return Checkpoint(
        params=params,
        memory=memory,
        step_count=int(need("step_count")),
        config_hash=need("config_sha256"),
        env_meta=env_meta,
    )
