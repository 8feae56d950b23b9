"""Plain-text run configuration: ``key = value`` lines, ``#`` comments.

Unknown and duplicate keys are rejected with the offending line number.
The key set mirrors :class:`attractor_ebm.harness.TrainConfig`; every key
has a default, so an empty file is a valid configuration.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import fields

from .errors import ConfigError
from .harness import TrainConfig


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(v.strip()) for v in text.split(","))


def _parse_float_list(text: str) -> tuple:
    return tuple(float(v.strip()) for v in text.split(","))


# key -> (parser, help text)
CONFIG_KEYS = {
    "widths": (_parse_int_list, "layer widths n_0..n_L, comma separated"),
    "lambda": (_parse_float_list, "layer precisions, one value or one per layer"),
    "slope": (float, "leaky-rectifier negative slope"),
    "tau_s": (float, "state time constant"),
    "inv_tau_theta": (float, "learning rate 1/tau_theta"),
    "dt": (float, "Euler step size"),
    "T": (float, "simulation time per phase"),
    "prior_mode": (str, "prediction sampling: direct | langevin | mean"),
    "prior_samples": (int, "prediction samples averaged per learning step"),
    "co_integrate": (_parse_bool, "run learning and inference on one clock"),
    "deterministic": (_parse_bool, "suppress all simulation noise"),
    "alpha": (float, "recurrent spectral norm of the memory"),
    "beta": (float, "memory adaptation strength"),
    "rank": (int, "memory recurrent rank (0 = automatic)"),
    "action_gain": (float, "scale of the action projection columns"),
    "firing": (str, "memory firing function: tanh | identity"),
    "tau_I": (float, "memory synaptic time constant"),
    "tau_V": (float, "memory adaptation time constant"),
    "memory_duration": (float, "memory relaxation time per transition (0 = T)"),
    "epochs": (int, "number of training epochs"),
    "batch_size": (int, "parallel environment streams sharing the weights"),
    "steps_per_epoch": (int, "timesteps per epoch"),
    "switch_every": (int, "eye environment: steps between image switches"),
    "seed": (int, "master random seed"),
    "dataset": (str, "path to the dataset tensor record"),
    "env": (str, "environment: eye | grid | seq"),
    "k_init": (int, "patches used by the memory-initialization protocol"),
    "eval_every": (int, "log aggregate metrics every this many epochs (0 = off)"),
    "patch_rows": (int, "eye environment: patch grid rows"),
    "patch_cols": (int, "eye environment: patch grid columns"),
    "grid_rows": (int, "grid environment: world rows"),
    "grid_cols": (int, "grid environment: world columns"),
}

_FIELD_FOR_KEY = {"lambda": "lam"}
_KEY_FOR_FIELD = {v: k for k, v in _FIELD_FOR_KEY.items()}


def parse_config(text: str) -> TrainConfig:
    """Parse configuration text; raises :class:`ConfigError` with line numbers."""
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in seen:
            raise ConfigError(
                f"duplicate key {key!r} (first set on line {seen[key]})", line=lineno
            )
        seen[key] = lineno
        parser, _ = CONFIG_KEYS[key]
        try:
            values[_FIELD_FOR_KEY.get(key, key)] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=lineno) from None
    return TrainConfig(**values)


def load_config(path) -> TrainConfig:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def render_config(config: TrainConfig) -> str:
    """Canonical text form (sorted keys, 17-significant-digit floats)."""
    from .checkpoint import format_scalar

    lines = []
    for f in sorted(fields(config), key=lambda f: f.name):
        key = _KEY_FOR_FIELD.get(f.name, f.name)
        val = getattr(config, f.name)
        if isinstance(val, tuple):
            text = ",".join(format_scalar(v) for v in val)
        else:
            text = format_scalar(val)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def config_hash(config: TrainConfig) -> str:
    return hashlib.sha256(render_config(config).encode("utf-8")).hexdigest()


def config_help() -> str:
    width = max(len(k) for k in CONFIG_KEYS)
    lines = ["configuration file keys (key = value, '#' starts a comment):"]
    for key, (_, help_text) in CONFIG_KEYS.items():
        lines.append(f"  {key:<{width}}  {help_text}")
    return "\n".join(lines)
