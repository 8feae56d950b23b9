"""Command-line workbench: train, eval and imagine subcommands.

Exit codes: 0 success, 2 usage/config/format error, 3 numerical
divergence.  Diagnostics go to standard error; verbosity is controlled by
the ``EBM_LOG`` environment variable (error | info | debug).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import harness
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .configfile import config_hash, config_help, load_config
from .errors import ConfigError, ContractError, DivergenceError, FormatError
from .images import write_image
from .memory import FIRING_FNS, MemoryState, one_hot, zero_action
from .tensorio import atomic_write_bytes, read_tensor, write_tensor

log = logging.getLogger("attractor_ebm")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3

GRID_TOKENS = {"up": 0, "down": 1, "left": 2, "right": 3}


def _setup_logging() -> None:
    level = os.environ.get("EBM_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        print(f"warning: EBM_LOG={level!r} not in {sorted(levels)}", file=sys.stderr)
        level = "error"
    logging.basicConfig(
        level=levels[level], stream=sys.stderr, format="%(levelname)s %(message)s"
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attractor-ebm",
        description="Energy-based sequence model with attractor memory.",
        epilog=config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a config file")
    p_train.add_argument("--config", required=True, help="path to the config file")
    p_train.add_argument("--seed", required=True, type=int, help="master seed")
    p_train.add_argument("--out-dir", required=True, help="output directory")
    p_train.add_argument("--epochs", type=int, default=None, help="override epochs")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument(
        "--protocol", required=True, choices=["eyemove-init-K", "sequence-replay"]
    )
    p_eval.add_argument("--K", type=int, default=4, help="initialization patches")
    p_eval.add_argument("--init-len", type=int, default=None, help="replay prefix length")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out-dir", default=".")

    p_imag = sub.add_parser("imagine", help="roll out predictions for an action file")
    p_imag.add_argument("--checkpoint", required=True)
    p_imag.add_argument("--memory", required=True, help="memory state tensor record")
    p_imag.add_argument("--actions", required=True, help="one action token per line")
    p_imag.add_argument("--deterministic", action="store_true")
    p_imag.add_argument("--seed", type=int, default=0)
    p_imag.add_argument("--out-dir", default=".")
    return parser


def _load_dataset(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise ConfigError(f"dataset file not found: {path}")
    return read_tensor(path)


def cmd_train(args) -> int:
    if not os.path.isfile(args.config):
        raise ConfigError(f"config file not found: {args.config}")
    config = load_config(args.config)
    config.seed = int(args.seed)
    if args.epochs is not None:
        config.epochs = int(args.epochs)
    config.validate()
    if not config.dataset:
        raise ConfigError("config has no dataset path")
    dataset = _load_dataset(config.dataset)
    os.makedirs(args.out_dir, exist_ok=True)

    metrics = harness.MetricsLog.for_layers(config.n_layers)
    metrics_path = os.path.join(args.out_dir, "metrics.csv")
    try:
        ckpt, metrics = harness.train(config, dataset, metrics=metrics)
    except DivergenceError as err:
        atomic_write_bytes(metrics_path, metrics.csv_bytes())
        print(f"error: numerical divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    ckpt.config_hash = config_hash(config)
    save_checkpoint(ckpt, os.path.join(args.out_dir, "checkpoint.ebmt-bundle"))
    atomic_write_bytes(metrics_path, metrics.csv_bytes())
    log.info("wrote %s", metrics_path)
    return EXIT_OK


def _print_metric(name: str, value) -> None:
    print(f"{name} = {value!r}" if isinstance(value, float) else f"{name} = {value}")


def _emit_observation_images(out_dir, prefix, flat_predictions, obs_shape):
    paths = []
    for t, flat in enumerate(flat_predictions):
        img = np.asarray(flat, dtype=np.float64).reshape(obs_shape)
        paths.append(write_image(os.path.join(out_dir, f"{prefix}{t:04d}"), img))
    return paths


def _write_memory(path, mem: MemoryState) -> None:
    write_tensor(path, np.stack([mem.I, mem.V]))


def _read_memory(path, ckpt: Checkpoint) -> MemoryState:
    arr = read_tensor(path).astype(np.float64)
    if arr.ndim != 2 or arr.shape[0] != 2 or arr.shape[1] != ckpt.memory.n:
        raise FormatError(
            f"{path}: memory record must have shape (2, {ckpt.memory.n})"
        )
    W, A = ckpt.memory.build_matrices()
    H = FIRING_FNS[ckpt.memory.firing]
    return MemoryState(
        I=arr[0],
        m=H(arr[0]),
        V=arr[1],
        W=W,
        A=A,
        alpha=ckpt.memory.alpha,
        beta=ckpt.memory.beta,
        tau_I=ckpt.memory.tau_I,
        tau_V=ckpt.memory.tau_V,
        firing=ckpt.memory.firing,
    )


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    dataset = _load_dataset(args.dataset)
    env = ckpt.env_meta.get("env")
    os.makedirs(args.out_dir, exist_ok=True)
    if args.protocol == "eyemove-init-K":
        if env != "eye":
            raise ConfigError(f"protocol eyemove-init-K needs an eye checkpoint, got {env!r}")
        result = harness.eval_eyemove_init_k(
            ckpt, dataset, args.K, seed=args.seed, collect_images=True
        )
        _print_metric("mse_all_patches", result["mse_all_patches"])
        _print_metric("mse_unseen_patches", result["mse_unseen_patches"])
        for i, img in enumerate(result["images"]):
            write_image(os.path.join(args.out_dir, f"gen_{i:04d}"), img)
        _write_memory(os.path.join(args.out_dir, "memory.ebmt"), result["memory"])
    else:
        if env != "seq":
            raise ConfigError(
                f"protocol sequence-replay needs a seq checkpoint, got {env!r}"
            )
        result = harness.eval_sequence_replay(
            ckpt, dataset, init_len=args.init_len, seed=args.seed
        )
        _print_metric("mse_replay", result["mse_replay"])
        _print_metric("mse_baseline_mean_frame", result["mse_baseline"])
        _print_metric("init_len", result["init_len"])
        obs_shape = ckpt.observation_shape
        preds = result["predictions"]
        write_tensor(os.path.join(args.out_dir, "predictions.ebmt"), preds)
        for n in range(preds.shape[0]):
            _emit_observation_images(
                args.out_dir, f"seq{n:03d}_step_", preds[n], obs_shape
            )
    return EXIT_OK


def _parse_action_file(path, ckpt: Checkpoint):
    env = ckpt.env_meta.get("env")
    n_actions = ckpt.env_meta.get("n_actions", 1)
    if not os.path.isfile(path):
        raise ConfigError(f"actions file not found: {path}")
    actions = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            token = raw.split("#", 1)[0].strip()
            if not token:
                continue
            if env == "grid":
                if token not in GRID_TOKENS:
                    raise ConfigError(f"unknown action token {token!r}", line=lineno)
                actions.append(one_hot(GRID_TOKENS[token], 4))
            elif env == "eye":
                if not token.isdigit() or int(token) >= n_actions:
                    raise ConfigError(f"unknown action token {token!r}", line=lineno)
                actions.append(one_hot(int(token), n_actions))
            else:
                if token != "none":
                    raise ConfigError(f"unknown action token {token!r}", line=lineno)
                actions.append(zero_action(n_actions))
    return actions


def cmd_imagine(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if not os.path.isfile(args.memory):
        raise ConfigError(f"memory file not found: {args.memory}")
    mem = _read_memory(args.memory, ckpt)
    actions = _parse_action_file(args.actions, ckpt)
    os.makedirs(args.out_dir, exist_ok=True)
    preds = harness.imagine(
        ckpt, mem, actions, deterministic=args.deterministic, seed=args.seed
    )
    preds = np.clip(preds, 0.0, 1.0)
    write_tensor(os.path.join(args.out_dir, "predictions.ebmt"), preds)
    _emit_observation_images(args.out_dir, "step_", preds, ckpt.observation_shape)
    return EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        if args.command == "train":
            return cmd_train(args)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_imagine(args)
    except (ConfigError, FormatError, ContractError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as err:
        print(f"error: numerical divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGED


def entry() -> None:
    sys.exit(main())
