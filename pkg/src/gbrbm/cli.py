"""Command-line driver: train, eval, sample, filters, cost.

Run configurations are flat `key = value` text files ('#' starts a
comment); any key can be overridden on the command line with repeated
`--set key=value` flags.  Exit statuses: 0 success, 2 bad config or
missing input, 3 training diverged (non-finite metric or parameters),
4 exact evaluation requested beyond the enumeration guard, 5 output I/O
failure.  Commands write only inside their output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import (
    Dataset,
    load_csv,
    load_idx,
    standardize,
    standardize_apply,
    synth_mixture,
    zca_apply,
    zca_fit,
)
from .errors import ConfigError, DomainError, FormatError, GbrbmError, NumericalError
from .evaluation import AisConfig, ais_log_partition, avg_log_likelihood, generate_samples
from .model import ENUM_MAX_HIDDEN, ModelDims, exact_log_partition
from .sampling import RngStream
from .training import (
    STREAM_EVAL,
    STREAM_SAMPLE,
    TrainConfig,
    init_train_state,
    cost_model,
    train_epoch,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_NEEDS_AIS = 4
EXIT_IO = 5

ENV_OUT_ROOT = "GBRBM_OUT_ROOT"
STREAM_DATA = 5

METRICS_COLUMNS = ("epoch", "atll", "atell", "wall_seconds", "update_count")


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"expected boolean, got {value!r}")


@dataclasses.dataclass
class RunConfig:
    """Everything cmd_train needs: training hyperparameters plus I/O choices."""

    n_hidden: int = 0
    algorithm: str = "sdcp"
    eta: float = 0.01
    k: int = 1
    d: int = 1
    k_prime: int = 1
    batch_size: int = 100
    epochs: int = 10
    seed: int = 0
    learn_variance: bool = False
    variance_lr_scale: float = 1.0
    tau: float = 0.01
    train: str = "synth"
    test: str = ""
    data_format: str = "auto"
    csv_delimiter: str = ","
    csv_header: bool = False
    standardize: bool = True
    global_standardize: bool = False
    zca: bool = False
    zca_epsilon: float = 1e-2
    synth_components: int = 4
    synth_dims: int = 16
    synth_samples: int = 2000
    synth_spread: float = 2.0
    eval_every: int = 0  # 0 = every epoch when exact is feasible, else every 10
    eval_mode: str = "auto"
    ais_particles: int = 100
    ais_temps: int = 10000
    out_dir: str = ""
    checkpoint_every: int = 0  # 0 = final checkpoint only

    def train_config(self) -> TrainConfig:
        return TrainConfig(algorithm=self.algorithm, eta=self.eta, batch_size=self.batch_size,
                           epochs=self.epochs, seed=self.seed, k=self.k, d=self.d,
                           k_prime=self.k_prime, learn_variance=self.learn_variance,
                           variance_lr_scale=self.variance_lr_scale)


_RUNCONFIG_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse the flat key=value grammar into a string mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def build_run_config(mapping: dict[str, str], source: str = "<config>") -> RunConfig:
    cfg = RunConfig()
    for key, value in mapping.items():
        if key not in _RUNCONFIG_FIELDS:
            raise ConfigError(f"{source}: unknown configuration key {key!r}")
        current = getattr(cfg, key)
        try:
            if isinstance(current, bool):
                setattr(cfg, key, _parse_bool(value))
            elif isinstance(current, int):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        except ValueError:
            raise ConfigError(f"{source}: bad value for {key}: {value!r}") from None
    if cfg.n_hidden < 1:
        raise ConfigError(f"{source}: n_hidden must be set to a positive integer")
    return cfg


def load_run_config(path, overrides: list[str]) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    mapping = parse_config_text(text, source=str(path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    return build_run_config(mapping, source=str(path))


# --------------------------------------------------------------------------
# dataset plumbing
# --------------------------------------------------------------------------

def _infer_format(path: str) -> str:
    name = Path(path).name.lower()
    if name.endswith(".csv"):
        return "csv"
    if "idx" in name or name.endswith(("ubyte", ".idx")):
        return "idx"
    raise ConfigError(f"cannot infer data format of {path}; set data_format=idx|csv")


def _load_file(path: str, cfg: RunConfig, split_tag: str) -> Dataset:
    fmt = cfg.data_format if cfg.data_format != "auto" else _infer_format(path)
    if fmt == "idx":
        return load_idx(path, split_tag=split_tag)
    if fmt == "csv":
        return load_csv(path, delimiter=cfg.csv_delimiter, skip_header=cfg.csv_header,
                        split_tag=split_tag)
    raise ConfigError(f"unknown data_format {fmt!r}")


def load_datasets(cfg: RunConfig) -> tuple[Dataset, Optional[Dataset]]:
    """Load (or synthesize) the train split and optional test split, preprocessed."""
    if cfg.train == "synth":
        rng = RngStream(cfg.seed, (STREAM_DATA,))
        train = synth_mixture(cfg.synth_components, cfg.synth_dims, cfg.synth_samples,
                              cfg.synth_spread, rng)
        train = Dataset(train.samples, train.preprocessing, "train")
    else:
        train = _load_file(cfg.train, cfg, "train")
    test = _load_file(cfg.test, cfg, "test") if cfg.test else None

    if cfg.standardize and cfg.train != "synth":
        train, mean, std = standardize(train, global_stats=cfg.global_standardize)
        if test is not None:
            test = standardize_apply(test, mean, std)
    if cfg.zca:
        transform = zca_fit(train, epsilon=cfg.zca_epsilon)
        train = zca_apply(transform, train)
        if test is not None:
            test = zca_apply(transform, test)
    return train, test


def _resolve_out_dir(flag_value: Optional[str], cfg_value: str = "") -> Path:
    if flag_value:
        return Path(flag_value)
    if cfg_value:
        return Path(cfg_value)
    root = os.environ.get(ENV_OUT_ROOT)
    return Path(root) if root else Path("gbrbm-out")


# --------------------------------------------------------------------------
# PGM export
# --------------------------------------------------------------------------

def export_pgm(matrix: np.ndarray, path) -> None:
    """Write one grey-scale image, min-max scaled to the full byte range.

    A constant image maps to mid-gray 128.  Header is exactly
    `P5\\n<w> <h>\\n255\\n` followed by the row-major pixel bytes.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DomainError(f"PGM export expects a 2-D image, got shape {matrix.shape}")
    lo, hi = float(matrix.min()), float(matrix.max())
    if hi == lo:
        pixels = np.full(matrix.shape, 128, dtype=np.uint8)
    else:
        pixels = np.rint((matrix - lo) / (hi - lo) * 255.0).astype(np.uint8)
    rows, cols = matrix.shape
    header = f"P5\n{cols} {rows}\n255\n".encode()
    Path(path).write_bytes(header + pixels.tobytes())


def _image_shape(m: int, rows: Optional[int], cols: Optional[int]) -> tuple[int, int]:
    if rows and cols:
        return rows, cols
    side = math.isqrt(m)
    if side * side == m:
        return side, side
    raise ConfigError(f"{m} visible units is not square; pass --rows and --cols")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_train(args) -> int:
    try:
        cfg = load_run_config(args.config, args.set or [])
        if args.seed is not None:
            cfg.seed = args.seed
        train_cfg = cfg.train_config()
        train_data, test_data = load_datasets(cfg)
    except (GbrbmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = _resolve_out_dir(args.out, cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    dims = ModelDims(train_data.num_features, cfg.n_hidden)
    state = init_train_state(dims, train_data, train_cfg, tau=cfg.tau)

    exact_ok = cfg.n_hidden <= ENUM_MAX_HIDDEN
    eval_mode = cfg.eval_mode
    if eval_mode == "auto":
        eval_mode = "exact" if exact_ok else "ais"
    if eval_mode == "exact" and not exact_ok:
        print(f"error: exact evaluation needs n <= {ENUM_MAX_HIDDEN}; use eval_mode=ais",
              file=sys.stderr)
        return EXIT_NEEDS_AIS
    eval_every = cfg.eval_every or (1 if eval_mode == "exact" else 10)

    metrics_path = out_dir / "metrics.csv"
    metrics_path.write_text(",".join(METRICS_COLUMNS) + "\n")
    start = time.perf_counter()
    print(f"training {cfg.algorithm} for {cfg.epochs} epochs "
          f"(N={len(train_data)}, m={dims.m}, n={dims.n}, batch={cfg.batch_size})")

    for epoch in range(1, cfg.epochs + 1):
        try:
            state = train_epoch(state, train_data, train_cfg)
        except (DomainError, NumericalError) as exc:
            print(f"diverged at epoch {epoch}: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        if epoch % eval_every == 0 or epoch == cfg.epochs:
            try:
                if eval_mode == "exact":
                    log_z = exact_log_partition(state.params)
                else:
                    est = ais_log_partition(state.params,
                                            AisConfig(cfg.ais_particles, cfg.ais_temps),
                                            rng=state.rng.child(STREAM_EVAL, epoch))
                    log_z = est.log_z
                atll = avg_log_likelihood(state.params, train_data, log_z)
                atell = (avg_log_likelihood(state.params, test_data, log_z)
                         if test_data is not None else float("nan"))
            except (DomainError, NumericalError) as exc:
                print(f"diverged at epoch {epoch}: {exc}", file=sys.stderr)
                return EXIT_DIVERGED
            if not np.isfinite(atll) or (test_data is not None and not np.isfinite(atell)):
                print(f"diverged at epoch {epoch}: non-finite log-likelihood", file=sys.stderr)
                return EXIT_DIVERGED
            wall = time.perf_counter() - start
            with metrics_path.open("a") as fh:
                fh.write(f"{epoch},{atll!r},{atell!r},{wall:.3f},{state.update_count}\n")
            print(f"epoch {epoch}: atll={atll:.4f} atell={atell:.4f} "
                  f"updates={state.update_count}")
        if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_checkpoint(out_dir / f"checkpoint-epoch{epoch:04d}.ckpt", state, train_cfg)
    save_checkpoint(out_dir / "checkpoint-final.ckpt", state, train_cfg)
    return EXIT_OK


def _load_checkpoint_or_status(path) -> Checkpoint | int:
    try:
        return load_checkpoint(path)
    except (OSError, FormatError) as exc:
        print(f"error: cannot load checkpoint {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def cmd_eval(args) -> int:
    ckpt = _load_checkpoint_or_status(args.checkpoint)
    if isinstance(ckpt, int):
        return ckpt
    params = ckpt.params
    n = params.weights.shape[1]
    mode = args.mode
    if mode == "auto":
        mode = "exact" if n <= ENUM_MAX_HIDDEN else "ais"
    if mode == "exact" and n > ENUM_MAX_HIDDEN:
        print(f"error: exact evaluation enumerates 2^n hidden states and needs "
              f"n <= {ENUM_MAX_HIDDEN} (checkpoint has n={n}); rerun with --mode ais",
              file=sys.stderr)
        return EXIT_NEEDS_AIS

    cfg = RunConfig(n_hidden=n, data_format=args.data_format,
                    csv_delimiter=args.csv_delimiter, csv_header=args.csv_header)
    try:
        data = _load_file(args.data, cfg, "train")
        test = _load_file(args.test, cfg, "test") if args.test else None
        if args.standardize:
            data, mean, std = standardize(data)
            if test is not None:
                test = standardize_apply(test, mean, std)
    except (GbrbmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if mode == "exact":
        log_z = exact_log_partition(params)
        print(f"log_z={log_z!r} (exact)")
    else:
        est = ais_log_partition(params, AisConfig(args.ais_particles, args.ais_temps, args.seed))
        log_z = est.log_z
        print(f"log_z={est.log_z!r} (ais, particles={est.particles_used}, "
              f"log_weight_std={est.log_weight_std!r})")
    print(f"atll={avg_log_likelihood(params, data, log_z)!r}")
    if test is not None:
        print(f"atell={avg_log_likelihood(params, test, log_z)!r}")
    return EXIT_OK


def cmd_sample(args) -> int:
    ckpt = _load_checkpoint_or_status(args.checkpoint)
    if isinstance(ckpt, int):
        return ckpt
    params = ckpt.params
    m = params.weights.shape[0]
    try:
        rows, cols = _image_shape(m, args.rows, args.cols)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = ckpt.config.seed if args.seed is None else args.seed
    rng = RngStream(seed, (STREAM_SAMPLE,))
    samples = generate_samples(params, args.count, args.steps, rng)
    print(f"generated {args.count} samples with {args.steps} Gibbs steps (seed={seed})")
    out_dir = _resolve_out_dir(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "samples.csv").open("w") as fh:
            for row in samples:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        for i, row in enumerate(samples):
            export_pgm(row.reshape(rows, cols), out_dir / f"sample-{i:03d}.pgm")
    except OSError as exc:
        print(f"error: failed writing outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_filters(args) -> int:
    ckpt = _load_checkpoint_or_status(args.checkpoint)
    if isinstance(ckpt, int):
        return ckpt
    weights = ckpt.params.weights
    m, n = weights.shape
    if args.rows * args.cols != m:
        print(f"error: rows*cols = {args.rows * args.cols} does not match m = {m}",
              file=sys.stderr)
        return EXIT_CONFIG
    out_dir = _resolve_out_dir(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for j in range(n):
            image = weights[:, j].reshape(args.rows, args.cols)
            export_pgm(image, out_dir / f"filter-{j:03d}.pgm")
    except OSError as exc:
        print(f"error: failed writing outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {n} filter images to {out_dir}")
    return EXIT_OK


def cmd_cost(args) -> int:
    try:
        cd, sdcp = cost_model(args.k, args.d, args.k_prime, args.batch_size,
                              args.t_gibbs, args.l_grad)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"cd_cost={cd!r} sdcp_cost={sdcp!r} ratio={sdcp / cd!r}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbrbm",
        description="Train and evaluate Gaussian-Bernoulli RBMs (S-DCP, CD, PCD).")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a key=value config file")
    p_train.add_argument("config", help="path to the run configuration file")
    p_train.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override a configuration key (repeatable)")
    p_train.add_argument("--out", help="output directory (default: config out_dir, "
                                       f"then ${ENV_OUT_ROOT}, then ./gbrbm-out)")
    p_train.add_argument("--seed", type=int, default=None, help="override the run seed")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="report ATLL/ATeLL for a checkpoint")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("--data", required=True, help="train-split data file")
    p_eval.add_argument("--test", help="optional test-split data file")
    p_eval.add_argument("--mode", choices=("auto", "exact", "ais"), default="auto")
    p_eval.add_argument("--data-format", choices=("auto", "idx", "csv"), default="auto")
    p_eval.add_argument("--csv-delimiter", default=",")
    p_eval.add_argument("--csv-header", action="store_true")
    p_eval.add_argument("--standardize", action="store_true",
                        help="fit standardization on --data and apply it to both splits")
    p_eval.add_argument("--ais-particles", type=int, default=100)
    p_eval.add_argument("--ais-temps", type=int, default=10000)
    p_eval.add_argument("--seed", type=int, default=0, help="AIS seed")
    p_eval.set_defaults(func=cmd_eval)

    p_sample = sub.add_parser("sample", help="generate samples from a checkpoint")
    p_sample.add_argument("checkpoint")
    p_sample.add_argument("--count", type=int, default=16)
    p_sample.add_argument("--steps", type=int, default=200,
                          help="Gibbs steps per sample (default 200)")
    p_sample.add_argument("--out", help="output directory")
    p_sample.add_argument("--rows", type=int, default=None)
    p_sample.add_argument("--cols", type=int, default=None)
    p_sample.add_argument("--seed", type=int, default=None,
                          help="sampling seed (default: checkpoint seed)")
    p_sample.set_defaults(func=cmd_sample)

    p_filters = sub.add_parser("filters", help="export per-hidden-unit weight images")
    p_filters.add_argument("checkpoint")
    p_filters.add_argument("--rows", type=int, required=True)
    p_filters.add_argument("--cols", type=int, required=True)
    p_filters.add_argument("--out", help="output directory")
    p_filters.set_defaults(func=cmd_filters)

    p_cost = sub.add_parser("cost", help="report the per-mini-batch cost model")
    p_cost.add_argument("--k", type=int, required=True, help="CD Gibbs steps")
    p_cost.add_argument("--d", type=int, required=True, help="S-DCP inner iterations")
    p_cost.add_argument("--k-prime", type=int, required=True,
                        help="S-DCP Gibbs steps per inner iteration")
    p_cost.add_argument("--batch-size", type=int, required=True)
    p_cost.add_argument("--t-gibbs", type=float, default=1.0,
                        help="cost of one Gibbs transition")
    p_cost.add_argument("--l-grad", type=float, default=1.0,
                        help="cost of one gradient evaluation")
    p_cost.set_defaults(func=cmd_cost)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
