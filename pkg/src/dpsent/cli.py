"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error (missing or
unreadable input), 4 contract violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ContractError
from .experiment import (
    DEFAULT_CONFIG_TEXT,
    MODES,
    ConfigError,
    DataError,
    ExperimentConfig,
    load_config,
    run,
    sweep,
)
from .ingest import EmbeddingFormatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONTRACT = 4

CONFIG_ENV = "DPSENT_CONFIG"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dpsent",
        description="Single-node vs simulated-cluster sentiment training with a cost model.",
    )
    p.add_argument("--config", type=Path, help=f"INI config file (default: ${CONFIG_ENV} if set)")
    p.add_argument("--mode", choices=MODES, default="both")
    p.add_argument("--workers", type=int, help="override [cluster] workers")
    p.add_argument("--subsample", type=int, help="use a seeded random subset of this many documents")
    p.add_argument("--seed", type=int, help="override [train] shuffle_seed")
    p.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    p.add_argument("--sweep", metavar="K1,K2,...", help="distributed runs for each worker count, written to sweep.csv")
    p.add_argument("--dry-run", action="store_true", help="validate and print the plan without running")
    p.add_argument("--print-default-config", action="store_true", help="print an annotated default config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _resolve_config(args) -> ExperimentConfig:
    path = args.config or (Path(os.environ[CONFIG_ENV]) if os.environ.get(CONFIG_ENV) else None)
    cfg = load_config(path) if path is not None else ExperimentConfig()
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = replace(cfg, cluster=replace(cfg.cluster, worker_count=args.workers))
    if args.subsample is not None:
        if args.subsample < 1:
            raise ConfigError("--subsample must be >= 1")
        cfg = replace(cfg, subsample=args.subsample)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg = replace(cfg, hp=replace(cfg.hp, shuffle_seed=args.seed))
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _parse_sweep(text: str) -> list[int]:
    try:
        ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--sweep expects comma-separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise ConfigError("--sweep values must be integers >= 1")
    return ks


def _plan(cfg: ExperimentConfig, mode: str, ks) -> str:
    lines = [
        f"input:      {cfg.input_path}" + ("" if cfg.input is not None else "  (bundled)"),
        f"mode:       {'sweep ' + ','.join(map(str, ks)) if ks else mode}",
        f"workers:    {cfg.cluster.worker_count} ({cfg.cluster.sync_mode.value})",
        f"subsample:  {cfg.subsample if cfg.subsample is not None else 'all'}",
        f"embedder:   d={cfg.embedder.dimension} orders={list(cfg.embedder.ngram_orders)} seed={cfg.embedder.hash_seed}",
        f"train:      lr={cfg.hp.learning_rate} batch={cfg.hp.batch_size} epochs={cfg.hp.epochs} "
        f"fraction={cfg.hp.train_fraction} seed={cfg.hp.shuffle_seed}",
        f"network:    {cfg.network.link_bandwidth_gbps} Gbps, {cfg.network.link_latency_us} us",
        f"output:     {cfg.out_dir}",
    ]
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_default_config:
        sys.stdout.write(DEFAULT_CONFIG_TEXT)
        return EXIT_OK
    try:
        cfg = _resolve_config(args)
        ks = _parse_sweep(args.sweep) if args.sweep is not None else None
        if args.dry_run:
            print(_plan(cfg, args.mode, ks))
            return EXIT_OK
        if ks:
            rows = sweep(cfg, ks)
            print(f"{'k':>4}{'wall s':>12}{'sim s':>12}{'predicted s':>14}{'accuracy':>10}")
            for r in rows:
                print(f"{r['k']:>4}{r['wall_seconds']:>12.3f}{r['sim_seconds']:>12.3f}"
                      f"{r['predicted_seconds']:>14.3f}{r['accuracy']:>10.4f}")
            print(f"wrote {cfg.out_dir / 'sweep.csv'}")
            return EXIT_OK
        out = run(cfg, args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, EmbeddingFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ContractError, ValueError) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT

    for key in ("comparison", "bandwidth"):
        if key in out.texts:
            print(out.texts[key])
    if "cost.json" in out.files:
        cost = json.loads(out.texts["cost.json"])
        est = cost["train_distributed"]
        print(f"predicted distributed training: {est['total']:.3f} s "
              f"(sync k log k {est['sync']:.3f} s, flat star {est['sync_flat_star']:.3f} s)")
        if "validation" in cost:
            v = cost["validation"]
            print(f"simulated distributed training: {v['simulated_train_seconds']:.3f} s "
                  f"(relative error {v['relative_error'] * 100:+.1f}%)")
    for name, path in out.files.items():
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
