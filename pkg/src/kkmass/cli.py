"""Command line: ``kkmass <task> --config <path> [--out <path>] [--threads n] [--seed n]``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import TASKS, ConfigError, load_config
from .models import ModelError
from .report import render_json, render_text
from .run import run

__all__ = ["main", "build_parser"]

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kkmass", description="Mass computations on asymptotically flat and asymptotically product metrics.")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", help="write the JSON report here (text report goes next to it with .txt)")
    p.add_argument("--threads", type=int, help="worker threads for shell quadrature")
    p.add_argument("--seed", type=int, help="seed for sampled points")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        config = load_config(args.config)
    except FileNotFoundError:
        print(f"kkmass: config not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"kkmass: {exc}", file=sys.stderr)
        return EXIT_USAGE
    overrides = {}
    if args.threads is not None:
        if args.threads < 1:
            print("kkmass: --threads must be at least 1", file=sys.stderr)
            return EXIT_USAGE
        overrides["threads"] = args.threads
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output"] = args.out
    config = replace(config, task=config.task or args.task, **overrides)
    try:
        report = run(config, args.task)
    except (ModelError, ValueError) as exc:
        print(f"kkmass: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render_text(report)
    sys.stdout.write(text)
    if config.output:
        out = Path(config.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(render_json(report), encoding="utf-8")
        out.with_suffix(".txt").write_text(text, encoding="utf-8")
    return EXIT_PASS if report["status"] == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
