"""``tsa-grid-sim`` command line entry point.

Exit status: 0 on success, 2 for configuration errors, 3 for failures while
running the simulation. Failures also print a JSON error record on stderr
and, when an output directory is known, write it to ``error.json``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from dataclasses import replace
from pathlib import Path

from .config import KINDS, ConfigError, load_config
from .runner import run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsa-grid-sim", description="Time stamp attack scenarios on PMU applications.")
    ap.add_argument("command", choices=(*KINDS, "validate"))
    ap.add_argument("--config", required=True, help="TOML scenario file")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="output directory (default: config output_dir, $TSA_GRID_SIM_OUT, ./out)")
    ap.add_argument("--sweep", help="comma-separated override of the sweep values")
    return ap


def _report(code: int, kind: str, exc: BaseException, out_dir) -> int:
    record = {"status": code, "error": kind, "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        record["location"] = exc.location
    else:
        record["traceback"] = traceback.format_exception_only(type(exc), exc)
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out_dir = args.out
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed", "must be non-negative")
            cfg = replace(cfg, seed=args.seed)
        if args.sweep is not None:
            try:
                values = [float(v) for v in args.sweep.split(",") if v.strip()]
            except ValueError:
                raise ConfigError("sweep", f"cannot parse {args.sweep!r}") from None
            if not values:
                raise ConfigError("sweep", "needs at least 1 entries")
            cfg = replace(cfg, sweep=values)
        if args.command != "validate" and args.command != cfg.kind:
            raise ConfigError("kind", f"config is a {cfg.kind!r} scenario, not {args.command!r}")
    except ConfigError as exc:
        return _report(EXIT_CONFIG, "config", exc, out_dir)
    except OSError as exc:
        return _report(EXIT_CONFIG, "config", exc, out_dir)
    if args.command == "validate":
        print(json.dumps({"status": 0, "kind": cfg.kind, "seed": cfg.seed, "sweep": cfg.sweep}))
        return EXIT_OK
    out_dir = out_dir or cfg.output_dir or os.environ.get("TSA_GRID_SIM_OUT", "out")
    try:
        res = run(cfg, out_dir)
    except Exception as exc:  # surfaced as a machine-readable record
        return _report(EXIT_RUNTIME, "runtime", exc, out_dir)
    print(json.dumps({"status": 0, "out_dir": str(res.out_dir), "files": sorted(res.files)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
