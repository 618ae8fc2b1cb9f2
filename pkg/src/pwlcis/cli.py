"""Command line driver.

    pwlcis run      --config example1 --out runs/ex1
    pwlcis sample   --config example1 --out runs/ex1
    pwlcis prune    --config example1 --out runs/ex1   # and fit, assemble, certify, oracle, plot

Exit codes: 0 ok, 2 invalid config or missing input artifact, 3 solver
failure, 4 geometry failure.  Failures print ``[stage] error: ...`` to stderr.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import ConfigError, load_config
from .geometry import GeometryError
from .pipeline import STAGES, MissingArtifact, pipeline_stages, run_stage

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_GEOMETRY = 0, 2, 3, 4


def _parser():
    ap = argparse.ArgumentParser(prog="pwlcis",
                                 description="Sample-based control invariant set approximation")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run",) + STAGES:
        sp = sub.add_parser(name, help="full pipeline" if name == "run" else f"{name} stage only")
        sp.add_argument("--config", required=True,
                        help="JSON config path, or a bundled name (example1, example2)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="processes for trajectories and restarts (default: core count)")
        sp.add_argument("--out", required=True, help="artifact directory")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    stage = "config"
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = load_config(args.config, args.seed)
        with np.errstate(all="ignore"):
            todo = pipeline_stages(cfg) if args.command == "run" else [args.command]
            for stage in todo:
                run_stage(stage, cfg, args.out, args.workers)
    except (ConfigError, MissingArtifact) as exc:
        print(f"[{stage}] error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as exc:
        print(f"[{stage}] geometry error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except Exception as exc:  # solver, sampling and fitting failures
        print(f"[{stage}] solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.verbose:
        print(f"artifacts written to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
