"""Command-line front end. Subcommands cover the lambda-sweep tradeoff
experiments, bound-curve emission, the 2x2 topology dump, the security game,
and synthetic movement data. Exit codes: 0 success, 1 configuration error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import casestudies
from .harness import (
    ConfigError,
    ExperimentConfig,
    emit_bound_curves,
    run_topology,
    run_tradeoff_nfg,
    run_tradeoff_sbg,
    write_rows,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports flag problems as exit code 1 with usage text."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def parse_grid(text: str) -> tuple:
    """Accept 'start:stop:step' (inclusive endpoints) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must be start:stop:step or a comma list")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"bad grid bounds in {text!r}")
        n = int(round((stop - start) / step)) + 1
        return tuple(float(np.round(start + i * step, 12)) for i in range(n))
    return tuple(float(p) for p in text.split(",") if p.strip())


def parse_bounds(text: str) -> tuple:
    lo, hi = (float(p) for p in text.split(":"))
    if hi <= lo:
        raise ConfigError(f"bounds {text!r} must be lo:hi with lo < hi")
    return lo, hi


def _add_common(sp, runs_default=1000):
    sp.add_argument("--lambda-grid", default="0:1:0.1", help="start:stop:step or comma list")
    sp.add_argument("--runs", type=int, default=runs_default)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output file path")
    sp.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    sp.add_argument("--deterministic", action="store_true",
                    help="suppress the timestamp meta line for byte-identical reruns")


def build_parser() -> _Parser:
    p = _Parser(prog="beliefsafe", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t_nfg = sub.add_parser("tradeoff-nfg", help="normal-form lambda sweep")
    t_nfg.add_argument("--game", default="mp", help="mp | amp | game JSON path")
    t_nfg.add_argument("--theta", default=None, help="paper | full | game JSON path")
    t_nfg.add_argument("--eps-grid", default=None, help="belief-error grid (comma list)")
    _add_common(t_nfg)

    t_sbg = sub.add_parser("tradeoff-sbg", help="stochastic-game lambda sweep")
    t_sbg.add_argument("--game", default="mp-sbg",
                       help="mp-sbg | amp-sbg | security-synth | game JSON path")
    t_sbg.add_argument("--type-set", default=None, help="behavior type-set JSON path")
    t_sbg.add_argument("--horizon", type=int, default=200)
    t_sbg.add_argument("--gamma", type=float, default=0.9)
    t_sbg.add_argument("--policy", choices=("value", "blend"), default="value")
    _add_common(t_sbg, runs_default=100)

    b = sub.add_parser("bounds", help="theoretical envelope curves")
    b.add_argument("--gamma", required=True, help="discount value or comma list")
    b.add_argument("--r-max", type=float, required=True)
    b.add_argument("--nu", type=float, required=True)
    b.add_argument("--lambda-grid", default="0:1:0.1")
    b.add_argument("--out", required=True)
    b.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    b.add_argument("--deterministic", action="store_true")

    topo = sub.add_parser("topology", help="the 78 strictly ordinal 2x2 classes")
    topo.add_argument("--out", required=True)
    topo.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    topo.add_argument("--deterministic", action="store_true")

    sec = sub.add_parser("security-game", help="defender-vs-poacher lambda sweep")
    sec.add_argument("--data", default="synth", help="'synth' or a movement CSV path")
    sec.add_argument("--horizon", type=int, default=200)
    sec.add_argument("--gamma", type=float, default=0.9)
    sec.add_argument("--boost", type=float, default=0.05)
    sec.add_argument("--policy", choices=("value", "blend"), default="value")
    sec.add_argument("--lat-bounds", default="0:3", help="lo:hi latitude bounds")
    sec.add_argument("--lon-bounds", default="0:3", help="lo:hi longitude bounds")
    _add_common(sec, runs_default=50)

    syn = sub.add_parser("synth-data", help="write synthetic movement tracks")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--animals", type=int, default=32)
    syn.add_argument("--years", type=int, default=8)
    syn.add_argument("--lat-bounds", default="0:3")
    syn.add_argument("--lon-bounds", default="0:3")
    syn.add_argument("--out", required=True)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1

    try:
        if args.command == "tradeoff-nfg":
            cfg = ExperimentConfig(
                game=args.game,
                theta=args.theta,
                lambda_grid=parse_grid(args.lambda_grid),
                eps_grid=parse_grid(args.eps_grid) if args.eps_grid else None,
                runs=args.runs,
                seed=args.seed,
                out=args.out,
                fmt=args.fmt,
                deterministic=args.deterministic,
            )
            rows, meta = run_tradeoff_nfg(cfg)
            write_rows(args.out, rows, meta, cfg.fmt, cfg.deterministic)
        elif args.command == "tradeoff-sbg":
            cfg = ExperimentConfig(
                game=args.game,
                type_set=args.type_set,
                lambda_grid=parse_grid(args.lambda_grid),
                runs=args.runs,
                horizon=args.horizon,
                seed=args.seed,
                gamma=args.gamma,
                policy=args.policy,
                out=args.out,
                fmt=args.fmt,
                deterministic=args.deterministic,
            )
            rows, meta = run_tradeoff_sbg(cfg)
            write_rows(args.out, rows, meta, cfg.fmt, cfg.deterministic)
        elif args.command == "bounds":
            gammas = [float(g) for g in args.gamma.split(",") if g.strip()]
            lam_grid = parse_grid(args.lambda_grid)
            for g in gammas:
                if not 0.0 < g < 1.0:
                    raise ConfigError(f"gamma {g} outside (0, 1)")
            if args.r_max <= 0:
                raise ConfigError("r-max must be positive")
            rows = emit_bound_curves(gammas, args.r_max, args.nu, lam_grid)
            meta = {
                "kind": "bounds",
                "gamma": ",".join(repr(g) for g in gammas),
                "r_max": args.r_max,
                "nu": args.nu,
                "lambda_grid": ":".join(repr(l) for l in lam_grid),
            }
            write_rows(args.out, rows, meta, args.fmt, args.deterministic)
        elif args.command == "topology":
            rows = run_topology()
            write_rows(args.out, rows, {"kind": "topology", "classes": len(rows)},
                       args.fmt, args.deterministic)
        elif args.command == "security-game":
            cfg = ExperimentConfig(
                game="security-synth" if args.data == "synth" else "security-data",
                data=None if args.data == "synth" else args.data,
                lambda_grid=parse_grid(args.lambda_grid),
                runs=args.runs,
                horizon=args.horizon,
                seed=args.seed,
                gamma=args.gamma,
                boost=args.boost,
                policy=args.policy,
                lat_bounds=parse_bounds(args.lat_bounds),
                lon_bounds=parse_bounds(args.lon_bounds),
                out=args.out,
                fmt=args.fmt,
                deterministic=args.deterministic,
            )
            rows, meta = run_tradeoff_sbg(cfg)
            write_rows(args.out, rows, meta, cfg.fmt, cfg.deterministic)
        elif args.command == "synth-data":
            casestudies.synth_movement_data(
                args.out,
                seed=args.seed,
                n_animals=args.animals,
                n_years=args.years,
                lat_bounds=parse_bounds(args.lat_bounds),
                lon_bounds=parse_bounds(args.lon_bounds),
            )
            print(f"wrote {args.out}")
            return 0
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures are reported distinctly
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    n = len(rows)
    print(f"wrote {args.out} ({n} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
