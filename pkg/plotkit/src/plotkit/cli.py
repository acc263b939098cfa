"""plotkit CLI: `plotkit <kind> --in data.csv [--in more.csv] --out fig.png`."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .figures import KINDS, FigureSpec, MissingColumnsError, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   help="input CSV (repeatable)")
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        path = render(FigureSpec(inputs=tuple(args.inputs), kind=args.kind, out=args.out))
    except (MissingColumnsError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
