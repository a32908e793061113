"""Command line: ``plotkit render <figure-spec.json>``.

A spec file holds one figure description (or a list of them):

    {"kind": "waterfall", "inputs": ["runs/abc/snapshots.csv"],
     "output": "figs/waterfall.svg", "style": {"title": "single peakon"}}
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .figures import FigureSpec, render
from .io import SchemaError


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="plotkit")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_render = sub.add_parser("render", help="render figures from a spec file")
    p_render.add_argument("spec", type=Path)
    args = ap.parse_args(argv)

    specs = json.loads(args.spec.read_text())
    if isinstance(specs, dict):
        specs = [specs]
    try:
        for d in specs:
            out = render(FigureSpec.from_dict(d))
            print(out)
    except (SchemaError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
