"""``plots <spec.json>``: render one spec object or a list of them.

The JSON mirrors PlotSpec field for field, e.g.

    {"kind": "histogram", "source": "errors.csv",
     "output": "hist.png", "xlabel": "height error [m]"}

A top-level array renders several figures in one call.
"""

from __future__ import annotations

import argparse
import json
import sys

from .figures import PlotSpec, render

__all__ = ["main"]


def _load_specs(path) -> list[PlotSpec]:
    try:
        with open(path, encoding="utf-8") as f:
            obj = json.load(f)
    except OSError as e:
        raise ValueError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON ({e})") from e
    items = obj if isinstance(obj, list) else [obj]
    specs = []
    for item in items:
        if not isinstance(item, dict):
            raise ValueError(f"{path}: each spec must be a JSON object")
        try:
            specs.append(PlotSpec(**item))
        except TypeError as e:
            raise ValueError(f"{path}: bad spec fields ({e})") from e
    if not specs:
        raise ValueError(f"{path}: no specs")
    return specs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plots",
        description="render figures from tomography result CSV files",
    )
    ap.add_argument("spec", help="JSON file holding one plot spec or a list")
    args = ap.parse_args(argv)
    try:
        for spec in _load_specs(args.spec):
            res = render(spec)
            print(f"wrote {res.output}")
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
