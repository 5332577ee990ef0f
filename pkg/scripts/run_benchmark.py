#!/usr/bin/env python3
"""Acceleration benchmark on one synthetic single-master look.

Simulates a star-graph stack, times all six splitting variants on the
same penalized fit, prints the summary table, and (when the ``plots``
package is installed) renders the per-iteration convergence curves.

    python3 scripts/run_benchmark.py --workdir benchmark_out
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from mmtomo.cli import main as mmtomo


def run(argv):
    print("$ mmtomo " + " ".join(str(a) for a in argv))
    rc = mmtomo([str(a) for a in argv])
    if rc != 0:
        sys.exit(rc)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="benchmark_out", type=Path)
    ap.add_argument("--seed", default=1, type=int)
    args = ap.parse_args()
    wd = args.workdir
    wd.mkdir(parents=True, exist_ok=True)

    cfg = wd / "scene.json"
    cfg.write_text(json.dumps({
        "seed": args.seed,
        "n_acq": 21,
        "k_max": 0.155,
        "spacing": "random",
        "mode": "single_master",
        "n_looks": 1,
        "graph": {"scheme": "single_master", "master": 0},
        "scatterers": [
            {"s": -11.0, "amp": 1.0},
            {"s": 9.0, "amp": 0.8},
        ],
        "snr_db": 2,
    }, indent=2))

    stackp = wd / "stack.json"
    run(["simulate", cfg, "--out", stackp])
    out = wd / "benchmark.csv"
    run(["benchmark", stackp, "--grid", "101,-30,30", "--out", out])

    with open(out, newline="") as f:
        rows = list(csv.DictReader(f))
    width = max(len(r["variant"]) for r in rows)
    print(f"\n{'variant':<{width}}  iterations  objective      converged")
    for r in rows:
        print(f"{r['variant']:<{width}}  {r['iterations']:>10}  "
              f"{float(r['final_objective']):<13.6g}  {r['converged']}")

    try:
        from plots import PlotSpec, render
    except ModuleNotFoundError:
        print("\nplots package not installed; skipping the convergence figure")
        return
    trace = out.with_name(out.stem + "_trace.csv")
    render(PlotSpec(kind="convergence", source=trace,
                    output=wd / "convergence.png", logy=True))
    print(f"\nconvergence curves in {wd / 'convergence.png'}")


if __name__ == "__main__":
    main()
