"""Command-line front end: stack files, inversion runs, benchmarks.

Stack files are JSON: per-acquisition wavenumbers/timestamps, 1-based
pairing edges, and per-look observation vectors stored as [re, im]
pairs.  A stack's ``mode`` declares how it is meant to be read:

    single_master       star graph, linear model in the wavenumber
                        differences
    multi_master        arbitrary acyclic graph, bilinear model
    fake_single_master  multi-master graph deliberately read through
                        the linear difference model

Inversion writes one CSV row per look (schema
``look,order,s1,s2,amp1,amp2,residual,solver,iterations``); `simulate`
writes a truth sidecar next to the stack for later validation.
Optional side products: ``invert --profile-out`` dumps the raw solver
support next to the final estimate per look
(``look,stage,s,amp``, stage ``candidate``/``selected``) and
``validate --errors-out`` dumps each extracted error
(``method,look,error``).  All files are written to a temporary name
and renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bicram, l1rls, nls, selection, simulate, stack

__all__ = ["main"]

RESULT_FIELDS = ("look", "order", "s1", "s2", "amp1", "amp2", "residual", "solver", "iterations")
STATS_FIELDS = ("method", "n", "min", "max", "mean", "median", "sd", "mad")
PROFILE_FIELDS = ("look", "stage", "s", "amp")
ERROR_FIELDS = ("method", "look", "error")
MODES = ("single_master", "multi_master", "fake_single_master")
LINEAR_MODES = ("single_master", "fake_single_master")
PATH_LO_FRAC = 5e-2
PATH_HI_FRAC = 5e-1


class CliError(Exception):
    """User-facing error: message only, exit status 1."""


def _fmt(v: float) -> str:
    return f"{float(v):.9g}"


def _write_atomic(path: str, text: str) -> None:
    # temp-and-rename so a failed run never leaves a truncated file
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise CliError(f"cannot write {path}: {e.strerror}") from e


def _dump_json(path: str, obj) -> None:
    _write_atomic(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise CliError(f"{path} is not valid JSON: {e}") from e


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- stack files


def write_stack_file(path, mode, graph, geom, looks) -> None:
    """looks: iterable of (id, complex observation vector)."""
    obj = {
        "mode": mode,
        "acquisitions": [
            {"k": float(k), "t": float(t)}
            for k, t in zip(geom.wavenumbers, geom.timestamps)
        ],
        "edges": [[m + 1, n + 1] for m, n in graph.edges],
        "looks": [
            {
                "id": int(lid),
                "observations": [[float(z.real), float(z.imag)] for z in g],
            }
            for lid, g in looks
        ],
    }
    _dump_json(path, obj)


def parse_stack_file(path):
    """Returns (mode, graph, geometry, looks) with 0-based edges."""
    obj = _load_json(path)
    try:
        mode = obj["mode"]
        acqs = obj["acquisitions"]
        edges = obj["edges"]
        raw_looks = obj["looks"]
    except (KeyError, TypeError) as e:
        raise CliError(f"{path}: missing stack field {e}") from e
    if mode not in MODES:
        raise CliError(f"{path}: unknown mode {mode!r}")
    if len(acqs) < 2:
        raise CliError(f"{path}: need at least two acquisitions")
    k = np.array([a["k"] for a in acqs], dtype=float)
    t = np.array([a["t"] for a in acqs], dtype=float)
    geom = stack.Geometry(wavenumbers=k, timestamps=t)
    try:
        graph = stack.AcquisitionGraph(
            n_acq=len(acqs), edges=tuple((int(m) - 1, int(n) - 1) for m, n in edges)
        )
    except ValueError as e:
        raise CliError(f"{path}: bad pairing graph: {e}") from e
    if mode == "single_master" and not graph.is_single_master():
        raise CliError(f"{path}: mode single_master but the graph is not a star")
    if mode in ("multi_master", "fake_single_master") and graph.is_single_master():
        raise CliError(f"{path}: mode {mode} needs a multi-master graph")
    looks = []
    seen = set()
    for lk in raw_looks:
        lid = int(lk["id"])
        if lid in seen:
            raise CliError(f"{path}: duplicate look id {lid}")
        seen.add(lid)
        g = np.array([complex(re, im) for re, im in lk["observations"]])
        if g.size != graph.n_edges:
            raise CliError(
                f"{path}: look {lid} has {g.size} observations, expected {graph.n_edges}"
            )
        looks.append((lid, g))
    if not looks:
        raise CliError(f"{path}: stack has no looks")
    return mode, graph, geom, looks


# ------------------------------------------------------------------- simulate


def _resolve(rng, value, what):
    """Config field: plain number, or {"uniform": [lo, hi]} drawn per look."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, dict) and set(value) == {"uniform"}:
        lo, hi = value["uniform"]
        return float(rng.uniform(float(lo), float(hi)))
    raise CliError(f"scatterer field {what!r} must be a number or {{\"uniform\": [lo, hi]}}")


def _build_graph(cfg, n_acq):
    scheme = cfg.get("scheme")
    if scheme == "single_master":
        return stack.build_pairing_graph(n_acq, "single_master", master=int(cfg.get("master", 0)))
    if scheme == "sequential_pairs":
        return stack.build_pairing_graph(n_acq, "sequential_pairs")
    if scheme == "explicit":
        edges = [(int(m) - 1, int(n) - 1) for m, n in cfg.get("edges", [])]
        return stack.build_pairing_graph(n_acq, "explicit", edges=edges)
    raise CliError(f"unknown graph scheme {scheme!r}")


def cmd_simulate(args) -> int:
    cfg = _load_json(args.config)
    try:
        n_acq = int(cfg["n_acq"])
        k_max = float(cfg["k_max"])
        mode = cfg["mode"]
        n_looks = int(cfg["n_looks"])
        scat_cfgs = cfg["scatterers"]
        graph_cfg = cfg["graph"]
    except (KeyError, TypeError) as e:
        raise CliError(f"config is missing field {e}") from e
    if mode not in MODES:
        raise CliError(f"unknown mode {mode!r}")
    if n_looks < 1 or not scat_cfgs:
        raise CliError("need n_looks >= 1 and at least one scatterer")
    seed = cfg.get("seed", 0)
    spacing = cfg.get("spacing", "uniform")
    t_spacing = float(cfg.get("t_spacing", 11.0))
    wavelength = float(cfg.get("wavelength", simulate.DEFAULT_WAVELENGTH))
    snr_db = cfg.get("snr_db")
    snr_db = math.inf if snr_db is None else float(snr_db)

    children = np.random.SeedSequence(seed).spawn(n_looks + 1)
    try:
        geom = simulate.gen_geometry(n_acq, k_max, spacing=spacing, seed=children[0],
                                     t_spacing=t_spacing)
        graph = _build_graph(graph_cfg, n_acq)
    except ValueError as e:
        raise CliError(str(e)) from e
    if mode == "single_master" and not graph.is_single_master():
        raise CliError("mode single_master needs a single-master star graph")
    if mode in ("multi_master", "fake_single_master") and graph.is_single_master():
        raise CliError(f"mode {mode} needs a multi-master graph")

    looks, truth_looks = [], []
    for i in range(n_looks):
        rng = np.random.default_rng(children[i + 1])
        scatterers, truths = [], []
        for sc in scat_cfgs:
            s = _resolve(rng, sc["s"], "s")
            amp = _resolve(rng, sc["amp"], "amp")
            phase = sc.get("phase")
            phase = rng.uniform(0.0, 2.0 * math.pi) if phase is None else _resolve(rng, phase, "phase")
            v = _resolve(rng, sc.get("v", 0.0), "v")
            scatterers.append(simulate.Scatterer(s=s, gamma=amp * np.exp(1j * phase), v=v))
            truths.append({"s": s, "amp": amp, "phase": phase, "v": v})
        scene = simulate.Scene(scatterers=tuple(scatterers), snr_db=snr_db)
        stk = simulate.simulate_stack(scene, graph, geom, wavelength=wavelength, rng=rng)
        looks.append((i, stk.g))
        truth_looks.append({"id": i, "scatterers": truths})

    write_stack_file(args.out, mode, graph, geom, looks)
    _dump_json(args.out + ".truth.json", {"looks": truth_looks})
    print(
        f"wrote {n_looks} look(s), {graph.n_edges} observation(s) each "
        f"({mode}) -> {args.out}"
    )
    return 0


# --------------------------------------------------------------------- invert


def _parse_grid(text, geom, graph, linear):
    """--grid L,min,max; default 101 points over +-2 Rayleigh lengths."""
    if text is not None:
        parts = text.split(",")
        if len(parts) != 3:
            raise CliError("--grid must be L,min,max")
        L, lo, hi = int(parts[0]), float(parts[1]), float(parts[2])
        if L < 2:
            raise CliError("grid needs at least two points")
        if not lo < hi:
            raise CliError("grid extent must have min < max")
        return stack.ElevationGrid.linspace(lo, hi, L)
    k = geom.wavenumbers
    dk = k[graph.slave_idx] - k[graph.master_idx] if linear else k
    span = float(dk.max() - dk.min())
    if span <= 0:
        raise CliError("degenerate wavenumber span; pass --grid explicitly")
    ray = 2.0 * math.pi / span
    return stack.ElevationGrid.linspace(-2.0 * ray, 2.0 * ray, 101)


def _order0_row(lid, solver, residual=0.0, iterations=0):
    return [lid, 0, "", "", "", "", _fmt(residual), solver, iterations]


def _estimate_row(lid, solver, order, positions, amps, residual, iterations):
    s = ["", ""]
    a = ["", ""]
    for j in range(min(2, order)):
        s[j] = _fmt(positions[j])
        a[j] = _fmt(amps[j])
    return [lid, order, s[0], s[1], a[0], a[1], _fmt(residual), solver, iterations]


# worker context shared across looks; populated once per process
_CTX: dict = {}


def _init_worker(ctx):
    global _CTX
    _CTX = ctx


def _invert_look(item):
    lid, g = item
    c = _CTX
    method = c["method"]
    try:
        if not np.any(g):
            return lid, _order0_row(lid, method), False, []
        if method == "nls-enum":
            cand, rep = nls.sparse_recovery_enumerate(
                c["pair"], g, c["max_order"], solver="trustregion"
            )
            sel, sc = selection.select_order(
                c["pair"], g, cand, max_order=c["max_order"]
            )
            iters = rep.iterations
            rss = sc.rss
        elif method == "bicram":
            samples, best = bicram.solution_path(
                c["pair"], g, n_samples=c["path_samples"], max_order=c["max_order"]
            )
            sel = samples[best].estimate
            cand = samples[best].candidate
            iters = samples[best].iterations
            rss = sel.residual
        else:  # l1rls
            sel, cand, rss, iters = _l1rls_pipeline(c, g)
        order = sel.order
        positions = sel.positions
        amps = np.abs(sel.coefficients)
        if c["offgrid"] and order >= 1:
            if method == "l1rls":
                prob = selection.OffgridProblem.linear(c["graph"], c["geom"], c["grid"], g)
            else:
                prob = selection.OffgridProblem.bilinear(c["graph"], c["geom"], c["grid"], g)
            ref = selection.refine_offgrid(prob, sel)
            positions, amps, rss = ref.positions, np.abs(ref.coefficients), ref.residual
        profile = []
        if cand is not None:
            profile += [
                [lid, "candidate", _fmt(s), _fmt(a)]
                for s, a in zip(cand.positions, np.abs(cand.coefficients))
            ]
        profile += [
            [lid, "selected", _fmt(s), _fmt(a)] for s, a in zip(positions, amps)
        ]
        if order == 0:
            return lid, _order0_row(lid, method, residual=rss, iterations=iters), False, profile
        row = _estimate_row(lid, method, order, positions, amps, rss, iters)
        return lid, row, False, profile
    except Exception:
        return lid, [lid, 0, "", "", "", "", "", method + "!failed", ""], True, []


def _l1rls_pipeline(c, g):
    """Penalty path on the column-normalized design, linear BIC refit on
    the raw design; returns the selected estimate, the winning sample's
    pre-selection candidate, its refit rss and its iteration count."""
    A, An = c["A"], c["An"]
    lam_max = float(np.abs(An.conj().T @ g).max())
    if lam_max <= 0:
        raise ValueError("observations have no correlation with the design")
    lams = np.geomspace(PATH_LO_FRAC * lam_max, PATH_HI_FRAC * lam_max, c["path_samples"])
    opts = l1rls.AccelOptions(precondition=True, alpha=0.0, over_relax=True)
    best = None
    for lam in lams:
        z, rep = l1rls.solve_l1rls(An, g, float(lam), opts=opts)
        mods = np.abs(z)
        peak = float(mods.max())
        cand = np.flatnonzero(mods > 1e-6 * peak) if peak > 0 else np.array([], dtype=int)
        if cand.size > 8:
            cand = np.sort(cand[np.argsort(mods[cand])[-8:]])
        sel, sc = selection.select_order_linear(
            A, g, cand, c["grid"].positions, max_order=c["max_order"]
        )
        key = (sc.score, sel.order)
        if best is None or key < best[0]:
            best = (key, sel, sc.rss, rep.iterations, cand)
    _, sel, rss, iters, cand_idx = best
    if cand_idx.size:
        coeffs, _ = selection.linear_subset_fit(A, g, cand_idx)
    else:
        coeffs = np.zeros(0, dtype=complex)
    candidate = nls.ReflectivityEstimate(
        support=tuple(int(i) for i in cand_idx),
        coefficients=coeffs,
        positions=c["grid"].positions[cand_idx],
        residual=float("nan"),
        phase_fixed=False,
    )
    return sel, candidate, rss, iters


def cmd_invert(args) -> int:
    mode, graph, geom, looks = parse_stack_file(args.stack)
    method = args.method
    if method == "l1rls" and mode not in LINEAR_MODES:
        raise CliError("l1rls needs a single_master or fake_single_master stack")
    if method in ("nls-enum", "bicram") and mode != "multi_master":
        raise CliError(f"{method} needs a multi_master stack")
    if args.max_order < 1:
        raise CliError("--max-order must be at least 1")

    linear = method == "l1rls"
    grid = _parse_grid(args.grid, geom, graph, linear)
    ctx = {
        "method": method,
        "graph": graph,
        "geom": geom,
        "grid": grid,
        "max_order": args.max_order,
        "path_samples": args.path_samples,
        "offgrid": args.offgrid,
    }
    if linear:
        A = stack.single_master_matrix(graph, geom, grid)
        An, _ = l1rls.normalize_columns(A)
        ctx["A"], ctx["An"] = A, An
    else:
        ctx["pair"] = stack.steering_pair(graph, geom, grid)

    jobs = args.jobs if args.jobs else os.cpu_count() or 1
    if jobs == 1:
        _init_worker(ctx)
        results = [_invert_look(item) for item in looks]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(ctx,)) as pool:
            results = list(pool.map(_invert_look, looks))

    results.sort(key=lambda r: r[0])
    rows = [r[1] for r in results]
    failed = sum(1 for r in results if r[2])
    _write_atomic(args.out, _csv_text(RESULT_FIELDS, rows))
    if args.profile_out:
        profile_rows = [p for r in results for p in r[3]]
        _write_atomic(args.profile_out, _csv_text(PROFILE_FIELDS, profile_rows))
    print(f"inverted {len(rows)} look(s) with {method}, {failed} failed -> {args.out}")
    return 2 if failed else 0


# ------------------------------------------------------------------ benchmark


def cmd_benchmark(args) -> int:
    mode, graph, geom, looks = parse_stack_file(args.stack)
    if mode != "single_master":
        raise CliError("benchmark needs a single_master stack")
    by_id = dict(looks)
    lid = args.look if args.look is not None else looks[0][0]
    if lid not in by_id:
        raise CliError(f"look id {lid} not in stack")
    g = by_id[lid]
    grid = _parse_grid(args.grid, geom, graph, linear=True)
    A = stack.single_master_matrix(graph, geom, grid)
    An, _ = l1rls.normalize_columns(A)
    lam_max = float(np.abs(An.conj().T @ g).max())
    if lam_max <= 0:
        raise CliError(f"look {lid} is identically zero")
    lam = args.lam_frac * lam_max

    rows, traces = l1rls.benchmark_variants(An, g, lam, tol=args.tol, max_iter=args.max_iter)
    out_rows = [
        [r.variant, r.iterations, _fmt(r.final_objective), int(r.converged)] for r in rows
    ]
    _write_atomic(args.out, _csv_text(("variant", "iterations", "final_objective", "converged"), out_rows))

    stem, ext = os.path.splitext(args.out)
    trace_path = stem + "_trace" + (ext or ".csv")
    trace_rows = []
    for r in rows:
        tr = traces[r.variant]
        for it in range(1, len(tr)):
            trace_rows.append([r.variant, it, _fmt(tr[it])])
    _write_atomic(trace_path, _csv_text(("variant", "iteration", "objective"), trace_rows))

    winner = min(rows, key=lambda r: r.iterations)
    print(
        f"look {lid}: lambda = {lam:.6g}; fastest {winner.variant} "
        f"({winner.iterations} iterations) -> {args.out}, {trace_path}"
    )
    return 0


# ------------------------------------------------------------------- validate


def cmd_validate(args) -> int:
    truth_obj = _load_json(args.truth)
    try:
        truth = {
            int(lk["id"]): [float(sc["s"]) for sc in lk["scatterers"]]
            for lk in truth_obj["looks"]
        }
    except (KeyError, TypeError) as e:
        raise CliError(f"{args.truth}: malformed truth sidecar ({e})") from e

    errs: dict[str, list[float]] = {}
    err_rows: list[list] = []
    for path in args.results:
        try:
            with open(path, encoding="utf-8", newline="") as f:
                reader = csv.DictReader(f)
                if reader.fieldnames != list(RESULT_FIELDS):
                    raise CliError(f"{path}: unexpected CSV header {reader.fieldnames}")
                rows = list(reader)
        except OSError as e:
            raise CliError(f"cannot read {path}: {e.strerror}") from e
        for row in rows:
            lid = int(row["look"])
            if lid not in truth:
                raise CliError(f"{path}: look {lid} missing from the truth sidecar")
            solver = row["solver"]
            if solver.endswith("!failed"):
                continue
            order = int(row["order"])
            true_s = truth[lid]
            for col in ("s1", "s2")[: min(order, 2)]:
                if row[col] == "":
                    continue
                s = float(row[col])
                e = s - min(true_s, key=lambda ts: abs(s - ts))
                if args.extract_threshold is not None and abs(e) > args.extract_threshold:
                    continue
                errs.setdefault(solver, []).append(e)
                err_rows.append([solver, lid, _fmt(e)])

    if not errs:
        raise CliError("no usable estimates; nothing to validate")
    if args.errors_out:
        err_rows.sort(key=lambda r: (r[0], int(r[1])))
        _write_atomic(args.errors_out, _csv_text(ERROR_FIELDS, err_rows))
    out_rows = []
    for method in sorted(errs):
        st = simulate.error_stats(errs[method], np.zeros(len(errs[method])))
        out_rows.append(
            [method, st.n, _fmt(st.min), _fmt(st.max), _fmt(st.mean),
             _fmt(st.median), _fmt(st.sd), _fmt(st.mad)]
        )
        print(
            f"{method}: n={st.n} mean={st.mean:.4g} median={st.median:.4g} "
            f"sd={st.sd:.4g} mad={st.mad:.4g}"
        )
    _write_atomic(args.out, _csv_text(STATS_FIELDS, out_rows))
    return 0


# ----------------------------------------------------------------------- main


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mmtomo",
        description="Synthesize, invert, benchmark and validate single-look "
                    "tomographic stacks.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a stack file from a scene config")
    p.add_argument("config", help="scene config JSON")
    p.add_argument("--out", required=True, help="output stack JSON (truth sidecar "
                   "written alongside as <out>.truth.json)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("invert", help="invert every look of a stack to a results CSV")
    p.add_argument("stack", help="stack JSON")
    p.add_argument("--method", required=True, choices=("nls-enum", "bicram", "l1rls"))
    p.add_argument("--grid", help="L,min,max elevation grid "
                   "(default: 101 points over +-2 Rayleigh lengths)")
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--path-samples", type=int, default=11)
    p.add_argument("--offgrid", action="store_true",
                   help="polish selected scatterers off the grid")
    p.add_argument("--jobs", type=int, default=0,
                   help="parallel look workers (default: all cores)")
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--profile-out",
                   help="also write a look,stage,s,amp CSV with the raw solver "
                        "support (stage=candidate) and the final estimate "
                        "(stage=selected)")
    p.set_defaults(fn=cmd_invert)

    p = sub.add_parser("benchmark", help="run the solver acceleration benchmark on one look")
    p.add_argument("stack", help="single_master stack JSON")
    p.add_argument("--look", type=int, help="look id (default: first)")
    p.add_argument("--grid", help="L,min,max elevation grid")
    p.add_argument("--lam-frac", type=float, default=math.sqrt(PATH_LO_FRAC * PATH_HI_FRAC),
                   help="penalty as a fraction of the correlation peak")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--out", required=True, help="benchmark CSV (per-iteration trace "
                   "written alongside as <out stem>_trace.csv)")
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("validate", help="summarize height-estimate errors against a truth sidecar")
    p.add_argument("results", nargs="+", help="results CSV file(s)")
    p.add_argument("--truth", required=True, help="truth sidecar JSON")
    p.add_argument("--extract-threshold", type=float,
                   help="drop estimates further than this many meters from the truth")
    p.add_argument("--out", required=True, help="statistics CSV")
    p.add_argument("--errors-out",
                   help="also write every extracted method,look,error row")
    p.set_defaults(fn=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
