"""Command-line front end.

    hocurve optimize  --spec curves.json --p 2 --elements 8 --out run/
    hocurve converge  --curve circle --p 2,3,4 --elements 2,4,8,16,32 --out conv/
    hocurve decompose --curve semicircle --p 2 --q 3 --out roots/
    hocurve bench     --curve circle --elements 64 --workers 1,2,4 --out bench/

Exit codes: 0 success (or partial), 2 usage, 3 spec parse error, 4 all tasks
failed. Every output embeds the sha256 of the run manifest.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .disparity import ErrorDecomposition
from .geometry import BUILTINS, CurveError, CurveSpec, builtin
from .mesh import interpolate_meshes, make_partition
from .optimizer import Config, preoptimize_linear
from .parallel import MeshParams, run_by_curves, run_by_elements

log = logging.getLogger("hocurve")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_FAILED = 0, 2, 3, 4
SPEC_FIELDS = {"name", "kind", "params", "domain", "control_points", "knots", "degree"}


class UsageError(Exception):
    pass


class SpecParseError(Exception):
    pass


# ---------------------------------------------------------------------------
# spec files


def parse_spec_text(text: str, source: str = "<spec>") -> list:
    """Curves from a JSON list of objects (or ``{"curves": [...]}``)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if isinstance(data, dict) and "curves" in data:
        data = data["curves"]
    if not isinstance(data, list):
        raise SpecParseError(f"{source}: expected a list of curve objects")
    curves, seen = [], set()
    for i, obj in enumerate(data):
        where = f"{source}: curve[{i}]"
        if not isinstance(obj, dict):
            raise SpecParseError(f"{where}: expected an object")
        extra = set(obj) - SPEC_FIELDS
        if extra:
            raise SpecParseError(f"{where}: unknown field(s) {sorted(extra)}")
        for key in ("name", "kind"):
            if key not in obj:
                raise SpecParseError(f"{where}: missing field {key!r}")
        name = str(obj["name"])
        if name in seen:
            raise SpecParseError(f"{where}: duplicate name {name!r}")
        seen.add(name)
        try:
            curves.append(
                CurveSpec(
                    kind=obj["kind"],
                    params=obj.get("params", ()),
                    domain=obj.get("domain"),
                    control_points=obj.get("control_points"),
                    knots=obj.get("knots"),
                    degree=obj.get("degree"),
                    name=name,
                )
            )
        except (CurveError, TypeError, ValueError) as exc:
            raise SpecParseError(f"{where} ({name}): {exc}") from None
    if not curves:
        raise SpecParseError(f"{source}: no curves")
    return curves


def load_curves(args) -> list:
    curves = []
    if args.spec:
        path = Path(args.spec)
        try:
            text = path.read_text()
        except OSError as exc:
            raise SpecParseError(f"{path}: {exc.strerror}") from None
        curves += parse_spec_text(text, str(path))
    for name in args.curve or []:
        try:
            curves.append(builtin(name))
        except CurveError as exc:
            raise UsageError(str(exc)) from None
    if args.synthetic:
        curves += analysis.synthetic_suite(args.synthetic, args.seed)
    if not curves:
        raise UsageError("no curves: give --spec FILE, --curve NAME or --synthetic N")
    return curves


# ---------------------------------------------------------------------------
# formatting


def fmt(v) -> str:
    """Shortest round-trip float text; '' for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.bool_):
        return bool(v)
    return v


class Writer:
    """Writes outputs into one directory, stamping the manifest into each."""

    def __init__(self, out: Path, manifest: dict):
        self.out = out
        self.manifest = manifest
        self.text = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
        self.sha = hashlib.sha256(self.text.encode()).hexdigest()
        out.mkdir(parents=True, exist_ok=True)
        self.written = []

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        buf.write(f"# manifest_sha256={self.sha}\n# manifest={self.text}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
        self._put(name, buf.getvalue())

    def json(self, name: str, payload: dict):
        body = {"manifest_sha256": self.sha, "manifest": self.manifest}
        body.update(_jsonable(payload))
        self._put(name, json.dumps(body, indent=2, sort_keys=False, allow_nan=False) + "\n")

    def _put(self, name, text):
        path = self.out / name
        path.write_text(text)
        self.written.append(str(path))


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def mesh_rows(name, x, s):
    """One row per element node; blank cells where p and q differ."""
    xn, sn = x.element_nodes(), s.element_nodes()
    n = max(x.degree, s.degree) + 1
    for e in range(x.n_elements):
        for i in range(n):
            sv = sn[e, i] if i <= s.degree else None
            xv = list(xn[e, i]) if i <= x.degree else [None] * x.dim
            yield [name, e, i, sv] + xv


def mesh_header(dim):
    return ["curve", "element", "node_index", "s", "x", "y"] + (["z"] if dim == 3 else [])


def decomposition_rows(d: ErrorDecomposition):
    cols = [d.xi_global, d.abs_e, d.e_t, d.e_n] + ([d.e_b] if d.e_b is not None else [])
    return zip(*cols)


def decomposition_header(d: ErrorDecomposition):
    return ["xi_global", "abs_e", "e_t", "e_n"] + (["e_b"] if d.e_b is not None else [])


# ---------------------------------------------------------------------------
# commands


def _config(args) -> Config:
    return Config(tol=args.tol, max_iter=args.max_iter)


def _q(args, p):
    return 2 * p - 1 if args.q == "auto" else int(args.q)


def _single(values, flag):
    if len(values) != 1:
        raise UsageError(f"{flag} takes a single value for this command")
    return values[0]


def cmd_optimize(args, w: Writer) -> int:
    curves = load_curves(args)
    p = _single(args.p, "--p")
    R = _single(args.elements, "--elements")
    workers = _single(args.workers, "--workers")
    config = _config(args)
    params = MeshParams(p, _q(args, p), R, args.layout, args.partition)
    rep = run_by_curves(curves, params, config, workers)
    rows, reports = [], []
    for res in rep.results:
        if res.error:
            log.warning("curve %s failed: %s", res.name, res.error)
            reports.append({"curve": res.name, "error": res.error})
            continue
        r = res.report
        w.csv(f"mesh_{_safe(res.name)}.csv", mesh_header(res.x.dim), mesh_rows(res.name, res.x, res.s))
        reports.append({"curve": res.name, **r.to_dict()})
        rows.append([res.name, args.layout, r.iterations, r.line_search_count, r.converged, r.E_initial, r.E_final, r.wall_time])
    w.csv("aggregate.csv", ["curve", "layout", "iterations", "line_searches", "converged", "E_initial", "E_final", "seconds"], rows)
    w.json(
        "report.json",
        {"config": config.__dict__, "mesh": params.__dict__, "curves": reports, "parallel": rep.to_dict()},
    )
    if rep.results and len(rep.failures) == len(rep.results):
        return EXIT_FAILED
    return EXIT_OK


def cmd_converge(args, w: Writer) -> int:
    curves = load_curves(args)
    Rs = sorted(args.elements)
    config = Config(tol=args.tol if args.tol_set else analysis.STUDY_CONFIG.tol, max_iter=args.max_iter)
    workers = _single(args.workers, "--workers")
    q = None if args.q == "auto" else int(args.q)
    rows, summary, n_cells, n_failed = [], [], 0, 0
    for c in curves:
        try:
            st = analysis.run_study(c, args.p, Rs, args.layout, config, args.partition, q, workers)
        except analysis.StudyError as exc:
            log.warning("%s", exc)
            summary.append({"curve": c.name, "error": str(exc)})
            continue
        rows += list(st.rows())
        n_cells += len(st.cells)
        n_failed += sum(cell.failed for cell in st.cells)
        summary.append(st.to_dict())
    w.csv("study.csv", ["curve", "p", "q", "layout", "R", "disparity_initial", "disparity_opt"], rows)
    w.json("orders.json", {"config": config.__dict__, "studies": summary})
    return EXIT_FAILED if n_cells == n_failed else EXIT_OK


def cmd_decompose(args, w: Writer) -> int:
    curves = load_curves(args)
    config = Config(tol=args.tol if args.tol_set else analysis.STUDY_CONFIG.tol, max_iter=args.max_iter)
    R = _single(args.elements, "--elements")
    out, failed = [], 0
    for c in curves:
        for p in args.p:
            q = _q(args, p)
            tag = f"{_safe(c.name)}_p{p}_q{q}"
            try:
                res, d0, d1 = analysis.run_root_study(c, p, q, config, args.samples, None, R, args.layout)
            except Exception as exc:
                failed += 1
                log.warning("%s p=%d q=%d failed: %s", c.name, p, q, exc)
                out.append({"curve": c.name, "p": p, "q": q, "error": f"{type(exc).__name__}: {exc}"})
                continue
            w.csv(f"decomposition_{tag}_initial.csv", decomposition_header(d0), decomposition_rows(d0))
            w.csv(f"decomposition_{tag}_optimized.csv", decomposition_header(d1), decomposition_rows(d1))
            out.append({**res.to_dict(), "R": R, "layout": args.layout})
    w.json("roots.json", {"samples_per_element": args.samples, "results": out})
    return EXIT_FAILED if failed == len(out) else EXIT_OK


def cmd_bench(args, w: Writer) -> int:
    curves = load_curves(args)
    config = _config(args)
    p = _single(args.p, "--p")
    q = _q(args, p)
    R = _single(args.elements, "--elements")
    counts = sorted(set(args.workers))
    rows, runs, base = [], [], None
    identical = True
    if args.mode == "by_element":
        c = curves[0]
        if len(curves) > 1:
            log.warning("by_element bench uses the first curve only (%s)", c.name)
        part = preoptimize_linear(c, R, config) if args.partition == "preoptimize" else make_partition(c, R, args.partition)
        x, s = interpolate_meshes(c, R, p, q, part)
        for k in counts:
            rep = run_by_elements(c, x, s, config, k)
            key = (rep.x.nodes.tobytes(), rep.s.nodes.tobytes())
            runs.append((k, rep))
            base = base or key
            identical &= key == base
    else:
        params = MeshParams(p, q, R, args.layout, args.partition)
        for k in counts:
            rep = run_by_curves(curves, params, config, k)
            key = tuple(
                (r.x.nodes.tobytes(), r.s.nodes.tobytes()) if not r.error else (r.error,) for r in rep.results
            )
            runs.append((k, rep))
            base = base or key
            identical &= key == base
    t1 = runs[0][1].wall_time
    for k, rep in runs:
        its = sum(rep.worker_iterations)
        rows.append([args.mode, k, rep.effective_workers, rep.wall_time, t1 / rep.wall_time, its, len(rep.failures)])
    w.csv("timing.csv", ["mode", "workers", "effective_workers", "wall_time", "speedup", "iterations", "failures"], rows)
    w.json(
        "speedup.json",
        {
            "mode": args.mode,
            "baseline_workers": counts[0],
            "speedup": {str(k): t1 / rep.wall_time for k, rep in runs},
            "bitwise_identical": identical,
            "runs": {str(k): rep.to_dict() for k, rep in runs},
        },
    )
    last = runs[-1][1]
    n_tasks = len(last.task_reports)
    return EXIT_FAILED if n_tasks and len(last.failures) == n_tasks else EXIT_OK


COMMANDS = {"optimize": cmd_optimize, "converge": cmd_converge, "decompose": cmd_decompose, "bench": cmd_bench}


# ---------------------------------------------------------------------------


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _q_arg(text):
    if text == "auto":
        return text
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--q takes an integer or 'auto', got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("--q must be >= 1")
    return str(v)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hocurve", description="High-order curve meshes by disparity minimization.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--spec", help="curve spec file (JSON list of curve objects)")
    ap.add_argument("--curve", action="append", help=f"builtin curve, repeatable: {', '.join(sorted(BUILTINS))}")
    ap.add_argument("--synthetic", type=int, default=0, metavar="N", help="add an N-curve synthetic suite (uses --seed)")
    ap.add_argument("--p", type=_int_list, default=None, metavar="LIST", help="physical degree(s)")
    ap.add_argument("--q", type=_q_arg, default="auto", metavar="INT|auto", help="parametric degree (auto: 2p-1)")
    ap.add_argument("--elements", type=_int_list, default=None, metavar="LIST", help="element count(s)")
    ap.add_argument("--layout", choices=("constrained", "unconstrained"), default="constrained")
    ap.add_argument("--partition", choices=("uniform", "arclength", "preoptimize"), default=None)
    ap.add_argument("--workers", type=_int_list, default=None, metavar="LIST")
    ap.add_argument("--mode", choices=("by_element", "by_curve"), default="by_element", help="bench only")
    ap.add_argument("--samples", type=int, default=2000, help="decompose: samples per element")
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("--max-iter", type=int, default=200)
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


DEFAULTS = {
    "optimize": {"p": [2], "elements": [8], "workers": [1], "partition": "arclength"},
    "converge": {"p": [2, 3, 4], "elements": [2, 4, 8, 16, 32], "workers": [1], "partition": "arclength"},
    "decompose": {"p": [2], "elements": [1], "workers": [1], "partition": "arclength"},
    "bench": {"p": [2], "elements": [64], "workers": [1, 2, 4], "partition": "arclength"},
}


def manifest_of(args) -> dict:
    return {
        "command": args.command,
        "spec": args.spec,
        "curves": args.curve or [],
        "synthetic": args.synthetic,
        "p": args.p,
        "q": args.q,
        "elements": args.elements,
        "layout": args.layout,
        "partition": args.partition,
        "workers": args.workers,
        "mode": args.mode if args.command == "bench" else None,
        "samples": args.samples if args.command == "decompose" else None,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "seed": args.seed,
    }


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    for key, val in DEFAULTS[args.command].items():
        if getattr(args, key) is None:
            setattr(args, key, val)
    args.tol_set = args.tol is not None
    if args.tol is None:
        args.tol = Config.tol
    if args.tol <= 0 or args.max_iter < 1 or args.samples < 2:
        print("hocurve: error: --tol, --max-iter and --samples must be positive", file=sys.stderr)
        return EXIT_USAGE
    w = Writer(Path(args.out), manifest_of(args))
    w.json("manifest.json", {})
    try:
        code = COMMANDS[args.command](args, w)
    except UsageError as exc:
        print(f"hocurve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecParseError as exc:
        print(f"hocurve: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    for path in w.written:
        log.info("wrote %s", path)
    return code


if __name__ == "__main__":
    sys.exit(main())
