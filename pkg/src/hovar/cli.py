"""Command-line front end: solve, verify, check, gap, probe, fixtures, rerun."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import __version__, fixtures
from .conditions import CONSTANT, NON_CONSTANT, default_tolerance, dubois_reymond_residual, euler_lagrange_residual, residual_csv
from .dual import EvaluationError
from .expr import ExprSyntaxError
from .regularity import CONDITIONS, FIRST_ORDER_ONLY, JetBox, check_conditions
from .solver import ProblemError, ProblemSpec, SolveOptions, blowup_probe, lavrentiev_gap, minimize
from .trajectory import Mesh, Trajectory, mesh_from_spec

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_NON_CONSTANT = 3
EXIT_INCONCLUSIVE = 4


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers


def write_atomic(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def table_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return v


def write_manifest(args, out: Path, argv: list[str]) -> None:
    problem = getattr(args, "problem", None)
    digest = None
    if problem and Path(problem).is_file():
        digest = hashlib.sha256(Path(problem).read_bytes()).hexdigest()
    overrides = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("command", "problem", "out", "func", "seed") and v is not None
    }
    manifest = {
        "command": args.command,
        "problem": problem,
        "problem_sha256": digest,
        "overrides": overrides,
        "seed": getattr(args, "seed", None),
        "out": str(out),
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "argv": argv,
    }
    write_atomic(out / "manifest.json", dump_json(manifest))


# ---------------------------------------------------------------------------
# input handling


def read_json(path: str, what: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{what} file: {exc.strerror}: {path}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file: invalid JSON ({exc})") from None


def load_problem(path: str) -> tuple[ProblemSpec, dict]:
    raw = read_json(path, "problem")
    try:
        return ProblemSpec.from_dict(raw), raw
    except ProblemError as exc:
        raise InputError(str(exc)) from None


def parse_grading(text: str) -> dict:
    parts = text.split(":")
    if parts[0] == "uniform" and len(parts) == 1:
        return {"kind": "uniform"}
    if parts[0] != "geometric" or len(parts) > 4:
        raise InputError(f"--grading: expected 'uniform' or 'geometric[:ratio[:endpoint[:per_level]]]', got {text!r}")
    spec = {"kind": "geometric"}
    try:
        if len(parts) > 1:
            spec["ratio"] = float(parts[1])
        if len(parts) > 2:
            spec["endpoint"] = parts[2]
        if len(parts) > 3:
            spec["per_level"] = int(parts[3])
    except ValueError:
        raise InputError(f"--grading: malformed value in {text!r}") from None
    return spec


def build_mesh(p: ProblemSpec, base: dict | None, mesh_arg: int | None, grading_arg: str | None) -> Mesh:
    spec = dict(base or {"kind": "uniform", "cells": 8})
    if grading_arg is not None:
        g = parse_grading(grading_arg)
        if g["kind"] != spec.get("kind"):
            spec = {k: v for k, v in spec.items() if k == "per_level"} if g["kind"] == "geometric" else {}
        spec.update(g)
    if mesh_arg is not None:
        spec.pop("nodes", None)
        spec["cells" if spec.get("kind", "uniform") == "uniform" else "levels"] = mesh_arg
    try:
        return mesh_from_spec(spec, p.interval)
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"mesh: {exc}") from None


def solve_options(args, raw: dict, mesh: Mesh) -> SolveOptions:
    quad = args.quad_order if args.quad_order is not None else int(raw.get("quad_order", 8))
    try:
        return SolveOptions(
            mesh=mesh,
            quad_order=quad,
            restarts=int(raw.get("restarts", 5)),
            maxiter=int(raw.get("maxiter", 20000)),
            seed=args.seed,
            cap=getattr(args, "cap", None),
        )
    except ValueError as exc:
        raise InputError(f"options: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args, out: Path) -> int:
    p, raw = load_problem(args.problem)
    mesh = build_mesh(p, raw.get("mesh"), args.mesh, args.grading)
    opts = solve_options(args, raw, mesh)
    try:
        opts.check(p.m)
    except ValueError as exc:
        raise InputError(f"quad_order: {exc}") from None
    res = minimize(p, opts)
    report = {"manifest": "manifest.json", "problem": raw.get("name"), **res.summary()}
    write_atomic(out / "trajectory.json", res.trajectory.to_json() + "\n")
    write_atomic(out / "trajectory.csv", res.trajectory.to_csv())
    write_atomic(out / "solve.json", dump_json(report))
    print(f"value {res.value!r} converged {res.converged}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_verify(args, out: Path) -> int:
    p, raw = load_problem(args.problem)
    rec = read_json(args.trajectory, "trajectory")
    try:
        x = Trajectory.from_record(rec)
    except (ValueError, TypeError) as exc:
        raise InputError(f"trajectory: {exc}") from None
    if x.m < p.m or x.n != p.n:
        raise InputError(f"trajectory: has m={x.m}, n={x.n}; problem needs m={p.m}, n={p.n}")
    if abs(x.a - p.a) > 1e-12 * max(1.0, abs(p.a)) or abs(x.b - p.b) > 1e-12 * max(1.0, abs(p.b)):
        raise InputError(f"trajectory: spans [{x.a}, {x.b}], problem interval is {list(p.interval)}")
    if args.tolerance is not None:
        tol = args.tolerance
    elif "tolerance" in raw:
        tol = float(raw["tolerance"])
    else:
        tol = default_tolerance(x)
    quad = args.quad_order or int(raw.get("quad_order", 8))
    try:
        reports = [dubois_reymond_residual(p.L, x, tol, p.m, quad)]
        reports += euler_lagrange_residual(p.L, x, tol, p.m, quad)
    except EvaluationError as exc:
        raise InputError(f"lagrangian: {exc}") from None
    verdicts = [r.verdict for r in reports]
    if NON_CONSTANT in verdicts:
        overall, code = NON_CONSTANT, EXIT_NON_CONSTANT
    elif all(v == CONSTANT for v in verdicts):
        overall, code = CONSTANT, EXIT_OK
    else:
        overall, code = "inconclusive", EXIT_INCONCLUSIVE
    report = {
        "manifest": "manifest.json",
        "problem": raw.get("name"),
        "trajectory": args.trajectory,
        "tolerance": tol,
        "verdict": overall,
        "reports": [r.summary() for r in reports],
    }
    write_atomic(out / "verify.json", dump_json(report))
    write_atomic(out / "residuals.csv", residual_csv(reports))
    for r in reports:
        print(f"{r.id:6s} {r.verdict:27s} relative deviation {r.relative_deviation:.3e}")
    return code


def cmd_check(args, out: Path) -> int:
    p, raw = load_problem(args.problem)
    box_raw = read_json(args.box, "box") if args.box else raw.get("box")
    if box_raw is None:
        raise InputError("box: no --box file and no 'box' section in the problem")
    try:
        box = JetBox.from_dict(box_raw)
    except (ValueError, TypeError) as exc:
        raise InputError(f"box: {exc}") from None
    if args.conditions:
        ids = [c.strip() for c in args.conditions.split(",") if c.strip()]
    else:
        ids = ["h2", "h3", "h4"] + (list(FIRST_ORDER_ONLY) if box.m == 1 else [])
    known = set(CONDITIONS) | {"h2", "h3"}
    unknown = [c for c in ids if c not in known]
    if unknown:
        raise InputError(f"conditions: unknown condition id {unknown[0]!r}")
    try:
        verdicts = check_conditions(p.L, box, ids)
    except ValueError as exc:
        raise InputError(f"box: {exc}") from None
    rows = [v.to_dict() for v in verdicts]
    write_atomic(out / "check.json", dump_json({"manifest": "manifest.json", "problem": raw.get("name"), "verdicts": rows}))
    write_atomic(out / "check.csv", table_csv(rows, ["id", "status", "witness", "point", "notes"]))
    for v in verdicts:
        wit = ", ".join(f"{k}={val:g}" for k, val in v.witness.items() if isinstance(val, float))
        print(f"{v.id:16s} {v.status:13s} {wit}")
    return EXIT_OK


def _levels(args, raw) -> int:
    levels = args.levels if args.levels is not None else int(raw.get("levels", 6))
    if levels < 3:
        raise InputError("levels: need at least 3")
    return levels


def cmd_gap(args, out: Path) -> int:
    p, raw = load_problem(args.problem)
    levels = _levels(args, raw)
    cap = args.cap if args.cap is not None else raw.get("cap")
    if cap is None:
        raise InputError("cap: give --cap or a 'cap' entry in the problem")
    free_spec = raw.get("free_mesh") or raw.get("mesh")
    if not free_spec or free_spec.get("kind") != "geometric":
        free_spec = {"kind": "geometric", "levels": 3, "ratio": 0.5, "endpoint": raw.get("endpoint", "left"), "per_level": 2}
    free_mesh = build_mesh(p, free_spec, args.mesh, args.grading)
    cap_mesh = build_mesh(p, raw.get("cap_mesh", {"kind": "uniform", "cells": 4}), None, None)
    opts = replace(solve_options(args, raw, free_mesh), cap=None)
    tol = args.tolerance if args.tolerance is not None else 1e-6
    rep = lavrentiev_gap(p, float(cap), levels, opts, free_mesh, cap_mesh, tol)
    write_atomic(out / "gap.json", dump_json({"manifest": "manifest.json", "problem": raw.get("name"), **rep.summary()}))
    cols = ["level", "free_cells", "free_min_cell", "free_value", "free_converged", "cap_cells", "cap_value",
            "cap_converged", "cap_violation", "margin"]
    write_atomic(out / "gap.csv", table_csv(rep.levels, cols))
    print(f"verdict {rep.verdict} margin {rep.gap!r} threshold {rep.threshold!r}")
    return EXIT_OK


def cmd_probe(args, out: Path) -> int:
    p, raw = load_problem(args.problem)
    levels = _levels(args, raw)
    mesh = build_mesh(p, raw.get("mesh"), args.mesh, args.grading)
    opts = solve_options(args, raw, mesh)
    rep = blowup_probe(p, levels, opts, mesh)
    write_atomic(out / "probe.json", dump_json({"manifest": "manifest.json", "problem": raw.get("name"), **rep.summary()}))
    write_atomic(out / "probe.csv", table_csv(rep.rows, ["level", "cells", "min_cell", "value", "converged", "sup_norm", "ratio"]))
    print("sup norms " + " ".join(f"{s:.6g}" for s in rep.sup_norms) + f"  unbounded-suspect {rep.unbounded_suspect}")
    return EXIT_OK


def cmd_fixtures(args, out: Path | None) -> int:
    if args.action == "list":
        for name, desc in fixtures.describe():
            print(f"{name:16s} {desc}")
        return EXIT_OK
    target = Path(args.directory or ".")
    for path in fixtures.export(target):
        print(path)
    return EXIT_OK


def cmd_rerun(args, out: Path | None) -> int:
    manifest = read_json(args.manifest, "manifest")
    argv = list(manifest.get("argv") or [])
    if not argv:
        raise InputError("manifest: no recorded argv")
    if args.out:
        argv += ["--out", args.out]
    return main(argv)


# ---------------------------------------------------------------------------
# argument parsing


def _common(sp, levels=False, cap=False, tolerance=False):
    sp.add_argument("problem", help="problem file (JSON)")
    sp.add_argument("--seed", type=int, default=0, help="random seed for restarts and sampling")
    sp.add_argument("--out", default="hovar-out", help="output directory")
    sp.add_argument("--quad-order", type=int, default=None, help="Gauss points per cell")
    sp.add_argument("--mesh", type=int, default=None, help="uniform cell count or geometric level count")
    sp.add_argument("--grading", default=None, help="uniform | geometric[:ratio[:endpoint[:per_level]]]")
    if levels:
        sp.add_argument("--levels", type=int, default=None, help="refinement levels (>= 3)")
    if cap:
        sp.add_argument("--cap", type=float, default=None, help="cap on |x^(m)| for the capped class")
    if tolerance:
        sp.add_argument("--tolerance", type=float, default=None, help="relative tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hovar", description="Higher-order variational problem toolkit")
    parser.add_argument("--version", action="version", version=f"hovar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="minimize the functional")
    _common(sp, cap=True)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="integral-form necessary conditions along a trajectory")
    _common(sp, tolerance=True)
    sp.add_argument("trajectory", help="trajectory record (JSON)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("check", help="sampled regularity and existence conditions")
    _common(sp)
    sp.add_argument("--box", default=None, help="jet box file (JSON); defaults to the problem's box")
    sp.add_argument("--conditions", default=None, help="comma-separated ids: " + ",".join(("h2", "h3") + CONDITIONS))
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("gap", help="Lavrentiev gap between free and capped classes")
    _common(sp, levels=True, cap=True, tolerance=True)
    sp.set_defaults(func=cmd_gap)

    sp = sub.add_parser("probe", help="growth of sup|x^(m)| over refinements")
    _common(sp, levels=True)
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("fixtures", help="bundled fixture problems")
    sp.add_argument("action", choices=["list", "export"])
    sp.add_argument("directory", nargs="?", default=None)
    sp.set_defaults(func=cmd_fixtures)

    sp = sub.add_parser("rerun", help="repeat a run from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_rerun)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.command in ("fixtures", "rerun"):
        try:
            return args.func(args, None)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    out = Path(args.out)
    try:
        write_manifest(args, out, argv)
        return args.func(args, out)
    except (InputError, ExprSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
