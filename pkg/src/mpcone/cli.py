"""Command-line interface: problem files, reports, CSV and SVG emission.

Problem file format (versioned, JSON):

    {
      "format": 1,
      "name": "elliptope",
      "cone": [{"kind": "psd", "size": 3}],        // or "orthant"
      "A": [[...], ...],   // m x q, packed coordinates
      "b": [...],          // m
      "c": [...],          // q
      "M": [[...], ...],   // r x q
      "d": [...],          // q
      "notes": "optional free text"
    }

Packed coordinates: an orthant block of length n contributes n plain
entries; a PSD block of order n contributes n(n+1)/2 entries listing the
upper triangle row by row with off-diagonal entries multiplied by sqrt(2)
(so the Euclidean inner product of packed vectors equals the trace inner
product of the matrices).  Numbers are written with 17 significant digits.

Exit codes: 0 success / all pass; 1 parse, validation or I/O error;
2 infeasible, unbounded or outside-domain; 3 numerical limit; 4 property
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import mappings, partition, properties
from .cones import ConeSpec, OrthantBlock, PsdBlock
from .errors import BoundaryUndefined, MpconeError, OutsideDomain
from .problem import ProblemData, assemble_primal, assemble_primal_rhs, validate
from .solver import SolveStatus, solve

SCHEMA_PREFIX = "mpcone"
SCHEMA_VERSION = 1

CLASS_COLORS = {
    partition.CellTag.NONLINEARITY: "#1f77b4",  # blue
    partition.CellTag.LINEARITY: "#ff7f0e",  # orange
    partition.CellTag.TRANSITION_FACE: "#000000",  # black
    partition.CellTag.BOUNDARY_OR_OUTSIDE: "#7f7f7f",  # gray
}


class ProblemFileError(MpconeError, ValueError):
    """Problem file failed to parse; the message names the offending field."""


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def parse_problem(doc: dict, origin: str = "<problem>") -> ProblemData:
    """Build ProblemData from a parsed problem-file document."""

    def fail(field: str, msg: str):
        raise ProblemFileError(f"{origin}: field '{field}': {msg}")

    if not isinstance(doc, dict):
        raise ProblemFileError(f"{origin}: document must be a JSON object")
    if doc.get("format") != 1:
        fail("format", f"unsupported format {doc.get('format')!r}, expected 1")
    blocks = []
    cone_spec = doc.get("cone")
    if not isinstance(cone_spec, list) or not cone_spec:
        fail("cone", "expected a non-empty list of blocks")
    for i, blk in enumerate(cone_spec):
        kind = blk.get("kind") if isinstance(blk, dict) else None
        size = blk.get("size") if isinstance(blk, dict) else None
        if kind not in ("orthant", "psd"):
            fail(f"cone[{i}].kind", f"expected 'orthant' or 'psd', got {kind!r}")
        if not isinstance(size, int) or size < 1:
            fail(f"cone[{i}].size", "expected a positive integer")
        blocks.append(OrthantBlock(size) if kind == "orthant" else PsdBlock(size))
    cone = ConeSpec(tuple(blocks))

    def matrix(field: str, cols: int) -> np.ndarray:
        raw = doc.get(field)
        if not isinstance(raw, list) or not all(isinstance(row, list) for row in raw):
            fail(field, "expected a list of numeric rows")
        try:
            arr = np.array(raw, dtype=float)
        except (TypeError, ValueError):
            fail(field, "entries must be numbers")
        if arr.ndim != 2 or arr.shape[1] != cols:
            fail(field, f"expected shape (*, {cols}), got {arr.shape}")
        return arr

    def vector(field: str, length: int | None = None) -> np.ndarray:
        raw = doc.get(field)
        if not isinstance(raw, list):
            fail(field, "expected a numeric list")
        try:
            arr = np.array(raw, dtype=float)
        except (TypeError, ValueError):
            fail(field, "entries must be numbers")
        if arr.ndim != 1 or (length is not None and arr.shape[0] != length):
            fail(field, f"expected a vector of length {length}, got shape {arr.shape}")
        return arr

    q = cone.dim
    a = matrix("A", q)
    b = vector("b", a.shape[0])
    c = vector("c", q)
    m = matrix("M", q)
    d = vector("d", q)
    name = doc.get("name", "")
    if not isinstance(name, str):
        fail("name", "expected a string")
    try:
        return ProblemData(A=a, b=b, c=c, M=m, d=d, cone=cone, name=name)
    except MpconeError as exc:
        raise ProblemFileError(f"{origin}: {exc}") from exc


def load_problem(path: str) -> ProblemData:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemFileError(f"{path}: cannot read file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    return parse_problem(doc, origin=path)


def problem_document(p: ProblemData, notes: str = "") -> dict:
    blocks = [
        {"kind": "orthant" if isinstance(blk, OrthantBlock) else "psd",
         "size": blk.size if isinstance(blk, OrthantBlock) else blk.order}
        for blk in p.cone.blocks
    ]
    doc = {
        "format": 1,
        "name": p.name,
        "cone": blocks,
        "A": [[float(_fmt(x)) for x in row] for row in p.A],
        "b": [float(_fmt(x)) for x in p.b],
        "c": [float(_fmt(x)) for x in p.c],
        "M": [[float(_fmt(x)) for x in row] for row in p.M],
        "d": [float(_fmt(x)) for x in p.d],
    }
    if notes:
        doc["notes"] = notes
    return doc


def save_problem(p: ProblemData, path: str, notes: str = ""):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_document(p, notes), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _parse_point(text: str, r: int, what: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise ProblemFileError(f"cannot parse {what} {text!r}")
    if len(vals) != r:
        raise ProblemFileError(f"{what} must have {r} components, got {len(vals)}")
    return np.array(vals)


def _emit(obj: dict, as_json: bool, lines: list[str]):
    if as_json:
        print(json.dumps(obj, indent=1, sort_keys=True))
    else:
        print("\n".join(lines))


def _num(x) -> float | None:
    x = float(x)
    return None if math.isnan(x) else x


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    p = load_problem(args.problem)
    if (args.u is None) == (args.v is None):
        print("error: exactly one of --u or --v is required", file=sys.stderr)
        return 1
    if args.u is not None:
        point = _parse_point(args.u, p.num_params, "--u")
        inst = assemble_primal(p, point)
    else:
        point = _parse_point(args.v, p.num_params, "--v")
        inst = assemble_primal_rhs(p, point)
    sol = solve(inst)
    rp, rd, gap = sol.residuals
    doc = {
        "schema": f"{SCHEMA_PREFIX}.solve/{SCHEMA_VERSION}",
        "problem": p.name,
        "parameter": point.tolist(),
        "form": "objective" if args.u is not None else "rhs",
        "status": sol.status.value,
        "objective": _num(sol.primal_obj),
        "dual_objective": _num(sol.dual_obj),
        "residuals": {"primal": _num(rp), "dual": _num(rd), "gap": _num(gap)},
        "iterations": sol.iterations,
        "x": sol.x.tolist(),
        "multipliers": sol.z.tolist(),
    }
    lines = [
        f"problem:    {p.name or args.problem}",
        f"status:     {sol.status.value}",
        f"objective:  {sol.primal_obj:.12g}   (dual {sol.dual_obj:.12g})",
        f"residuals:  primal {rp:.3e}  dual {rd:.3e}  gap {gap:.3e}",
        f"iterations: {sol.iterations}",
    ]
    _emit(doc, args.json, lines)
    if sol.status == SolveStatus.OPTIMAL:
        return 0
    if sol.status == SolveStatus.NUMERICAL_LIMIT:
        return 3
    return 2


def cmd_map(args) -> int:
    p = load_problem(args.problem)
    point = _parse_point(args.point, p.num_params, "--point")
    kwargs = {}
    if args.tol_singleton is not None:
        kwargs["tol_singleton"] = args.tol_singleton
    if args.eps_face is not None:
        kwargs["eps_face"] = args.eps_face
    try:
        if args.side == "d":
            mv = mappings.rhs_image(p, point, **kwargs)
        else:
            mv = mappings.objective_image(p, point, **kwargs)
    except (OutsideDomain, BoundaryUndefined) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    doc = {
        "schema": f"{SCHEMA_PREFIX}.map/{SCHEMA_VERSION}",
        "problem": p.name,
        "side": args.side,
        "point": point.tolist(),
        "witness": mv.witness.tolist(),
        "directions": [d.tolist() for d in mv.directions],
        "extents": [[_num(lo), _num(hi)] for lo, hi in mv.extents],
        "singleton": mv.singleton,
        "slater": mv.slater,
    }
    lines = [
        f"witness:   {np.array2string(mv.witness, precision=10)}",
        f"singleton: {mv.singleton}",
        f"slater:    {mv.slater}",
        "extents:",
    ]
    for d, (lo, hi) in zip(mv.directions, mv.extents):
        lines.append(f"  dir {np.array2string(d, precision=6):24s} [{lo:.10g}, {hi:.10g}]")
    _emit(doc, args.json, lines)
    return 0


def _partition_csv(report: partition.PartitionReport) -> str:
    grid = report.grid
    r = grid.ndim
    header = (
        ["index_i", "index_j"]
        + [f"coord_{k+1}" for k in range(r)]
        + ["class_tag", "region_id", "face_dim"]
        + [f"image_{k+1}" for k in range(r)]
        + ["extent_width_max", "curvature"]
    )
    rows = [",".join(header)]
    pts = grid.points()
    idxs = grid.indices()
    for k, cell in enumerate(report.cells):
        ij = [str(idxs[k][0]), str(idxs[k][1]) if r > 1 else "0"]
        coords = [_fmt(x) for x in pts[k]]
        image = (
            [_fmt(x) for x in cell.image]
            if cell.image is not None
            else ["nan"] * r
        )
        rows.append(
            ",".join(
                ij
                + coords
                + [cell.tag.value, str(cell.region_id), str(cell.face_dim)]
                + image
                + [_fmt(cell.image_width), _fmt(cell.curvature)]
            )
        )
    return "\n".join(rows) + "\n"


def _partition_svg(report: partition.PartitionReport, cell_px: int = 12) -> str:
    grid = report.grid
    res = grid.resolution
    width = res * cell_px
    height = res * cell_px + 26
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    idxs = grid.indices()
    for k, cell in enumerate(report.cells):
        i = int(idxs[k][0])
        j = int(idxs[k][1]) if grid.ndim > 1 else 0
        color = CLASS_COLORS[cell.tag]
        # coord_1 on the x axis, coord_2 up.
        x = i * cell_px
        y = (res - 1 - j) * cell_px
        parts.append(
            f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" fill="{color}"/>'
        )
    legend = " ".join(
        f"{tag.value}={color}" for tag, color in CLASS_COLORS.items()
    )
    parts.append(
        f'<text x="2" y="{height - 8}" font-size="10" font-family="monospace">{legend}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_partition(args) -> int:
    p = load_problem(args.problem)
    r = p.num_params
    nums = [float(t) for t in args.grid.split(",") if t.strip()]
    if len(nums) != 2 * r:
        print(f"error: --grid needs {2*r} numbers for this problem", file=sys.stderr)
        return 1
    rect = tuple((nums[2 * k], nums[2 * k + 1]) for k in range(r))
    side = partition.Side.RHS if args.side == "p" else partition.Side.OBJECTIVE
    try:
        grid = partition.GridSpec(side, rect, args.res)
        report = partition.classify_grid(
            p,
            grid,
            workers=args.workers,
            tol_singleton=args.tol_singleton or mappings.TOL_SINGLETON,
            delta=args.eps_face or mappings.EPS_FACE,
            with_curvature=not args.no_curvature,
        )
    except MpconeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv_text = _partition_csv(report)
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(csv_text)
        if args.svg:
            with open(args.svg, "w", encoding="utf-8") as fh:
                fh.write(_partition_svg(report))
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    doc = {
        "schema": f"{SCHEMA_PREFIX}.partition/{SCHEMA_VERSION}",
        "problem": p.name,
        "side": args.side,
        "resolution": args.res,
        "rect": [list(iv) for iv in rect],
        "summary": report.summary,
        "regions": [
            {
                "id": reg.region_id,
                "tag": reg.tag.value,
                "cells": reg.cell_count,
                "affine_dim": reg.affine_dim,
                "image": None if reg.image is None else reg.image.tolist(),
            }
            for reg in report.regions
        ],
    }
    lines = [f"{k}: {v}" for k, v in report.summary.items()]
    if not args.out:
        lines.append("(no --out given; CSV not written)")
    _emit(doc, args.json, lines)
    return 0


def cmd_verify(args) -> int:
    p = load_problem(args.problem)
    rect = None
    if args.rect:
        nums = [float(t) for t in args.rect.split(",") if t.strip()]
        if len(nums) != 2 * p.num_params:
            print("error: --rect has the wrong arity", file=sys.stderr)
            return 1
        rect = tuple((nums[2 * k], nums[2 * k + 1]) for k in range(p.num_params))
    wanted = args.checks.split(",") if args.checks else [
        "monotonicity", "inverse", "complementarity", "projection",
    ]
    verdicts = []
    for name in wanted:
        name = name.strip()
        if name == "monotonicity":
            verdicts.append(
                properties.check_monotonicity(p, pairs=args.samples, seed=args.seed, rect=rect)
            )
        elif name == "inverse":
            verdicts.append(
                properties.check_inverse(p, samples=args.samples, seed=args.seed, rect=rect)
            )
        elif name == "complementarity":
            verdicts.append(
                properties.check_complementarity(p, samples=args.samples, seed=args.seed, rect=rect)
            )
        elif name == "projection":
            S = np.zeros((p.num_params, p.num_params))
            S[0, 0] = 1.0
            verdicts.append(
                properties.check_projection(p, S, samples=max(10, args.samples // 2),
                                            seed=args.seed, rect=rect)
            )
        else:
            print(f"error: unknown property {name!r}", file=sys.stderr)
            return 1
    doc = {
        "schema": f"{SCHEMA_PREFIX}.verify/{SCHEMA_VERSION}",
        "problem": p.name,
        "seed": args.seed,
        "verdicts": [
            {
                "name": v.name,
                "samples": v.samples_used,
                "skipped": v.samples_skipped,
                "worst_violation": _num(v.worst_violation),
                "tolerance": v.tolerance,
                "pass": v.passed,
            }
            for v in verdicts
        ],
    }
    lines = [f"{'property':16s} {'samples':>8s} {'worst':>12s} {'tol':>8s}  pass"]
    for v in verdicts:
        lines.append(
            f"{v.name:16s} {v.samples_used:8d} {v.worst_violation:12.3e} "
            f"{v.tolerance:8.0e}  {v.passed}"
        )
    _emit(doc, args.json, lines)
    return 0 if all(v.passed for v in verdicts) else 4


def cmd_report(args) -> int:
    p = load_problem(args.problem)
    rep = validate(p)
    doc = {
        "schema": f"{SCHEMA_PREFIX}.report/{SCHEMA_VERSION}",
        "problem": p.name,
        "rows": int(p.num_rows),
        "params": int(p.num_params),
        "cone_dim": int(p.cone.dim),
        "rank_a": rep.rank_a,
        "rank_m": rep.rank_m,
        "rank_stacked": rep.rank_stacked,
        "primal_slater": rep.primal_slater,
        "dual_slater": rep.dual_slater,
        "primal_margin": _num(rep.primal_margin),
        "dual_margin": None if math.isinf(rep.dual_margin) else _num(rep.dual_margin),
        "d_satisfies_rows": rep.d_satisfies_rows,
        "warnings": list(rep.warnings),
    }
    lines = [
        f"problem:      {p.name or args.problem}",
        f"sizes:        {p.num_rows} rows, {p.num_params} parameters, cone dim {p.cone.dim}",
        f"ranks:        A={rep.rank_a}  M={rep.rank_m}  stacked={rep.rank_stacked}",
        f"slater:       primal {rep.primal_slater} (margin {rep.primal_margin:.6g}), "
        f"dual {rep.dual_slater} (margin {rep.dual_margin:.6g})",
    ]
    for w in rep.warnings:
        lines.append(f"warning:      {w}")
    _emit(doc, args.json, lines)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mpcone",
        description="Multiparametric conic optimization: solves, mappings, partitions.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one instance at a parameter value")
    sp.add_argument("problem")
    sp.add_argument("--u", help="objective parameter, comma separated")
    sp.add_argument("--v", help="rhs parameter, comma separated")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_solve)

    mp = sub.add_parser("map", help="evaluate a sensitivity mapping at a point")
    mp.add_argument("problem")
    mp.add_argument("--side", choices=("p", "d"), required=True,
                    help="p: rhs parameter, d: objective parameter")
    mp.add_argument("--point", required=True)
    mp.add_argument("--tol-singleton", type=float, default=None)
    mp.add_argument("--eps-face", type=float, default=None)
    mp.add_argument("--json", action="store_true")
    mp.set_defaults(func=cmd_map)

    pp = sub.add_parser("partition", help="classify a parameter grid")
    pp.add_argument("problem")
    pp.add_argument("--side", choices=("p", "d"), required=True)
    pp.add_argument("--grid", required=True, help="x0,x1,y0,y1 rectangle")
    pp.add_argument("--res", type=int, required=True)
    pp.add_argument("--out", help="CSV output path")
    pp.add_argument("--svg", help="SVG output path")
    pp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    pp.add_argument("--tol-singleton", type=float, default=None)
    pp.add_argument("--eps-face", type=float, default=None)
    pp.add_argument("--no-curvature", action="store_true")
    pp.add_argument("--json", action="store_true")
    pp.set_defaults(func=cmd_partition)

    vp = sub.add_parser("verify", help="run the structural property battery")
    vp.add_argument("problem")
    vp.add_argument("--checks", help="comma list: monotonicity,inverse,complementarity,projection")
    vp.add_argument("--seed", type=int, default=7)
    vp.add_argument("--samples", type=int, default=100)
    vp.add_argument("--rect", help="sampling rectangle, x0,x1,y0,y1")
    vp.add_argument("--json", action="store_true")
    vp.set_defaults(func=cmd_verify)

    rp = sub.add_parser("report", help="validate a problem file")
    rp.add_argument("problem")
    rp.add_argument("--json", action="store_true")
    rp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MpconeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
