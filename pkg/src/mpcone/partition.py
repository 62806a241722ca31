"""Grid classification of parameter rectangles into invariancy regions.

Every interior grid point is classified by a round trip through the two
sensitivity mappings: forward-map the point, then map the forward witness
back.  Points whose forward and backward images are both singletons and
whose round trip returns the point are nonlinearity cells; any fat image
marks a linearity-type cell.  A region pass then groups linearity cells by
image agreement and 8-neighborhood adjacency (nonlinearity cells by plain
4-neighborhood), estimates each region's affine dimension from the
principal variance of its member coordinates, and relabels regions that are
not full-dimensional as transition faces.

The classifier sees regions at grid resolution only; symmetric features
(center points, diagonal lines) are found exactly when odd resolutions
sample them, which is why odd resolutions are recommended.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import mappings
from .errors import DimensionMismatch
from .mappings import EPS_FACE, TOL_SINGLETON
from .problem import ProblemData
from .solver import SolveStatus

__all__ = [
    "Side",
    "GridSpec",
    "CellTag",
    "CellClass",
    "Region",
    "PartitionReport",
    "classify_point",
    "classify_grid",
    "vertex_census",
    "refine_check",
    "RefineReport",
]

# When both round-trip images are singletons the inverse relation already
# forces an exact round trip, so this check only guards against solver
# noise; witness errors of ~sqrt(gap) amplified by the mapping slope reach
# a few 1e-5, hence a band two orders above that of the feature scale.
ROUNDTRIP_TOL = 1e-3
IMAGE_MATCH_TOL = 1e-4
DIM_VARIANCE_RATIO = 1e-6
CURVATURE_STEP = 1e-3
CURVATURE_AVERAGES = 3
ATTAIN_CAP = 1e6


class Side(enum.Enum):
    """Which parameter set the grid lives in."""

    RHS = "p"  # rhs-parameter (primal) set
    OBJECTIVE = "d"  # objective-parameter (dual) set


class CellTag(enum.Enum):
    NONLINEARITY = "Nonlinearity"
    LINEARITY = "Linearity"
    TRANSITION_FACE = "TransitionFace"
    BOUNDARY_OR_OUTSIDE = "BoundaryOrOutside"


@dataclass(frozen=True)
class GridSpec:
    side: Side
    rect: tuple[tuple[float, float], ...]
    resolution: int

    def __post_init__(self):
        if self.resolution < 3:
            raise DimensionMismatch("grid resolution must be at least 3")
        for lo, hi in self.rect:
            if not (hi > lo):
                raise DimensionMismatch("grid rectangle must be nondegenerate")

    @property
    def ndim(self) -> int:
        return len(self.rect)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, self.resolution) for lo, hi in self.rect]

    def points(self) -> np.ndarray:
        """All grid points, row-major over the index tuple."""
        axes = self.axes()
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def indices(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(self.resolution)] * self.ndim, indexing="ij")
        return np.stack([m.ravel() for m in grids], axis=1)

    def refined(self, factor: int) -> "GridSpec":
        """Grid with the spacing divided by ``factor``.

        (n-1)*factor + 1 points per axis: the refined lattice contains every
        base point, so symmetric features sampled by the base grid (center
        points, diagonal lines) stay sampled.
        """
        return GridSpec(self.side, self.rect, (self.resolution - 1) * factor + 1)


@dataclass
class CellClass:
    tag: CellTag
    image: Optional[np.ndarray] = None
    image_width: float = math.nan
    roundtrip_gap: float = math.nan
    curvature: float = math.nan
    region_id: int = -1
    face_dim: int = -1
    diagnostic: str = ""


@dataclass
class Region:
    region_id: int
    tag: CellTag
    cells: list[int]
    image: Optional[np.ndarray]
    affine_dim: int

    @property
    def cell_count(self) -> int:
        return len(self.cells)


@dataclass
class PartitionReport:
    grid: GridSpec
    cells: list[CellClass]
    regions: list[Region]
    summary: dict = field(default_factory=dict)

    def count(self, tag: CellTag) -> int:
        return sum(1 for r in self.regions if r.tag == tag)


# ---------------------------------------------------------------------------
# per-chunk classification pipeline (batched stages)
# ---------------------------------------------------------------------------


def _forward(p: ProblemData, side: Side, pts: np.ndarray):
    """Forward base solves: values, image witnesses, ok mask, diagnostics."""
    n = pts.shape[0]
    ok = np.zeros(n, dtype=bool)
    witness = np.full((n, p.num_params), np.nan)
    value = np.full(n, np.nan)
    diags = [""] * n
    if n == 0:
        return ok, witness, value, diags
    if side == Side.OBJECTIVE:
        batch = mappings.phi_bases(p, pts)
        cap = ATTAIN_CAP * (1.0 + np.abs(p.d).max())
        for i, st in enumerate(batch.status):
            if st != SolveStatus.OPTIMAL:
                diags[i] = f"forward solve: {st.value}"
            elif np.abs(batch.x[i]).max() > cap:
                diags[i] = "forward solve: optimum not attained"
            else:
                ok[i] = True
        witness[ok] = (batch.x[ok] - p.d[None, :]) @ p.M.T
    else:
        batch = mappings.psi_bases(p, pts)
        for i, st in enumerate(batch.status):
            if st != SolveStatus.OPTIMAL:
                diags[i] = f"forward solve: {st.value}"
            else:
                ok[i] = True
        m = p.num_rows
        witness[ok] = -batch.z[ok, m : m + p.num_params]
    value[ok] = 0.5 * (batch.primal_obj[ok] + batch.dual_obj[ok])
    return ok, witness, value, diags


def _widths_from_extents(ext: np.ndarray, witnesses: np.ndarray, dirs) -> np.ndarray:
    """Max directional width per point, counting the witness as a face point."""
    n = ext.shape[0]
    widths = np.zeros(n)
    for k, d in enumerate(dirs):
        t = witnesses @ d
        lo = np.fmin(ext[:, k, 0], t)
        hi = np.fmax(ext[:, k, 1], t)
        widths = np.maximum(widths, hi - lo)
    return widths


def _extents(p: ProblemData, side: Side, pts: np.ndarray, dirs, delta: float):
    if side == Side.OBJECTIVE:
        return mappings.obj_side_extents(p, pts, dirs, delta)
    return mappings.rhs_side_extents(p, pts, dirs, delta)


def _member_margins(p: ProblemData, side: Side, pts: np.ndarray) -> np.ndarray:
    if side == Side.OBJECTIVE:
        return mappings.objective_param_margins(p, pts)
    return mappings.rhs_param_margins(p, pts)


def _unique_margins(p: ProblemData, side: Side, pts: np.ndarray) -> np.ndarray:
    """Membership margins with dedup of (rounded) repeated query points."""
    if pts.shape[0] == 0:
        return np.zeros(0)
    keys = np.round(pts, 6)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    margins = _member_margins(p, side, uniq)
    return margins[inverse]


def _curvature(
    p: ProblemData, side: Side, pts: np.ndarray, values: np.ndarray, step: float
) -> np.ndarray:
    """Axis-direction value-function curvature by averaged second differences.

    Second central differences at steps h, 2h, 3h are averaged; the base
    value is reused from the forward solves.  NaN where an offset solve
    fails.
    """
    n, r = pts.shape
    if n == 0:
        return np.zeros(0)
    offsets = []
    for axis in range(r):
        unit = np.zeros(r)
        unit[axis] = 1.0
        for k in range(1, CURVATURE_AVERAGES + 1):
            offsets.append(k * step * unit)
            offsets.append(-k * step * unit)
    offsets = np.stack(offsets)  # (r*2*navg, r)
    probe = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, r)
    if side == Side.OBJECTIVE:
        batch = mappings.phi_bases(p, probe)
    else:
        batch = mappings.psi_bases(p, probe)
    vals = 0.5 * (batch.primal_obj + batch.dual_obj)
    bad = np.array([st != SolveStatus.OPTIMAL for st in batch.status])
    vals[bad] = np.nan
    vals = vals.reshape(n, r, CURVATURE_AVERAGES, 2)
    curv = np.zeros(n)
    for axis in range(r):
        acc = np.zeros(n)
        for k in range(1, CURVATURE_AVERAGES + 1):
            h = k * step
            second = (vals[:, axis, k - 1, 0] + vals[:, axis, k - 1, 1] - 2.0 * values) / h**2
            acc += np.abs(second)
        curv = np.maximum(curv, acc / CURVATURE_AVERAGES)
    return curv


def _classify_chunk(
    p: ProblemData,
    side: Side,
    pts: np.ndarray,
    tol_singleton: float,
    delta: float,
    band: float,
    with_curvature: bool,
) -> list[CellClass]:
    n = pts.shape[0]
    cells = [CellClass(tag=CellTag.BOUNDARY_OR_OUTSIDE) for _ in range(n)]
    dirs = [np.eye(pts.shape[1])[k] for k in range(pts.shape[1])]

    margins = _member_margins(p, side, pts)
    with np.errstate(invalid="ignore"):
        interior = margins > band  # NaN margins compare False
    for i in np.flatnonzero(~interior):
        cells[i].diagnostic = f"membership margin {margins[i]:.3e}"

    idx = np.flatnonzero(interior)
    if idx.size == 0:
        return cells
    ok, witness, value, diags = _forward(p, side, pts[idx])
    for j in np.flatnonzero(~ok):
        cells[idx[j]].diagnostic = diags[j]
    idx = idx[ok]
    witness = witness[ok]
    value = value[ok]
    if idx.size == 0:
        return cells

    ext = _extents(p, side, pts[idx], dirs, delta)
    widths = _widths_from_extents(ext, witness, dirs)
    fwd_singleton = widths <= tol_singleton

    for j, i in enumerate(idx):
        cells[i].image = witness[j]
        cells[i].image_width = float(widths[j])
        cells[i].tag = CellTag.LINEARITY  # refined below

    # Witness membership on the opposite side decides whether a back map can
    # even be a candidate: nonlinearity images lie interior to the image set.
    other = Side.RHS if side == Side.OBJECTIVE else Side.OBJECTIVE
    cand = np.flatnonzero(fwd_singleton)
    if cand.size:
        wit_margins = _unique_margins(p, other, witness[cand])
        with np.errstate(invalid="ignore"):
            cand = cand[wit_margins > band]
    if cand.size:
        back_pts = witness[cand]
        b_ok, b_wit, _, _ = _forward(p, other, back_pts)
        b_ext = _extents(p, other, back_pts, dirs, delta)
        b_widths = _widths_from_extents(b_ext, np.nan_to_num(b_wit), dirs)
        gaps = np.abs(b_wit - pts[idx[cand]]).max(axis=1)
        nonlinear = b_ok & (b_widths <= tol_singleton) & (gaps <= ROUNDTRIP_TOL)
        for j, c in enumerate(cand):
            cells[idx[c]].roundtrip_gap = float(gaps[j])
            if nonlinear[j]:
                cells[idx[c]].tag = CellTag.NONLINEARITY

    if with_curvature:
        curv = _curvature(p, side, pts[idx], value, CURVATURE_STEP)
        for j, i in enumerate(idx):
            cells[i].curvature = float(curv[j])
    return cells


# ---------------------------------------------------------------------------
# region extraction
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _offsets_4(ndim: int) -> list[tuple[int, ...]]:
    return [(1,)] if ndim == 1 else [(0, 1), (1, 0)]


def _offsets_8(ndim: int) -> list[tuple[int, ...]]:
    return [(1,)] if ndim == 1 else [(0, 1), (1, 0), (1, 1), (1, -1)]


def _extract_regions(grid: GridSpec, cells: list[CellClass]) -> list[Region]:
    """Group cells into regions.

    Linearity-type cells join across 8-neighborhoods when their images
    agree; regions that are not full-dimensional are relabeled transition
    faces.  Nonlinearity cells then join across 4-neighborhoods, plus a
    diagonal step when no transition/boundary cell sits between the two
    (nonlinearity wedges can pinch below the grid spacing, but a diagonal
    crossing of a transition line must stay split).
    """
    res = grid.resolution
    ndim = grid.ndim
    n = len(cells)
    pts = grid.points()
    idxs = grid.indices()

    def flat(idx_tuple) -> int:
        out = 0
        for k in idx_tuple:
            out = out * res + k
        return out

    def in_bounds(nb) -> bool:
        return not (np.any(nb < 0) or np.any(nb >= res))

    regions: list[Region] = []

    # Pass 1: linearity-type cells.
    uf = _UnionFind(n)
    for a in range(n):
        if cells[a].tag != CellTag.LINEARITY:
            continue
        for off in _offsets_8(ndim):
            nb = idxs[a] + np.array(off)
            if not in_bounds(nb):
                continue
            b = flat(tuple(nb))
            if cells[b].tag != CellTag.LINEARITY:
                continue
            ia, ib = cells[a].image, cells[b].image
            if ia is None or ib is None or np.abs(ia - ib).max() > IMAGE_MATCH_TOL:
                continue
            uf.union(a, b)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        if cells[a].tag == CellTag.LINEARITY:
            groups.setdefault(uf.find(a), []).append(a)
    lin_groups = sorted(groups.values(), key=lambda ms: ms[0])
    for members in lin_groups:
        dim = _affine_dim(pts[members])
        tag = CellTag.LINEARITY if dim == ndim else CellTag.TRANSITION_FACE
        for a in members:
            cells[a].face_dim = dim
            if tag == CellTag.TRANSITION_FACE:
                cells[a].tag = CellTag.TRANSITION_FACE

    # Pass 2: nonlinearity cells, with transition relabels now visible.
    uf2 = _UnionFind(n)
    blocking = (CellTag.TRANSITION_FACE, CellTag.BOUNDARY_OR_OUTSIDE)
    for a in range(n):
        if cells[a].tag != CellTag.NONLINEARITY:
            continue
        for off in _offsets_8(ndim):
            nb = idxs[a] + np.array(off)
            if not in_bounds(nb):
                continue
            b = flat(tuple(nb))
            if cells[b].tag != CellTag.NONLINEARITY:
                continue
            if ndim == 2 and off[0] != 0 and off[1] != 0:
                c1 = flat((idxs[a][0] + off[0], idxs[a][1]))
                c2 = flat((idxs[a][0], idxs[a][1] + off[1]))
                if cells[c1].tag in blocking or cells[c2].tag in blocking:
                    continue
            uf2.union(a, b)
    groups2: dict[int, list[int]] = {}
    for a in range(n):
        if cells[a].tag == CellTag.NONLINEARITY:
            groups2.setdefault(uf2.find(a), []).append(a)

    all_groups = [(ms, CellTag.LINEARITY) for ms in lin_groups] + [
        (ms, CellTag.NONLINEARITY) for ms in sorted(groups2.values(), key=lambda ms: ms[0])
    ]
    all_groups.sort(key=lambda t: t[0][0])
    for rid, (members, kind) in enumerate(all_groups):
        dim = _affine_dim(pts[members])
        if kind == CellTag.LINEARITY:
            image = np.mean([cells[a].image for a in members], axis=0)
            tag = cells[members[0]].tag  # LINEARITY or relabeled TRANSITION_FACE
        else:
            image, tag = None, CellTag.NONLINEARITY
        regions.append(Region(region_id=rid, tag=tag, cells=members, image=image, affine_dim=dim))
        for a in members:
            cells[a].region_id = rid
            cells[a].face_dim = dim
    return regions


def _affine_dim(coords: np.ndarray) -> int:
    if coords.shape[0] < 2:
        return 0
    centered = coords - coords.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    variances = svals**2
    if variances[0] <= 0.0:
        return 0
    return int(np.count_nonzero(variances / variances[0] > DIM_VARIANCE_RATIO))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def classify_point(
    p: ProblemData,
    side: Side,
    point,
    tol_singleton: float = TOL_SINGLETON,
    delta: float = EPS_FACE,
    band: float = mappings.MEMBER_BAND,
    with_curvature: bool = True,
) -> CellClass:
    """Round-trip classification of a single parameter point.

    The Linearity tag here means "linearity-type"; the split into genuine
    linearity sets and transition faces needs region geometry, which only
    the grid pass can see.
    """
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    return _classify_chunk(p, side, pts, tol_singleton, delta, band, with_curvature)[0]


def classify_grid(
    p: ProblemData,
    grid: GridSpec,
    workers: int = 1,
    tol_singleton: float = TOL_SINGLETON,
    delta: float = EPS_FACE,
    band: float = mappings.MEMBER_BAND,
    with_curvature: bool = True,
) -> PartitionReport:
    """Classify every grid point and extract connected regions."""
    pts = grid.points()
    n = pts.shape[0]
    workers = max(1, int(workers))
    if workers == 1 or n < 64:
        cells = _classify_chunk(p, grid.side, pts, tol_singleton, delta, band, with_curvature)
    else:
        chunks = np.array_split(np.arange(n), workers)
        args = [
            (p, grid.side, pts[c], tol_singleton, delta, band, with_curvature)
            for c in chunks
            if c.size
        ]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_classify_chunk_star, args))
        cells = [cell for part in parts for cell in part]
    regions = _extract_regions(grid, cells)
    summary = _summarize(grid, cells, regions)
    return PartitionReport(grid=grid, cells=cells, regions=regions, summary=summary)


def _classify_chunk_star(args):
    return _classify_chunk(*args)


def _summarize(grid: GridSpec, cells: list[CellClass], regions: list[Region]) -> dict:
    tags = [c.tag for c in cells]
    full_dim = grid.ndim
    nl_regions = [r for r in regions if r.tag == CellTag.NONLINEARITY]
    lin_regions = [r for r in regions if r.tag == CellTag.LINEARITY]
    tf_regions = [r for r in regions if r.tag == CellTag.TRANSITION_FACE]
    # Openness census: nonlinearity cells sitting right next to the
    # outside/boundary band (4-neighborhood).
    res = grid.resolution
    idxs = grid.indices()
    flat = {tuple(ix): k for k, ix in enumerate(map(tuple, idxs))}
    touching = 0
    for a, c in enumerate(cells):
        if c.tag != CellTag.NONLINEARITY:
            continue
        for off in _offsets_4(grid.ndim):
            for sign in (1, -1):
                nb = tuple(idxs[a] + sign * np.array(off))
                if any(k < 0 or k >= res for k in nb):
                    continue
                if cells[flat[nb]].tag == CellTag.BOUNDARY_OR_OUTSIDE:
                    touching += 1
    return {
        "cells_total": len(cells),
        "cells_nonlinearity": sum(1 for t in tags if t == CellTag.NONLINEARITY),
        "cells_linearity": sum(1 for t in tags if t == CellTag.LINEARITY),
        "cells_transition": sum(1 for t in tags if t == CellTag.TRANSITION_FACE),
        "cells_boundary_or_outside": sum(
            1 for t in tags if t == CellTag.BOUNDARY_OR_OUTSIDE
        ),
        "regions_nonlinearity": len(nl_regions),
        "regions_linearity_full_dim": sum(
            1 for r in lin_regions if r.affine_dim == full_dim
        ),
        "regions_transition": len(tf_regions),
        "nonlinearity_cells_touching_outside": touching,
    }


# ---------------------------------------------------------------------------
# vertex census
# ---------------------------------------------------------------------------


@dataclass
class VertexInfo:
    point: np.ndarray  # extreme point of the feasible set (packed vector)
    image: np.ndarray  # its rhs-parameter image
    cluster_size: int
    spread_widths: np.ndarray  # principal widths of the attracted directions


def vertex_census(
    p: ProblemData,
    samples: int = 96,
    seed: int = 7,
    radius: float = 3.0,
    width_tol: float = 1e-2,
    cluster_tol: float = 1e-4,
) -> list[VertexInfo]:
    """Census of vertices of the feasible set by objective sampling.

    Minimizers are collected for ``samples`` objective parameters drawn
    uniformly from the radius-3 sphere and clustered at distance
    ``cluster_tol``.  A cluster is a vertex when its forward image is a
    singleton and the attracted parameter directions span a set whose
    principal widths all exceed ``width_tol`` -- attracted directions are
    preimage members, so their spread probes the normal-cone dimension from
    inside.
    """
    if samples < 10:
        raise DimensionMismatch("vertex census needs at least 10 samples")
    r = p.num_params
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((samples, r))
    norms = np.linalg.norm(raw, axis=1)
    norms[norms == 0.0] = 1.0
    us = radius * raw / norms[:, None]

    batch = mappings.phi_bases(p, us)
    cap = ATTAIN_CAP * (1.0 + np.abs(p.d).max())
    keep = [
        i
        for i, st in enumerate(batch.status)
        if st == SolveStatus.OPTIMAL and np.abs(batch.x[i]).max() <= cap
    ]
    clusters: list[dict] = []
    for i in keep:
        x = batch.x[i]
        for cl in clusters:
            if np.abs(x - cl["rep"]).max() <= cluster_tol:
                cl["members"].append(i)
                break
        else:
            clusters.append({"rep": x, "members": [i]})

    out: list[VertexInfo] = []
    for cl in clusters:
        members = cl["members"]
        if len(members) < 2:
            continue
        dirs_at = us[members]
        centered = dirs_at - dirs_at.mean(axis=0)
        svals = np.linalg.svd(centered, compute_uv=False)
        # Width along each principal direction of the attracted set.
        widths = np.zeros(r)
        widths[: svals.shape[0]] = 2.0 * svals / math.sqrt(len(members))
        if np.any(widths < width_tol):
            continue
        rep_u = us[members[0]]
        ext = mappings.obj_side_extents(p, rep_u[None, :], mappings.default_directions(r))
        image = (cl["rep"] - p.d) @ p.M.T
        w = _widths_from_extents(ext, image[None, :], mappings.default_directions(r))
        if w[0] > TOL_SINGLETON:
            continue
        out.append(
            VertexInfo(
                point=cl["rep"],
                image=image,
                cluster_size=len(members),
                spread_widths=widths,
            )
        )
    return out


# ---------------------------------------------------------------------------
# refinement stability
# ---------------------------------------------------------------------------


@dataclass
class RefineReport:
    base: PartitionReport
    refined: PartitionReport
    deltas: dict
    stable: bool


def refine_check(p: ProblemData, grid: GridSpec, factor: int = 2, workers: int = 1) -> RefineReport:
    """Re-classify at ``factor`` times the resolution and compare counts.

    Stability requires the full-dimensional region counts (nonlinearity and
    full-dimensional linearity) to be unchanged.  Curvature is skipped on
    both passes: only counts matter here.
    """
    if factor < 2:
        raise DimensionMismatch("refinement factor must be at least 2")
    base = classify_grid(p, grid, workers=workers, with_curvature=False)
    fine = classify_grid(p, grid.refined(factor), workers=workers, with_curvature=False)
    keys = ("regions_nonlinearity", "regions_linearity_full_dim", "regions_transition")
    deltas = {k: fine.summary[k] - base.summary[k] for k in keys}
    stable = (
        deltas["regions_nonlinearity"] == 0 and deltas["regions_linearity_full_dim"] == 0
    )
    return RefineReport(base=base, refined=fine, deltas=deltas, stable=stable)
