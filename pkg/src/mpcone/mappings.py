"""The two set-valued sensitivity mappings between the parameter sets.

For a family (A, b, c, M, d, K) the objective-parameter u and the
rhs-parameter v are linked through a common optimality system.  The forward
value at u is the set {M(x* - d)} over optimal x* of the u-instance; the
value at v is {-s*} over optimal M-row multipliers of the v-instance.  Both
sets are convex; we report one witness plus closed extent intervals along
probe directions, obtained by optimizing over an epsilon-relaxed optimal
face.

The *objective parameter domain* is the set of u for which the dual-side
system { exists w : c + M'u - A'w in K } is feasible; the *rhs parameter
domain* is the set of v for which the v-instance is feasible.  Membership is
decided by signed phase-I margins with a tolerance band.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import solver
from .cones import ConeSpec, OrthantBlock, interior_margin
from .errors import BoundaryUndefined, DimensionMismatch, OutsideDomain
from .problem import ProblemData, SolverInstance, assemble_primal, assemble_primal_rhs
from .solver import SolveStatus

__all__ = [
    "DomainStatus",
    "MappingValue",
    "TOL_SINGLETON",
    "EPS_FACE",
    "default_directions",
    "objective_param_status",
    "rhs_param_status",
    "rhs_image",
    "objective_image",
    "face_extent",
    "kkt_residual",
]

TOL_SINGLETON = 1e-4
# Probe tilt for face extents.  The phantom width reported on a true
# singleton scales like 2*delta*|image Jacobian|; 1e-8 keeps that below
# 1e-5 even where the mapping steepens near the domain boundary, while
# staying far above solver termination error (~1e-11).
EPS_FACE = 1e-8
MEMBER_BAND = 1e-6
ATTAIN_CAP = 1e6
# Residual level (relative) accepted for best-effort boundary evaluations.
BOUNDARY_RESID = 1e-5


class DomainStatus(enum.Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    OUTSIDE = "Outside"


@dataclass(frozen=True)
class MappingValue:
    """One witness of the image set plus directional extent intervals."""

    witness: np.ndarray
    directions: tuple[np.ndarray, ...]
    extents: tuple[tuple[float, float], ...]
    singleton: bool
    slater: str  # "Strict" or "Marginal"

    @property
    def max_width(self) -> float:
        widths = [hi - lo for lo, hi in self.extents]
        return max(widths) if widths else 0.0

    def extent_distance(self, point) -> float:
        """Distance from a point to the extent box, measured per direction."""
        point = np.asarray(point, dtype=float)
        worst = 0.0
        for direction, (lo, hi) in zip(self.directions, self.extents):
            t = float(direction @ point)
            if t < lo:
                worst = max(worst, lo - t)
            elif t > hi:
                worst = max(worst, t - hi)
        return worst


def default_directions(r: int) -> tuple[np.ndarray, ...]:
    """Canonical basis, plus both diagonal directions in the planar case."""
    dirs = [np.eye(r)[i] for i in range(r)]
    if r == 2:
        dirs.append(np.array([1.0, 1.0]) / math.sqrt(2.0))
        dirs.append(np.array([1.0, -1.0]) / math.sqrt(2.0))
    return tuple(dirs)


def _as_unit_directions(r: int, directions) -> tuple[np.ndarray, ...]:
    if directions is None:
        return default_directions(r)
    out = []
    for d in directions:
        d = np.asarray(d, dtype=float).ravel()
        if d.shape[0] != r:
            raise DimensionMismatch(f"direction must have length {r}")
        n = np.linalg.norm(d)
        if n == 0.0:
            raise DimensionMismatch("direction must be nonzero")
        out.append(d / n)
    return tuple(out)


# ---------------------------------------------------------------------------
# domain membership
# ---------------------------------------------------------------------------


def objective_param_margins(p: ProblemData, us: np.ndarray) -> np.ndarray:
    """Batched phase-I margins of the dual-side system at each u."""
    us = np.atleast_2d(np.asarray(us, dtype=float))
    g0 = p.c[None, :] + us @ p.M
    out = solver._dual_margin_many(p.A, g0, p.cone)
    margins = out["margin"]
    for i, st in enumerate(out["status"]):
        if st != SolveStatus.OPTIMAL:
            margins[i] = np.nan
    return margins


def rhs_param_margins(p: ProblemData, vs: np.ndarray) -> np.ndarray:
    """Batched phase-I margins of the v-instance feasibility system."""
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    G = np.vstack([p.A, p.M])
    base = np.concatenate([p.b, p.M @ p.d])
    h = base[None, :] + np.hstack([np.zeros((vs.shape[0], p.num_rows)), vs])
    out = solver._phase1_many(G, h, p.cone)
    margins = out["margin"]
    for i, st in enumerate(out["status"]):
        if st != SolveStatus.OPTIMAL:
            margins[i] = np.nan
    return margins


def _classify(margin: float, band: float) -> DomainStatus:
    if math.isnan(margin):
        return DomainStatus.BOUNDARY
    if margin > band:
        return DomainStatus.INTERIOR
    if margin < -band:
        return DomainStatus.OUTSIDE
    return DomainStatus.BOUNDARY


def objective_param_status(p: ProblemData, u, band: float = MEMBER_BAND) -> DomainStatus:
    return _classify(float(objective_param_margins(p, np.atleast_2d(u))[0]), band)


def rhs_param_status(p: ProblemData, v, band: float = MEMBER_BAND) -> DomainStatus:
    return _classify(float(rhs_param_margins(p, np.atleast_2d(v))[0]), band)


# ---------------------------------------------------------------------------
# face probes
# ---------------------------------------------------------------------------


def phi_bases(p: ProblemData, us: np.ndarray):
    """Batched solves of the u-instances (shared rows, varying objective)."""
    us = np.atleast_2d(np.asarray(us, dtype=float))
    g = p.c[None, :] + us @ p.M
    return solver.solve_many(p.A, np.broadcast_to(p.b, (us.shape[0], p.num_rows)), g, p.cone)


def psi_bases(p: ProblemData, vs: np.ndarray):
    """Batched solves of the v-instances (shared objective, varying rhs)."""
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    base = np.concatenate([p.b, p.M @ p.d])
    h = base[None, :] + np.hstack([np.zeros((vs.shape[0], p.num_rows)), vs])
    G = np.vstack([p.A, p.M])
    return solver.solve_many(G, h, np.broadcast_to(p.c, (vs.shape[0], p.cone.dim)), p.cone)


def obj_side_extents(
    p: ProblemData,
    us: np.ndarray,
    directions: Sequence[np.ndarray],
    delta: float = EPS_FACE,
) -> np.ndarray:
    """Directional extents of the forward image at many u points.

    The extreme of <dir, M(x - d)> over the optimal face of the u-instance
    is probed by re-solving at the tilted parameter u +- delta*dir: adding
    delta*M'dir to the objective selects, among optimizers, one minimizing
    <dir, M x>, and moves it only O(delta) past the face.  Returns
    (npoints, ndirs, 2) intervals; unbounded probes give +-inf, failed ones
    NaN.
    """
    us = np.atleast_2d(np.asarray(us, dtype=float))
    npts, ndir = us.shape[0], len(directions)
    dirs = np.stack(directions)  # (ndir, r)
    # Lane layout: (point, direction, sign) with sign +delta probing the low
    # end and -delta the high end.
    tilts = np.stack([dirs, -dirs], axis=1).reshape(1, ndir * 2, -1)
    probe_us = (us[:, None, :] + delta * tilts).reshape(npts * ndir * 2, -1)
    batch = phi_bases(p, probe_us)
    md = p.M @ p.d
    vals = (batch.x @ p.M.T - md[None, :]).reshape(npts, ndir, 2, -1)
    out = np.empty((npts, ndir, 2))
    status = np.array([st.value for st in batch.status]).reshape(npts, ndir, 2)
    for k in range(ndir):
        proj = vals[:, k, :, :] @ dirs[k]
        for j, side in enumerate((0, 1)):  # j=0: +delta tilt -> lower end
            col = proj[:, j]
            st = status[:, k, j]
            col = np.where(st == SolveStatus.OPTIMAL.value, col, np.nan)
            unbounded = st == SolveStatus.DUAL_INFEASIBLE_OR_UNBOUNDED.value
            col = np.where(unbounded, -math.inf if j == 0 else math.inf, col)
            out[:, k, side] = col
    return out


def rhs_side_extents(
    p: ProblemData,
    vs: np.ndarray,
    directions: Sequence[np.ndarray],
    delta: float = EPS_FACE,
) -> np.ndarray:
    """Directional extents of the multiplier image at many v points.

    Tilting the dual objective by delta along -dir is the same as shifting
    the rhs parameter to v - delta*dir, so the face of multipliers is probed
    with plain re-solves at shifted parameters: the multiplier witness of
    v - delta*dir approaches the <dir, .>-maximal point of the image.
    Infeasible probes (the shifted parameter left the domain) report an
    unbounded end, which is the correct limit on the domain boundary.
    """
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    npts, ndir = vs.shape[0], len(directions)
    dirs = np.stack(directions)
    # (point, direction, sign): v - delta*dir probes the high end of <dir, u>.
    tilts = np.stack([-dirs, dirs], axis=1).reshape(1, ndir * 2, -1)
    probe_vs = (vs[:, None, :] + delta * tilts).reshape(npts * ndir * 2, -1)
    batch = psi_bases(p, probe_vs)
    m = p.num_rows
    u_wit = -batch.z[:, m : m + p.num_params].reshape(npts, ndir, 2, -1)
    status = np.array([st.value for st in batch.status]).reshape(npts, ndir, 2)
    out = np.empty((npts, ndir, 2))
    for k in range(ndir):
        proj = u_wit[:, k, :, :] @ dirs[k]
        for j in (0, 1):  # j=0 -> high end, j=1 -> low end
            col = proj[:, j]
            st = status[:, k, j]
            col = np.where(st == SolveStatus.OPTIMAL.value, col, np.nan)
            infeasible = st == SolveStatus.PRIMAL_INFEASIBLE.value
            col = np.where(infeasible, math.inf if j == 0 else -math.inf, col)
            out[:, k, 1 if j == 0 else 0] = col
    return out


def obj_side_extents_boundary(
    p: ProblemData,
    u: np.ndarray,
    p_star: float,
    directions,
    eps: float = 1e-6,
) -> np.ndarray:
    """Forward-image extents at a boundary parameter via the relaxed face.

    At boundary points the optimal face can be unbounded, which the tilt
    probes cannot see, so the face {A x = b, <g_u, x> <= p* + eps, x in K}
    is optimized directly.  Best effort: probes that fail report an
    unbounded end.
    """
    m, q = p.A.shape
    g_u = p.c + p.M.T @ u
    cap = p_star + eps * (1.0 + abs(p_star))
    G = np.zeros((m + 1, q + 1))
    G[:m, :q] = p.A
    G[m, :q] = g_u
    G[m, q] = 1.0
    h = np.concatenate([p.b, [cap]])
    cone2 = p.cone.extend(OrthantBlock(1))
    md = p.M @ p.d
    out = np.empty((len(directions), 2))
    for k, d in enumerate(directions):
        ell = p.M.T @ np.asarray(d, dtype=float)
        for j, sign in enumerate((1.0, -1.0)):
            inst = SolverInstance(
                G=G, h=h, g=np.concatenate([sign * ell, [0.0]]), cone=cone2,
                provenance="FaceProbe",
            )
            sol = solver.solve(inst)
            if sol.status == SolveStatus.OPTIMAL:
                val = sign * 0.5 * (sol.primal_obj + sol.dual_obj) - float(d @ md)
            else:
                val = -math.inf if sign > 0 else math.inf
            out[k, 0 if sign > 0 else 1] = val
    return out


def rhs_side_extents_boundary(
    p: ProblemData,
    v: np.ndarray,
    d_star: float,
    directions,
    eps: float = 1e-6,
) -> np.ndarray:
    """Multiplier-image extents at a boundary rhs parameter.

    sup <dir, u> over multipliers with dual objective >= d* - eps equals,
    by conic duality, the value of

        min <c, x> - tau*sigma
        s.t. A x - b sigma = 0,  M x - (M d + v) sigma = -dir,
             x in K, sigma >= 0.

    Probe infeasibility certifies an unbounded end, the generic situation on
    the domain boundary; other failures are reported as unbounded too (best
    effort).
    """
    m, r = p.num_rows, p.num_params
    q = p.cone.dim
    tau = d_star - eps * (1.0 + abs(d_star))
    hv = p.M @ p.d + v
    G = np.zeros((m + r, q + 1))
    G[:m, :q] = p.A
    G[m:, :q] = p.M
    G[:m, q] = -p.b
    G[m:, q] = -hv
    g = np.concatenate([p.c, [-tau]])
    cone2 = p.cone.extend(OrthantBlock(1))
    out = np.empty((len(directions), 2))
    for k, d in enumerate(directions):
        for j, sign in enumerate((1.0, -1.0)):
            h = np.concatenate([np.zeros(m), -sign * np.asarray(d, dtype=float)])
            inst = SolverInstance(G=G, h=h, g=g, cone=cone2, provenance="FaceProbe")
            sol = solver.solve(inst)
            if sol.status == SolveStatus.OPTIMAL:
                val = sign * 0.5 * (sol.primal_obj + sol.dual_obj)
            else:
                val = math.inf if sign > 0 else -math.inf
            out[k, 1 if sign > 0 else 0] = val
    return out


def face_extent(
    p: ProblemData,
    base: SolverInstance,
    p_star: float,
    ell,
    sense: str,
    eps_face: float = EPS_FACE,
) -> float:
    """Optimize a linear functional over the optimal face of ``base``.

    Implemented by scalarization: re-solve with objective
    g + delta*(+-ell), delta = eps_face * (1 + |p*|) / (1 + |ell|), whose
    optimizer is an ell-extreme point of the face up to O(delta).  This is
    numerically equivalent to probing the eps-relaxed face but stays as
    well-conditioned as the base solve.  Returns +-inf when the face is
    unbounded along ell.
    """
    ell = np.asarray(ell, dtype=float).ravel()
    if ell.shape[0] != p.cone.dim:
        raise DimensionMismatch("functional must have the cone dimension")
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    sign = 1.0 if sense == "min" else -1.0
    delta = eps_face * (1.0 + abs(p_star)) / (1.0 + float(np.linalg.norm(ell)))
    inst = SolverInstance(
        G=base.G,
        h=base.h,
        g=base.g + delta * sign * ell,
        cone=base.cone,
        provenance="FaceProbe",
    )
    sol = solver.solve(inst)
    if sol.status == SolveStatus.OPTIMAL:
        return float(ell @ sol.x)
    if sol.status == SolveStatus.DUAL_INFEASIBLE_OR_UNBOUNDED:
        return -math.inf if sense == "min" else math.inf
    raise BoundaryUndefined(f"face probe failed with status {sol.status.value}")


def _extents_to_intervals(
    row: np.ndarray, witness: np.ndarray, dirs: Sequence[np.ndarray]
) -> tuple[tuple[float, float], ...]:
    """Per-direction [lo, hi], widened to contain the witness projection.

    A failed probe end (NaN) falls back to the witness value: the witness is
    itself a face point, so this stays a valid inner estimate.
    """
    out = []
    for (lo, hi), d in zip(row, dirs):
        t = float(d @ witness)
        lo = t if math.isnan(lo) else min(lo, t)
        hi = t if math.isnan(hi) else max(hi, t)
        out.append((float(lo), float(hi)))
    return tuple(out)


def _is_singleton(extents, tol: float) -> bool:
    return all(math.isfinite(lo) and math.isfinite(hi) and hi - lo <= tol for lo, hi in extents)


# ---------------------------------------------------------------------------
# mapping evaluation
# ---------------------------------------------------------------------------


def rhs_image(
    p: ProblemData,
    u,
    directions=None,
    tol_singleton: float = TOL_SINGLETON,
    eps_face: float = EPS_FACE,
    band: float = MEMBER_BAND,
) -> MappingValue:
    """Image of the objective parameter u in the rhs-parameter set.

    Raises OutsideDomain when u is outside the objective-parameter domain
    and BoundaryUndefined when the optimum is not attained (which can happen
    on the domain boundary).
    """
    u = np.asarray(u, dtype=float).ravel()
    status = objective_param_status(p, u, band)
    if status == DomainStatus.OUTSIDE:
        raise OutsideDomain(f"u={u.tolist()} is outside the objective-parameter domain")
    slater = "Strict" if status == DomainStatus.INTERIOR else "Marginal"

    sol = solver.solve(assemble_primal(p, u))
    if sol.status != SolveStatus.OPTIMAL:
        raise BoundaryUndefined(
            f"optimum not attained at u={u.tolist()} (solver status {sol.status.value})"
        )
    if np.abs(sol.x).max() > ATTAIN_CAP * (1.0 + np.abs(p.d).max()):
        raise BoundaryUndefined(
            f"iterates diverged at u={u.tolist()}: the optimum is not attained"
        )
    witness = p.M @ (sol.x - p.d)
    dirs = _as_unit_directions(p.num_params, directions)
    if slater == "Marginal":
        p_star = 0.5 * (sol.primal_obj + sol.dual_obj)
        ext = obj_side_extents_boundary(p, u, p_star, dirs)
    else:
        ext = obj_side_extents(p, u[None, :], dirs, eps_face)[0]
    extents = _extents_to_intervals(ext, witness, dirs)
    return MappingValue(
        witness=witness,
        directions=dirs,
        extents=extents,
        singleton=_is_singleton(extents, tol_singleton),
        slater=slater,
    )


def objective_image(
    p: ProblemData,
    v,
    directions=None,
    tol_singleton: float = TOL_SINGLETON,
    eps_face: float = EPS_FACE,
    band: float = MEMBER_BAND,
) -> MappingValue:
    """Image of the rhs parameter v in the objective-parameter set."""
    v = np.asarray(v, dtype=float).ravel()
    status = rhs_param_status(p, v, band)
    if status == DomainStatus.OUTSIDE:
        raise OutsideDomain(f"v={v.tolist()} is outside the rhs-parameter domain")
    slater = "Strict" if status == DomainStatus.INTERIOR else "Marginal"

    sol = solver.solve(assemble_primal_rhs(p, v))
    resid_ok = (
        sol.status == SolveStatus.OPTIMAL
        or (
            sol.status == SolveStatus.NUMERICAL_LIMIT
            and slater == "Marginal"
            and sol.residuals[0] <= BOUNDARY_RESID * (1.0 + np.linalg.norm(sol.x))
        )
    )
    if not resid_ok:
        raise BoundaryUndefined(
            f"optimum not attained at v={v.tolist()} (solver status {sol.status.value})"
        )
    witness = -sol.s
    dirs = _as_unit_directions(p.num_params, directions)
    if slater == "Marginal":
        ext = rhs_side_extents_boundary(p, v, sol.primal_obj, dirs)
    else:
        ext = rhs_side_extents(p, v[None, :], dirs, eps_face)[0]
    extents = _extents_to_intervals(ext, witness, dirs)
    return MappingValue(
        witness=witness,
        directions=dirs,
        extents=extents,
        singleton=_is_singleton(extents, tol_singleton),
        slater=slater,
    )


# ---------------------------------------------------------------------------
# optimality residuals
# ---------------------------------------------------------------------------


def kkt_residual(p: ProblemData, u, v, x, w, s, y) -> tuple[float, float, float]:
    """Residual triple of the coupled optimality system at (u, v, x, w, s, y).

    r_P covers the primal rows (A x = b, M x = M d + v, x in K), r_D the
    dual row (A'w + y = c + M'u, y in K) under the multiplier identification
    u = -s, and r_C the complementarity gap <x, y>.
    """
    if u is None:
        if s is None:
            raise DimensionMismatch("either u or the multiplier s must be given")
        u = -np.asarray(s, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    r_p = max(
        float(np.linalg.norm(p.A @ x - p.b)),
        float(np.linalg.norm(p.M @ x - p.M @ p.d - v)),
        max(0.0, -interior_margin(x, p.cone)),
    )
    r_d = max(
        float(np.linalg.norm(p.A.T @ w + y - p.c - p.M.T @ u)),
        max(0.0, -interior_margin(y, p.cone)),
    )
    r_c = abs(float(x @ y))
    return (r_p, r_d, r_c)
