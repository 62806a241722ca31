"""Dense primal-dual interior-point solver for cone programs.

Solves min <g, x> s.t. G x = h, x in K with K a product of orthant and PSD
blocks, by infeasible-start path following with Nesterov-Todd scaling and a
Mehrotra predictor-corrector step.  The implementation is vectorized over a
batch axis: a single call advances any number of instances that share the
cone and the (p, q) shape, which is what makes grid classification cheap on
one core.  Batch lanes are independent; results do not depend on how
instances are grouped.

Starting point is the canonical interior point (ones / identity blocks) with
zero multipliers, so runs are deterministic.  Infeasibility is diagnosed
from approximate Farkas certificates carried by diverging iterates; when no
certificate emerges and the iterate stalls, the best iterate so far is
returned with status NUMERICAL_LIMIT.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .cones import ConeSpec, OrthantBlock, PsdBlock, _svec_projection, _unvec_operator
from .errors import DimensionMismatch, SolverFailure
from .problem import SolverInstance

__all__ = [
    "SolveStatus",
    "ConicSolution",
    "BatchSolution",
    "solve",
    "solve_many",
    "phase1",
    "Phase1Result",
    "feasibility_margin",
    "dual_feasibility_margin",
]

MAX_ITER = 100
STEP_FRACTION = 0.98
CENTERING_EXPONENT = 3
TARGET_TOL = 1e-12
STALL_LIMIT = 10
BLOWUP_LIMIT = 1e14
CERT_TOL = 1e-9
PHASE1_CAP = 16.0

# Status thresholds (the solution contract).
FEAS_TOL = 1e-8
GAP_TOL = 1e-7


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE_OR_UNBOUNDED = "DualInfeasibleOrUnbounded"
    NUMERICAL_LIMIT = "NumericalLimit"


# ---------------------------------------------------------------------------
# cone tables
# ---------------------------------------------------------------------------


class _BlockOps:
    def __init__(self, block, sl: slice):
        self.block = block
        self.sl = sl
        self.is_psd = isinstance(block, PsdBlock)
        if self.is_psd:
            n = block.order
            self.order = n
            self.P = _svec_projection(n)  # svec = P @ vec
            self.U = _unvec_operator(n)  # vec = svec @ U

    def smat(self, v: np.ndarray) -> np.ndarray:
        n = self.order
        return (v @ self.U).reshape(*v.shape[:-1], n, n)

    def svec(self, m: np.ndarray) -> np.ndarray:
        n = self.order
        return m.reshape(*m.shape[:-2], n * n) @ self.P.T


class _ConeOps:
    def __init__(self, cone: ConeSpec):
        self.cone = cone
        self.dim = cone.dim
        self.degree = cone.barrier_degree
        self.e = cone.identity()
        self.blocks = [_BlockOps(b, sl) for b, sl in cone.iter_slices()]


@lru_cache(maxsize=None)
def _cone_ops(cone: ConeSpec) -> _ConeOps:
    return _ConeOps(cone)


def _margin_batch(ops: _ConeOps, x: np.ndarray) -> np.ndarray:
    """Interior margin per batch lane (min component / min eigenvalue)."""
    out = np.full(x.shape[0], np.inf)
    for blk in ops.blocks:
        if blk.is_psd:
            vals = np.linalg.eigvalsh(blk.smat(x[:, blk.sl]))
            out = np.minimum(out, vals[:, 0])
        else:
            out = np.minimum(out, x[:, blk.sl].min(axis=1))
    return out


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class BatchSolution:
    """Array-of-struct view over a batch of solves (lane i = instance i)."""

    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    status: list[SolveStatus]
    primal_obj: np.ndarray
    dual_obj: np.ndarray
    res_primal: np.ndarray
    res_dual: np.ndarray
    res_gap: np.ndarray
    iterations: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass
class ConicSolution:
    """Primal-dual witness of one solve.

    ``z`` stacks all equality multipliers; ``w`` and ``s`` are the split
    into A-row and M-row multipliers when the instance carries M rows.
    """

    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    w: np.ndarray
    s: Optional[np.ndarray]
    status: SolveStatus
    primal_obj: float
    dual_obj: float
    residuals: tuple[float, float, float]
    iterations: int

    @property
    def gap(self) -> float:
        return self.residuals[2]


def _extract(batch: BatchSolution, i: int, m_rows: Optional[slice]) -> ConicSolution:
    z = batch.z[i]
    if m_rows is None:
        w, s = z.copy(), None
    else:
        mask = np.ones(z.shape[0], dtype=bool)
        mask[m_rows] = False
        w, s = z[mask], z[m_rows].copy()
    return ConicSolution(
        x=batch.x[i],
        z=z,
        y=batch.y[i],
        w=w,
        s=s,
        status=batch.status[i],
        primal_obj=float(batch.primal_obj[i]),
        dual_obj=float(batch.dual_obj[i]),
        residuals=(
            float(batch.res_primal[i]),
            float(batch.res_dual[i]),
            float(batch.res_gap[i]),
        ),
        iterations=int(batch.iterations[i]),
    )


# ---------------------------------------------------------------------------
# core iteration
# ---------------------------------------------------------------------------


def _nt_state(ops: _ConeOps, x: np.ndarray, y: np.ndarray):
    """Per-block NT scaling data for the current iterates."""
    state = []
    for blk in ops.blocks:
        if not blk.is_psd:
            xb, yb = x[:, blk.sl], y[:, blk.sl]
            w = np.sqrt(xb / yb)
            state.append({"w": w, "lam": np.sqrt(xb * yb)})
            continue
        n = blk.order
        X = blk.smat(x[:, blk.sl])
        Y = blk.smat(y[:, blk.sl])
        xvals, xvecs = np.linalg.eigh(X)
        yvals, yvecs = np.linalg.eigh(Y)
        xvals = np.maximum(xvals, 1e-16 * np.maximum(xvals[:, -1:], 1e-300))
        yvals = np.maximum(yvals, 1e-16 * np.maximum(yvals[:, -1:], 1e-300))
        fx = xvecs * np.sqrt(xvals)[:, None, :]  # F_x F_x' = X
        fy = yvecs * np.sqrt(yvals)[:, None, :]
        fx_inv = np.sqrt(1.0 / xvals)[:, :, None] * np.swapaxes(xvecs, 1, 2)
        fy_inv = np.sqrt(1.0 / yvals)[:, :, None] * np.swapaxes(yvecs, 1, 2)
        mm = np.swapaxes(fy, 1, 2) @ fx
        uu, ss, vh = np.linalg.svd(mm)
        ss = np.maximum(ss, 1e-300)
        r = (fx @ np.swapaxes(vh, 1, 2)) / np.sqrt(ss)[:, None, :]
        r_inv = (np.swapaxes(uu, 1, 2) @ np.swapaxes(fy, 1, 2)) / np.sqrt(ss)[:, :, None]
        # T_r: svec(R S R') = T_r @ svec(S); its transpose plays R'.
        kron = np.einsum("bik,bjl->bijkl", r, r).reshape(-1, n * n, n * n)
        t_r = blk.P @ kron @ blk.P.T
        kron_i = np.einsum("bik,bjl->bijkl", r_inv, r_inv).reshape(-1, n * n, n * n)
        t_ri = blk.P @ kron_i @ blk.P.T
        state.append(
            {"lam": ss, "t_r": t_r, "t_ri": t_ri, "fx_inv": fx_inv, "fy_inv": fy_inv}
        )
    return state


def _build_h(ops: _ConeOps, state) -> np.ndarray:
    b = state[0]["lam"].shape[0] if state else 0
    H = np.zeros((b, ops.dim, ops.dim))
    for blk, st in zip(ops.blocks, state):
        if blk.is_psd:
            H[:, blk.sl, blk.sl] = st["t_r"] @ np.swapaxes(st["t_r"], 1, 2)
        else:
            idx = np.arange(blk.sl.start, blk.sl.stop)
            H[:, idx, idx] = st["w"] ** 2
    return H


def _max_step(ops: _ConeOps, state, dv: np.ndarray, which: str, v: np.ndarray) -> np.ndarray:
    """Largest alpha with v + alpha*dv staying in the cone (per lane)."""
    alpha = np.full(dv.shape[0], np.inf)
    for blk, st in zip(ops.blocks, state):
        if blk.is_psd:
            f_inv = st["fx_inv"] if which == "x" else st["fy_inv"]
            a = f_inv @ blk.smat(dv[:, blk.sl]) @ np.swapaxes(f_inv, 1, 2)
            low = np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, 1, 2)))[:, 0]
            with np.errstate(divide="ignore"):
                alpha = np.minimum(alpha, np.where(low < 0.0, -1.0 / low, np.inf))
        else:
            vb, db = v[:, blk.sl], dv[:, blk.sl]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(db < 0.0, -vb / db, np.inf)
            alpha = np.minimum(alpha, ratio.min(axis=1))
    return alpha


def _newton(G, H, GH, schur, rp, rd, rc):
    """Solve the reduced Newton system for (dx, dz, dy).

    Eliminating dx = rc - H dy and dy = rd - G'dz leaves
    (G H G') dz = rp - G rc + G H rd.
    """
    ghrd = np.einsum("bpq,bq->bp", GH, rd)
    grc = np.einsum("bpq,bq->bp", G, rc)
    rhs = rp - grc + ghrd
    if schur.shape[1]:
        dz = _solve_lanes(schur, rhs)
        resid = rhs - np.einsum("bpq,bq->bp", schur, dz)
        dz = dz + _solve_lanes(schur, resid)
    else:
        dz = np.zeros_like(rhs)
    dy = rd - np.einsum("bpq,bp->bq", G, dz)
    dx = rc - np.einsum("bpq,bq->bp", H, dy)
    return dx, dz, dy


def _solve_lanes(mats: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched linear solve; singular lanes fall back to least squares."""
    try:
        return np.linalg.solve(mats, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(rhs)
        for i in range(mats.shape[0]):
            try:
                out[i] = np.linalg.solve(mats[i], rhs[i])
            except np.linalg.LinAlgError:
                out[i] = np.linalg.lstsq(mats[i], rhs[i], rcond=None)[0]
        return out


def _corrector_rhs(ops, state, x, y, dx_aff, dy_aff, sigma_mu):
    rc = np.empty_like(x)
    for blk, st in zip(ops.blocks, state):
        if blk.is_psd:
            lam = st["lam"]
            dxs = np.einsum("bij,bj->bi", st["t_ri"], dx_aff[:, blk.sl])
            dys = np.einsum("bji,bj->bi", st["t_r"], dy_aff[:, blk.sl])
            a = blk.smat(dxs)
            c = blk.smat(dys)
            prod = 0.5 * (a @ c + c @ a)
            denom = 0.5 * (lam[:, :, None] + lam[:, None, :])
            core = -prod / denom
            diag = sigma_mu[:, None] / lam - lam
            idx = np.arange(blk.order)
            core[:, idx, idx] += diag
            rc[:, blk.sl] = np.einsum("bij,bj->bi", st["t_r"], blk.svec(core))
        else:
            xb, yb = x[:, blk.sl], y[:, blk.sl]
            rc[:, blk.sl] = (
                sigma_mu[:, None] / yb - xb - dx_aff[:, blk.sl] * dy_aff[:, blk.sl] / yb
            )
    return rc


def _solve_core(G: np.ndarray, h: np.ndarray, g: np.ndarray, cone: ConeSpec, max_iter: int):
    """Batched Mehrotra predictor-corrector; returns per-lane arrays."""
    ops = _cone_ops(cone)
    B, p, q = G.shape
    e = ops.e
    nu = float(ops.degree)

    x = np.tile(e, (B, 1))
    y = np.tile(e, (B, 1))
    z = np.zeros((B, p))

    h_scale = 1.0 + np.linalg.norm(h, axis=1)
    g_scale = 1.0 + np.linalg.norm(g, axis=1)

    best = {
        "x": x.copy(),
        "y": y.copy(),
        "z": z.copy(),
        "score": np.full(B, np.inf),
        "iter": np.zeros(B, dtype=int),
    }
    reason = np.zeros(B, dtype=np.int8)  # 0 open, 1 converged, 2 pinf, 3 dinf, 4 limit
    stall = np.zeros(B, dtype=int)
    act = np.arange(B)

    for it in range(max_iter):
        Ga, ha, ga = G[act], h[act], g[act]
        xa, ya, za = x[act], y[act], z[act]

        rp = ha - np.einsum("bpq,bq->bp", Ga, xa)
        rd = ga - np.einsum("bpq,bp->bq", Ga, za) - ya
        gap = np.einsum("bq,bq->b", xa, ya)
        pobj = np.einsum("bq,bq->b", ga, xa)
        dobj = np.einsum("bp,bp->b", ha, za)

        rp_n = np.linalg.norm(rp, axis=1)
        rd_n = np.linalg.norm(rd, axis=1)
        obj_scale = 1.0 + np.abs(pobj) + np.abs(dobj)
        score = np.maximum.reduce(
            [rp_n / h_scale[act], rd_n / g_scale[act], np.abs(gap) / obj_scale]
        )

        finite = np.isfinite(score)
        improved = finite & (score < best["score"][act])
        if improved.any():
            ids = act[improved]
            best["x"][ids] = xa[improved]
            best["y"][ids] = ya[improved]
            best["z"][ids] = za[improved]
            best["score"][ids] = score[improved]
            best["iter"][ids] = it
        stall[act] = np.where(improved, 0, stall[act] + 1)

        close = np.zeros(act.shape[0], dtype=np.int8)
        close[finite & (score <= TARGET_TOL)] = 1
        # Good enough and no longer improving: stop polishing.
        close[finite & (best["score"][act] <= 100.0 * TARGET_TOL) & (stall[act] >= 3)] = 1

        # Farkas-style certificates carried by diverging iterates:
        # primal infeasibility from (z, y) with G'z + y ~ 0, h'z > 0;
        # dual infeasibility from x in K with G x ~ 0, <g, x> < 0.
        with np.errstate(divide="ignore", invalid="ignore"):
            hz = dobj
            gzy = np.linalg.norm(ga - rd, axis=1)  # = |G'z + y|
            p_cert = (hz > 0) & (gzy * h_scale[act] <= CERT_TOL * hz)
            gx = pobj
            gxn = np.linalg.norm(np.einsum("bpq,bq->bp", Ga, xa), axis=1)
            d_cert = (gx < 0) & (gxn * g_scale[act] <= CERT_TOL * (-gx))
        close[(close == 0) & p_cert] = 2
        close[(close == 0) & d_cert] = 3

        blown = (~finite) | (np.abs(xa).max(axis=1) > BLOWUP_LIMIT) | (
            np.abs(ya).max(axis=1) > BLOWUP_LIMIT
        ) | (np.abs(za).max(axis=1) > BLOWUP_LIMIT)
        close[(close == 0) & blown] = 4
        close[(close == 0) & (stall[act] >= STALL_LIMIT)] = 4
        if it == max_iter - 1:
            close[close == 0] = 4

        if close.any():
            done = act[close > 0]
            reason[done] = close[close > 0]
            keep = close == 0
            act = act[keep]
            if act.size == 0:
                break
            Ga, ha, ga = Ga[keep], ha[keep], ga[keep]
            xa, ya, za = xa[keep], ya[keep], za[keep]
            rp, rd = rp[keep], rd[keep]
            gap, pobj, dobj = gap[keep], pobj[keep], dobj[keep]

        mu = gap / nu
        state = _nt_state(ops, xa, ya)
        H = _build_h(ops, state)
        GH = Ga @ H
        schur = GH @ Ga.transpose(0, 2, 1)

        try:
            dx_a, dz_a, dy_a = _newton(Ga, H, GH, schur, rp, rd, -xa)
        except np.linalg.LinAlgError:
            # A singular Schur complement ends the batch; affected lanes
            # keep their best iterate.
            reason[act] = np.int8(4)
            break

        ap = np.minimum(1.0, STEP_FRACTION * _max_step(ops, state, dx_a, "x", xa))
        ad = np.minimum(1.0, STEP_FRACTION * _max_step(ops, state, dy_a, "y", ya))
        gap_aff = np.einsum("bq,bq->b", xa + ap[:, None] * dx_a, ya + ad[:, None] * dy_a)
        gap_aff = np.maximum(gap_aff, 0.0)
        ratio = np.clip(gap_aff / np.maximum(gap, 1e-300), 0.0, 1.0)
        sigma = ratio**CENTERING_EXPONENT

        rc = _corrector_rhs(ops, state, xa, ya, dx_a, dy_a, sigma * mu)
        try:
            dx, dz, dy = _newton(Ga, H, GH, schur, rp, rd, rc)
        except np.linalg.LinAlgError:
            reason[act] = np.int8(4)
            break

        ap = np.minimum(1.0, STEP_FRACTION * _max_step(ops, state, dx, "x", xa))
        ad = np.minimum(1.0, STEP_FRACTION * _max_step(ops, state, dy, "y", ya))

        tiny = (ap < 1e-10) & (ad < 1e-10)
        if tiny.any():
            reason[act[tiny]] = np.int8(4)

        x[act] = xa + ap[:, None] * dx
        z[act] = za + ad[:, None] * dz
        y[act] = ya + ad[:, None] * dy

        if tiny.any():
            act = act[~tiny]
            if act.size == 0:
                break

    return best, reason


def _finalize(G, h, g, cone, best, reason, m_rows, max_iter) -> BatchSolution:
    B = G.shape[0]
    x, y, z = best["x"], best["y"], best["z"]
    rp = np.linalg.norm(h - np.einsum("bpq,bq->bp", G, x), axis=1)
    rd = np.linalg.norm(g - np.einsum("bpq,bp->bq", G, z) - y, axis=1)
    gap = np.abs(np.einsum("bq,bq->b", x, y))
    pobj = np.einsum("bq,bq->b", g, x)
    dobj = np.einsum("bp,bp->b", h, z)

    h_scale = 1.0 + np.linalg.norm(h, axis=1)
    g_scale = 1.0 + np.linalg.norm(g, axis=1)
    obj_scale = 1.0 + np.abs(pobj)
    ok = (
        (rp <= FEAS_TOL * h_scale)
        & (rd <= FEAS_TOL * g_scale)
        & (gap <= GAP_TOL * obj_scale)
        & (np.abs(pobj - dobj) <= GAP_TOL * obj_scale)
    )

    status: list[SolveStatus] = []
    for i in range(B):
        if reason[i] == 2:
            status.append(SolveStatus.PRIMAL_INFEASIBLE)
        elif reason[i] == 3:
            status.append(SolveStatus.DUAL_INFEASIBLE_OR_UNBOUNDED)
        elif ok[i]:
            status.append(SolveStatus.OPTIMAL)
        else:
            status.append(SolveStatus.NUMERICAL_LIMIT)
    return BatchSolution(
        x=x,
        z=z,
        y=y,
        status=status,
        primal_obj=pobj,
        dual_obj=dobj,
        res_primal=rp,
        res_dual=rd,
        res_gap=gap,
        iterations=best["iter"],
    )


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def solve_many(
    G: np.ndarray,
    h: np.ndarray,
    g: np.ndarray,
    cone: ConeSpec,
    m_rows: Optional[slice] = None,
    max_iter: int = MAX_ITER,
) -> BatchSolution:
    """Solve a batch of same-shape instances; lane i is instance i.

    G may be (p, q) shared across lanes or (B, p, q); h is (B, p) and g is
    (B, q).  All lanes must have full row rank G (the instance builders in
    this package guarantee it).
    """
    h = np.atleast_2d(np.asarray(h, dtype=float))
    g = np.atleast_2d(np.asarray(g, dtype=float))
    B = max(h.shape[0], g.shape[0])
    if h.shape[0] == 1 and B > 1:
        h = np.broadcast_to(h, (B, h.shape[1])).copy()
    if g.shape[0] == 1 and B > 1:
        g = np.broadcast_to(g, (B, g.shape[1])).copy()
    G = np.asarray(G, dtype=float)
    if G.ndim == 2:
        G = np.broadcast_to(G, (B,) + G.shape).copy()
    if G.shape[0] != B or h.shape[0] != B or g.shape[0] != B:
        raise DimensionMismatch("batch sizes of G, h, g disagree")
    if g.shape[1] != cone.dim or G.shape[2] != cone.dim or G.shape[1] != h.shape[1]:
        raise DimensionMismatch("instance shapes are inconsistent with the cone")
    best, reason = _solve_core(G, h, g, cone, max_iter)
    return _finalize(G, h, g, cone, best, reason, m_rows, max_iter)


def _reduce_rows(G: np.ndarray, h: np.ndarray, tol: float = 1e-9):
    """Select independent rows; detect linear inconsistency of the rest."""
    p = G.shape[0]
    if p == 0:
        return np.arange(0), False
    r = scipy.linalg.qr(G.T, mode="r", pivoting=True)
    rmat, piv = r[0], r[1]
    diag = np.abs(np.diag(rmat))
    if diag.size == 0 or diag.max() == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(diag > tol * diag.max()))
    keep = np.sort(piv[:rank])
    if rank == p:
        return keep, False
    # Dependent rows: check h for consistency with the kept rows.
    gk, hk = G[keep], h[keep]
    for i in np.setdiff1d(np.arange(p), keep):
        coef, *_ = np.linalg.lstsq(gk.T, G[i], rcond=None)
        if abs(h[i] - coef @ hk) > 1e-8 * (1.0 + np.abs(h).max()):
            return keep, True
    return keep, False


def solve(instance: SolverInstance, max_iter: int = MAX_ITER) -> ConicSolution:
    """Solve one instance, reducing redundant rows first if necessary."""
    G, h, g = instance.G, instance.h, instance.g
    keep, inconsistent = _reduce_rows(G, h)
    if inconsistent:
        p, q = G.shape
        return ConicSolution(
            x=np.zeros(q),
            z=np.zeros(p),
            y=np.zeros(q),
            w=np.zeros(p),
            s=None,
            status=SolveStatus.PRIMAL_INFEASIBLE,
            primal_obj=math.nan,
            dual_obj=math.nan,
            residuals=(math.inf, math.inf, math.inf),
            iterations=0,
        )
    if keep.shape[0] != G.shape[0]:
        batch = solve_many(G[keep], h[keep][None, :], g[None, :], instance.cone,
                           max_iter=max_iter)
        sol = _extract(batch, 0, None)
        z = np.zeros(G.shape[0])
        z[keep] = sol.z
        sol.z = z
        if instance.m_rows is None:
            sol.w, sol.s = z.copy(), None
        else:
            mask = np.ones(z.shape[0], dtype=bool)
            mask[instance.m_rows] = False
            sol.w, sol.s = z[mask], z[instance.m_rows].copy()
        return sol
    batch = solve_many(G, h[None, :], g[None, :], instance.cone, max_iter=max_iter)
    return _extract(batch, 0, instance.m_rows)


def solve_batch(instances: Sequence[SolverInstance], max_iter: int = MAX_ITER) -> list[ConicSolution]:
    """Solve instances sharing one shape/cone in a single batched run."""
    if not instances:
        return []
    cone = instances[0].cone
    G = np.stack([inst.G for inst in instances])
    h = np.stack([inst.h for inst in instances])
    g = np.stack([inst.g for inst in instances])
    batch = solve_many(G, h, g, cone, max_iter=max_iter)
    return [_extract(batch, i, inst.m_rows) for i, inst in enumerate(instances)]


# ---------------------------------------------------------------------------
# phase I feasibility probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Phase1Result:
    feasible: Optional[bool]  # None when the margin sits in the tolerance band
    margin: float
    witness: Optional[np.ndarray]
    status: SolveStatus


def phase1(
    G,
    h,
    cone: ConeSpec,
    band: float = 1e-6,
    cap: float = PHASE1_CAP,
    max_iter: int = MAX_ITER,
) -> Phase1Result:
    """Signed strict-feasibility margin of {G x = h, x in K}.

    Maximizes t with x - t*e in K via the shift t = cap - s0, s0 >= 0, which
    keeps the lifted program feasible for every input.  Margins are clamped
    at ``cap``; the sign is what callers classify on.
    """
    base = _phase1_many(np.asarray(G, dtype=float), np.atleast_2d(h), cone, cap, max_iter)
    margin = float(base["margin"][0])
    status = base["status"][0]
    witness = base["witness"][0]
    if status not in (SolveStatus.OPTIMAL,):
        return Phase1Result(feasible=None, margin=margin, witness=None, status=status)
    feasible: Optional[bool]
    if margin > band:
        feasible = True
    elif margin < -band:
        feasible = False
    else:
        feasible = None
    return Phase1Result(feasible=feasible, margin=margin, witness=witness, status=status)


def _phase1_many(G, h_batch, cone: ConeSpec, cap: float = PHASE1_CAP, max_iter: int = MAX_ITER):
    """Batched phase-I margins for a shared G and many right-hand sides."""
    e = cone.identity()
    Ge = G @ e
    q = cone.dim
    G2 = np.hstack([G, -Ge[:, None]])
    cone2 = cone.extend(OrthantBlock(1))
    g2 = np.zeros(q + 1)
    g2[-1] = 1.0
    h2 = h_batch - cap * Ge[None, :]
    batch = solve_many(G2, h2, g2[None, :], cone2, max_iter=max_iter)
    margins = cap - 0.5 * (batch.primal_obj + batch.dual_obj)
    witnesses = batch.x[:, :q] + margins[:, None] * e[None, :]
    return {
        "margin": margins,
        "witness": witnesses,
        "status": batch.status,
        "multipliers": batch.z,
    }


def feasibility_margin(G, h, cone: ConeSpec) -> tuple[float, Optional[np.ndarray]]:
    """Convenience wrapper: margin and strictly feasible witness (or None)."""
    res = phase1(G, h, cone)
    if res.status != SolveStatus.OPTIMAL:
        raise SolverFailure(f"phase-I probe ended with status {res.status.value}")
    return res.margin, res.witness


def _dual_margin_many(A, g0_batch, cone: ConeSpec, max_iter: int = MAX_ITER):
    """Batched margins of {exists w : g0 - A'w - t e in K}, sup over t.

    Solves min <g0, x> over {A x = 0, <e, x> = 1, x in K}, whose dual reads
    max t s.t. A'w + t e + y = g0.  When e lies in the row space of A the
    primal is linearly inconsistent and the margin is +inf (w can push the
    slack arbitrarily deep into the cone).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    g0_batch = np.atleast_2d(np.asarray(g0_batch, dtype=float))
    B = g0_batch.shape[0]
    e = cone.identity()
    if A.shape[0]:
        coef, residual, *_ = np.linalg.lstsq(A.T, e, rcond=None)
        resid = np.linalg.norm(A.T @ coef - e)
    else:
        resid = np.linalg.norm(e)
    if resid <= 1e-9 * (1.0 + np.linalg.norm(e)):
        return {
            "margin": np.full(B, np.inf),
            "status": [SolveStatus.OPTIMAL] * B,
            "multipliers": None,
        }
    G = np.vstack([A, e[None, :]])
    h = np.zeros(G.shape[0])
    h[-1] = 1.0
    batch = solve_many(G, h[None, :], g0_batch, cone, max_iter=max_iter)
    margins = np.empty(B)
    statuses: list[SolveStatus] = []
    for i, st in enumerate(batch.status):
        if st == SolveStatus.PRIMAL_INFEASIBLE:
            margins[i] = np.inf
            statuses.append(SolveStatus.OPTIMAL)
        elif st == SolveStatus.OPTIMAL:
            margins[i] = 0.5 * (batch.primal_obj[i] + batch.dual_obj[i])
            statuses.append(st)
        else:
            margins[i] = np.nan
            statuses.append(st)
    return {"margin": margins, "status": statuses, "multipliers": batch.z}


def dual_feasibility_margin(A, g0, cone: ConeSpec) -> float:
    """Margin of the dual-side feasibility system at one objective vector."""
    out = _dual_margin_many(A, np.atleast_2d(g0), cone)
    if out["status"][0] != SolveStatus.OPTIMAL:
        raise SolverFailure(f"dual phase-I probe ended with {out['status'][0].value}")
    return float(out["margin"][0])
