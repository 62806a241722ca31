"""Structural property checkers, runnable on any problem as a test battery.

Each checker samples the relevant parameter set (uniform over a rectangle,
rejecting points that fail interior membership), evaluates the mappings
through the solver, and reports the worst violation it saw.  Verdicts are
deterministic given (problem, seed, sample count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import mappings, solver
from .errors import NotAProjection
from .problem import ProblemData
from .solver import SolveStatus

__all__ = [
    "PropertyVerdict",
    "check_monotonicity",
    "check_inverse",
    "check_complementarity",
    "check_projection",
    "default_rectangle",
]

MONOTONE_TOL = 1e-7
INVERSE_TOL = 1e-5
PROJECTION_TOL = 1e-6
REJECTION_FACTOR = 10


@dataclass(frozen=True)
class PropertyVerdict:
    name: str
    samples_used: int
    samples_skipped: int
    worst_violation: float
    tolerance: float
    witness: Optional[tuple]

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tolerance


def default_rectangle(p: ProblemData, half_width: float = 4.0) -> tuple:
    return tuple((-half_width, half_width) for _ in range(p.num_params))


def _sample_interior(
    p: ProblemData,
    side: str,
    count: int,
    seed: int,
    rect,
) -> np.ndarray:
    """Uniform samples over rect, kept only when interior to the domain."""
    rect = np.asarray(rect, dtype=float)
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    budget = REJECTION_FACTOR * count
    while len(kept) < count and budget > 0:
        take = min(count - len(kept) + 8, budget)
        pts = rng.uniform(rect[:, 0], rect[:, 1], size=(take, p.num_params))
        if side == "d":
            margins = mappings.objective_param_margins(p, pts)
        else:
            margins = mappings.rhs_param_margins(p, pts)
        with np.errstate(invalid="ignore"):
            good = margins > mappings.MEMBER_BAND
        kept.extend(pts[good])
        budget -= take
    return np.array(kept[:count])


def check_monotonicity(
    p: ProblemData,
    pairs: int = 200,
    seed: int = 7,
    rect=None,
) -> PropertyVerdict:
    """Antitone coupling of the two parameters.

    For forward images v_i of sampled u_i, every pair must satisfy
    <u2 - u1, v1 - v2> >= -tol.
    """
    rect = rect or default_rectangle(p)
    us = _sample_interior(p, "d", 2 * pairs, seed, rect)
    batch = mappings.phi_bases(p, us)
    ok = np.array([st == SolveStatus.OPTIMAL for st in batch.status])
    vs = (batch.x - p.d[None, :]) @ p.M.T
    us, vs = us[ok], vs[ok]
    skipped = int((~ok).sum())
    n = us.shape[0] // 2
    min_value = math.inf
    worst_pair = None
    for k in range(n):
        u1, u2 = us[2 * k], us[2 * k + 1]
        v1, v2 = vs[2 * k], vs[2 * k + 1]
        value = float((u2 - u1) @ (v1 - v2))
        if value < min_value:
            min_value = value
            worst_pair = (tuple(u1), tuple(u2))
    return PropertyVerdict(
        name="monotonicity",
        samples_used=2 * n,
        samples_skipped=skipped,
        worst_violation=max(0.0, -min_value) if n else 0.0,
        tolerance=MONOTONE_TOL,
        witness=worst_pair,
    )


def check_inverse(
    p: ProblemData,
    samples: int = 100,
    seed: int = 7,
    rect=None,
) -> PropertyVerdict:
    """Round trip through both mappings returns to the starting parameter.

    For each sampled u with forward witness v, the distance from u to the
    directional extent box of the image of v must stay within tolerance.
    """
    rect = rect or default_rectangle(p)
    us = _sample_interior(p, "d", samples, seed, rect)
    worst = 0.0
    worst_u = None
    used = skipped = 0
    for u in us:
        try:
            fwd = mappings.rhs_image(p, u)
            # Probe at the face-relaxation scale: the extent box and the
            # witness noise both amplify through the mapping slope, so a
            # probe tilt well above the solver floor keeps the box an outer
            # estimate of the image regardless of conditioning.
            back = mappings.objective_image(p, fwd.witness, eps_face=1e-6)
        except Exception:
            skipped += 1
            continue
        used += 1
        dist = back.extent_distance(u)
        if dist > worst:
            worst = dist
            worst_u = tuple(u)
    return PropertyVerdict(
        name="inverse",
        samples_used=used,
        samples_skipped=skipped,
        worst_violation=worst,
        tolerance=INVERSE_TOL,
        witness=worst_u,
    )


def check_complementarity(
    p: ProblemData,
    samples: int = 100,
    seed: int = 7,
    rect=None,
) -> PropertyVerdict:
    """Optimal primal-dual pairs annihilate each other: <x, y> ~ 0."""
    rect = rect or default_rectangle(p)
    us = _sample_interior(p, "d", samples, seed, rect)
    batch = mappings.phi_bases(p, us)
    worst = 0.0
    worst_u = None
    used = skipped = 0
    for i, st in enumerate(batch.status):
        if st != SolveStatus.OPTIMAL:
            skipped += 1
            continue
        used += 1
        gap = abs(float(batch.x[i] @ batch.y[i]))
        rel = gap / (1.0 + abs(float(batch.primal_obj[i])))
        if rel > worst:
            worst = rel
            worst_u = tuple(us[i])
    return PropertyVerdict(
        name="complementarity",
        samples_used=used,
        samples_skipped=skipped,
        worst_violation=worst,
        tolerance=1e-7,
        witness=worst_u,
    )


def check_projection(
    p: ProblemData,
    S,
    samples: int = 50,
    seed: int = 7,
    rect=None,
) -> PropertyVerdict:
    """Parameters confined to a coordinate subspace stay there under the map.

    With the parameter rows M replaced by S M for a symmetric idempotent S,
    an objective parameter u = S u interior to the reduced domain must map
    to witnesses v with S v = v.
    """
    S = np.asarray(S, dtype=float)
    r = p.num_params
    if S.shape != (r, r):
        raise NotAProjection(f"projection must be {r}x{r}")
    if np.abs(S @ S - S).max() > 1e-12 or np.abs(S - S.T).max() > 1e-12:
        raise NotAProjection("matrix is not symmetric idempotent")
    rect = rect or default_rectangle(p)
    rng = np.random.default_rng(seed)
    rect = np.asarray(rect, dtype=float)
    sm = S @ p.M
    worst = 0.0
    worst_u = None
    used = skipped = 0
    tried = 0
    while used < samples and tried < REJECTION_FACTOR * samples:
        tried += 1
        u = S @ rng.uniform(rect[:, 0], rect[:, 1], size=r)
        # Interior membership for the reduced problem (objective c + (SM)'u).
        g0 = p.c + sm.T @ u
        out = solver._dual_margin_many(p.A, g0[None, :], p.cone)
        margin = float(out["margin"][0]) if out["status"][0] == SolveStatus.OPTIMAL else math.nan
        if not (margin > mappings.MEMBER_BAND):
            skipped += 1
            continue
        batch = solver.solve_many(p.A, p.b[None, :], g0[None, :], p.cone)
        if batch.status[0] != SolveStatus.OPTIMAL:
            skipped += 1
            continue
        used += 1
        v = sm @ (batch.x[0] - p.d)
        dev = float(np.linalg.norm(S @ v - v))
        if dev > worst:
            worst = dev
            worst_u = tuple(u)
    return PropertyVerdict(
        name="projection",
        samples_used=used,
        samples_skipped=skipped,
        worst_violation=worst,
        tolerance=PROJECTION_TOL,
        witness=worst_u,
    )
