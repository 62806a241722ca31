"""Problem data for the multiparametric conic family and instance assembly.

The family is

    min <c, x>  s.t.  A x = b,  x in K            (objective perturbed by u)
    min <c, x>  s.t.  A x = b,  M x = M d + v,  x in K   (rhs perturbed by v)

with K a product of orthant and PSD blocks.  ``assemble_primal`` builds the
u-instance (objective c + M'u), ``assemble_primal_rhs`` the v-instance whose
equality multipliers split into w (A rows) and s (M rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .cones import ConeSpec
from .errors import DimensionMismatch, RankDeficient

__all__ = [
    "ProblemData",
    "SolverInstance",
    "ValidationReport",
    "validate",
    "assemble_primal",
    "assemble_primal_rhs",
]

RANK_TOL = 1e-9


@dataclass(frozen=True)
class ProblemData:
    """Fixed data (A, b, c, M, d, K) of one problem family."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    M: np.ndarray
    d: np.ndarray
    cone: ConeSpec
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "M", np.atleast_2d(np.asarray(self.M, dtype=float)))
        for attr in ("b", "c", "d"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float).ravel())
        q = self.cone.dim
        if self.A.shape[1] != q:
            raise DimensionMismatch(f"A has {self.A.shape[1]} columns, cone dimension is {q}")
        if self.M.shape[1] != q:
            raise DimensionMismatch(f"M has {self.M.shape[1]} columns, cone dimension is {q}")
        if self.b.shape[0] != self.A.shape[0]:
            raise DimensionMismatch("b length does not match the row count of A")
        if self.c.shape[0] != q or self.d.shape[0] != q:
            raise DimensionMismatch("c and d must have the cone dimension")
        for name in ("A", "b", "c", "M", "d"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DimensionMismatch(f"{name} contains non-finite entries")

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def num_params(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class SolverInstance:
    """One concrete conic program: min <g, x> s.t. G x = h, x in K.

    ``m_rows`` marks the rows of G that came from M, so the corresponding
    equality multipliers can be reported as the parameter multiplier s.
    """

    G: np.ndarray
    h: np.ndarray
    g: np.ndarray
    cone: ConeSpec
    provenance: str = ""
    m_rows: Optional[slice] = None

    def __post_init__(self):
        object.__setattr__(self, "G", np.atleast_2d(np.asarray(self.G, dtype=float)))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float).ravel())
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float).ravel())
        if self.G.shape != (self.h.shape[0], self.g.shape[0]):
            raise DimensionMismatch("instance shapes are inconsistent")
        if self.g.shape[0] != self.cone.dim:
            raise DimensionMismatch("objective length must equal the cone dimension")


@dataclass(frozen=True)
class ValidationReport:
    rank_a: int
    rank_m: int
    rank_stacked: int
    primal_slater: str  # Strict | Marginal | Fails
    dual_slater: str
    primal_margin: float
    dual_margin: float
    d_satisfies_rows: bool  # whether A d = b (warning only when False)
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return self.primal_slater == "Strict" and self.dual_slater == "Strict"


def validate(p: ProblemData, slater_tol: float = 1e-6) -> ValidationReport:
    """Check the standing full-rank and strict-feasibility assumptions.

    Rank failures raise RankDeficient; Slater status is reported per side
    (the dual side is probed at u = 0).  ``A d != b`` only produces a
    warning, since d is just a reference point for the rhs perturbation.
    """
    m, r = p.num_rows, p.num_params
    rank_a = linalg.rank(p.A, RANK_TOL)
    rank_m = linalg.rank(p.M, RANK_TOL)
    stacked = np.vstack([p.A, p.M])
    rank_stacked = linalg.rank(stacked, RANK_TOL)
    if rank_a != m:
        raise RankDeficient("A", f"A has rank {rank_a}, expected full row rank {m}")
    if rank_m != r:
        raise RankDeficient("M", f"M has rank {rank_m}, expected full row rank {r}")
    if rank_stacked != m + r:
        raise RankDeficient(
            "stacked",
            f"[A; M] has rank {rank_stacked} < {m + r}: the row spaces of A and M overlap",
        )

    from . import solver  # local import to avoid a cycle

    primal_margin, _ = solver.feasibility_margin(p.A, p.b, p.cone)
    dual_margin = solver.dual_feasibility_margin(p.A, p.c, p.cone)

    def classify(margin: float) -> str:
        if margin > slater_tol:
            return "Strict"
        if margin < -slater_tol:
            return "Fails"
        return "Marginal"

    warnings = []
    d_ok = bool(np.linalg.norm(p.A @ p.d - p.b) <= 1e-9 * (1.0 + np.linalg.norm(p.b)))
    if not d_ok:
        warnings.append("A d != b: the rhs reference point is not feasible for the A rows")
    return ValidationReport(
        rank_a=rank_a,
        rank_m=rank_m,
        rank_stacked=rank_stacked,
        primal_slater=classify(primal_margin),
        dual_slater=classify(dual_margin),
        primal_margin=primal_margin,
        dual_margin=dual_margin,
        d_satisfies_rows=d_ok,
        warnings=tuple(warnings),
    )


def assemble_primal(p: ProblemData, u) -> SolverInstance:
    """Instance of min <c + M'u, x> s.t. A x = b, x in K."""
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != p.num_params:
        raise DimensionMismatch(f"u must have length {p.num_params}")
    if not np.all(np.isfinite(u)):
        raise DimensionMismatch("u must be finite")
    return SolverInstance(
        G=p.A,
        h=p.b,
        g=p.c + p.M.T @ u,
        cone=p.cone,
        provenance="P_of_u",
    )


def assemble_primal_rhs(p: ProblemData, v) -> SolverInstance:
    """Instance of min <c, x> s.t. A x = b, M x = M d + v, x in K."""
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != p.num_params:
        raise DimensionMismatch(f"v must have length {p.num_params}")
    if not np.all(np.isfinite(v)):
        raise DimensionMismatch("v must be finite")
    m = p.num_rows
    return SolverInstance(
        G=np.vstack([p.A, p.M]),
        h=np.concatenate([p.b, p.M @ p.d + v]),
        g=p.c,
        cone=p.cone,
        provenance="D_of_v",
        m_rows=slice(m, m + p.num_params),
    )
