"""Self-dual cone products: nonnegative orthants and PSD blocks.

A symmetric matrix block of order n is stored as a vector of length
n(n+1)/2 listing the upper triangle row by row, with off-diagonal entries
scaled by sqrt(2).  Under that convention the Euclidean inner product of two
vectorized blocks equals the trace inner product of the matrices, so
complementarity tests carry over exactly.  Orthant blocks pass through
unchanged.  The product cone is self-dual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Union

import numpy as np

from .errors import DimensionMismatch, NotInterior

__all__ = [
    "OrthantBlock",
    "PsdBlock",
    "ConeSpec",
    "ConeInterval",
    "NtScaling",
    "sym_to_vec",
    "vec_to_sym",
    "to_svec",
    "from_svec",
    "interior_margin",
    "cone_interval",
    "nt_scaling",
]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class OrthantBlock:
    size: int

    @property
    def vec_dim(self) -> int:
        return self.size


@dataclass(frozen=True)
class PsdBlock:
    order: int

    @property
    def vec_dim(self) -> int:
        return self.order * (self.order + 1) // 2


Block = Union[OrthantBlock, PsdBlock]


@lru_cache(maxsize=None)
def _svec_projection(order: int) -> np.ndarray:
    """Matrix P with svec(X) = P @ vec(X); rows are orthonormal."""
    dim = order * (order + 1) // 2
    p = np.zeros((dim, order * order))
    row = 0
    for i in range(order):
        for j in range(i, order):
            if i == j:
                p[row, i * order + j] = 1.0
            else:
                p[row, i * order + j] = SQRT2 / 2.0
                p[row, j * order + i] = SQRT2 / 2.0
            row += 1
    return p


def sym_to_vec(x: np.ndarray) -> np.ndarray:
    """Vectorize one symmetric matrix (or a batch, leading axes untouched)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if x.shape[-2] != n:
        raise DimensionMismatch("symmetric block must be square")
    p = _svec_projection(n)
    return x.reshape(*x.shape[:-2], n * n) @ p.T


def vec_to_sym(v: np.ndarray, order: int) -> np.ndarray:
    """Inverse of :func:`sym_to_vec` for a given block order (batch-aware)."""
    v = np.asarray(v, dtype=float)
    dim = order * (order + 1) // 2
    if v.shape[-1] != dim:
        raise DimensionMismatch(f"expected vector length {dim}, got {v.shape[-1]}")
    return (v @ _unvec_operator(order)).reshape(*v.shape[:-1], order, order)


@lru_cache(maxsize=None)
def _unvec_operator(order: int) -> np.ndarray:
    """Matrix U with vec(X) = svec(X) @ U for symmetric X."""
    dim = order * (order + 1) // 2
    u = np.zeros((dim, order * order))
    row = 0
    for i in range(order):
        for j in range(i, order):
            if i == j:
                u[row, i * order + j] = 1.0
            else:
                u[row, i * order + j] = 1.0 / SQRT2
                u[row, j * order + i] = 1.0 / SQRT2
            row += 1
    return u


@dataclass(frozen=True)
class ConeSpec:
    """Ordered product of orthant and PSD blocks."""

    blocks: tuple[Block, ...]

    def __post_init__(self):
        if not all(isinstance(b, (OrthantBlock, PsdBlock)) for b in self.blocks):
            raise DimensionMismatch("cone blocks must be OrthantBlock or PsdBlock")
        for b in self.blocks:
            size = b.size if isinstance(b, OrthantBlock) else b.order
            if size < 1:
                raise DimensionMismatch("every cone block must have size >= 1")

    @cached_property
    def dim(self) -> int:
        return sum(b.vec_dim for b in self.blocks)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, at = [], 0
        for b in self.blocks:
            out.append(at)
            at += b.vec_dim
        return tuple(out)

    @cached_property
    def barrier_degree(self) -> int:
        return sum(b.size if isinstance(b, OrthantBlock) else b.order for b in self.blocks)

    def iter_slices(self) -> Iterable[tuple[Block, slice]]:
        for b, at in zip(self.blocks, self.offsets):
            yield b, slice(at, at + b.vec_dim)

    def identity(self) -> np.ndarray:
        """Canonical interior point: all-ones orthants, identity PSD blocks."""
        e = np.zeros(self.dim)
        for b, sl in self.iter_slices():
            if isinstance(b, OrthantBlock):
                e[sl] = 1.0
            else:
                e[sl] = sym_to_vec(np.eye(b.order))
        return e

    def extend(self, extra: Block) -> "ConeSpec":
        return ConeSpec(self.blocks + (extra,))


def _check_dim(x: np.ndarray, cone: ConeSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != cone.dim:
        raise DimensionMismatch(f"vector length {x.shape[-1]} != cone dimension {cone.dim}")
    return x


def to_svec(parts, cone: ConeSpec) -> np.ndarray:
    """Pack per-block data (vectors / symmetric matrices) into one vector."""
    parts = list(parts)
    if len(parts) != len(cone.blocks):
        raise DimensionMismatch(f"expected {len(cone.blocks)} blocks, got {len(parts)}")
    out = np.zeros(cone.dim)
    for part, (b, sl) in zip(parts, cone.iter_slices()):
        arr = np.asarray(part, dtype=float)
        if isinstance(b, OrthantBlock):
            if arr.shape != (b.size,):
                raise DimensionMismatch(f"orthant block expects shape ({b.size},)")
            out[sl] = arr
        else:
            if arr.shape != (b.order, b.order):
                raise DimensionMismatch(f"psd block expects shape ({b.order},{b.order})")
            if float(np.abs(arr - arr.T).max()) > 1e-12 * max(1.0, float(np.abs(arr).max())):
                raise DimensionMismatch("psd block data must be symmetric")
            out[sl] = sym_to_vec(arr)
    return out


def from_svec(x, cone: ConeSpec) -> list[np.ndarray]:
    """Unpack a packed vector into per-block vectors / symmetric matrices."""
    x = _check_dim(x, cone)
    parts: list[np.ndarray] = []
    for b, sl in cone.iter_slices():
        if isinstance(b, OrthantBlock):
            parts.append(x[sl].copy())
        else:
            parts.append(vec_to_sym(x[sl], b.order))
    return parts


def interior_margin(x, cone: ConeSpec) -> float:
    """Signed distance proxy: min component / min eigenvalue over blocks.

    Positive iff x is in the cone interior; >= -tol iff x is (numerically)
    in the cone.
    """
    x = _check_dim(x, cone)
    margin = math.inf
    for b, sl in cone.iter_slices():
        if isinstance(b, OrthantBlock):
            margin = min(margin, float(x[sl].min()))
        else:
            margin = min(margin, float(np.linalg.eigvalsh(vec_to_sym(x[sl], b.order))[0]))
    return margin


@dataclass(frozen=True)
class ConeInterval:
    """The open set {lam : c + lam*a interior to the cone}, an interval.

    ``empty`` marks the empty case (lower/upper are NaN then).  Attained
    flags report whether the boundary point at a finite end still belongs to
    the closed cone, which holds whenever the margin crosses zero
    continuously.
    """

    lower: float
    upper: float
    lower_attained: bool = False
    upper_attained: bool = False
    empty: bool = False

    def contains(self, lam: float) -> bool:
        return (not self.empty) and self.lower < lam < self.upper

    @property
    def width(self) -> float:
        return 0.0 if self.empty else self.upper - self.lower


def _bisect_edge(f, inside: float, outside: float, tol: float) -> float:
    lo, hi = inside, outside
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cone_interval(
    c,
    a,
    cone: ConeSpec,
    tol: float = 1e-9,
    search_bound: float = 1e6,
) -> ConeInterval:
    """Locate the interval of lam with c + lam*a in the cone interior.

    The margin lam -> interior_margin(c + lam*a) is concave (min of affine
    functions and smallest eigenvalues), so a ternary search finds a point
    inside the interval if one exists within [-search_bound, search_bound],
    and each finite endpoint is the unique zero crossing on its side, found
    by bisection to absolute tolerance ``tol``.
    """
    c = _check_dim(c, cone)
    a = _check_dim(a, cone)

    def f(lam: float) -> float:
        return interior_margin(c + lam * a, cone)

    # Seed: try 0 first (the common "c interior" case), then ternary search.
    seed = None
    if f(0.0) > 0.0:
        seed = 0.0
    else:
        lo, hi = -search_bound, search_bound
        for _ in range(200):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            f1, f2 = f(m1), f(m2)
            if f1 > 0.0:
                seed = m1
                break
            if f2 > 0.0:
                seed = m2
                break
            if f1 < f2:
                lo = m1
            elif f1 > f2:
                hi = m2
            else:
                lo, hi = m1, m2
            if hi - lo < 1e-13 * search_bound:
                break
    if seed is None:
        return ConeInterval(math.nan, math.nan, empty=True)

    scale_a = 1.0 + float(np.abs(a).max())
    ends = []
    for direction in (+1.0, -1.0):
        ray = direction * a
        if interior_margin(ray, cone) >= -1e-12 * scale_a:
            ends.append(direction * math.inf)
            continue
        step = max(1.0, abs(seed))
        outside = seed + direction * step
        for _ in range(200):
            if f(outside) < 0.0:
                break
            step *= 2.0
            outside = seed + direction * step
        else:  # pragma: no cover - ray not in cone forces eventual exit
            ends.append(direction * math.inf)
            continue
        ends.append(_bisect_edge(f, seed, outside, tol))
    upper, lower = ends

    def attained(end: float) -> bool:
        if not math.isfinite(end):
            return False
        return f(end) >= -1e-7 * (1.0 + abs(end)) * scale_a

    return ConeInterval(
        lower=lower,
        upper=upper,
        lower_attained=attained(lower),
        upper_attained=attained(upper),
    )


@dataclass(frozen=True)
class NtScaling:
    """Per-block symmetric scaling linking an interior primal-dual pair.

    For an orthant block the data is the vector w = sqrt(x / y); for a PSD
    block it is the unique positive definite W with W Y W = X.
    """

    cone: ConeSpec
    data: tuple[np.ndarray, ...]

    def apply(self, v) -> np.ndarray:
        """Quadratic action: w^2 * v on orthants, W V W on PSD blocks."""
        v = _check_dim(v, self.cone)
        out = np.zeros_like(v)
        for (b, sl), w in zip(self.cone.iter_slices(), self.data):
            if isinstance(b, OrthantBlock):
                out[sl] = w * w * v[sl]
            else:
                out[sl] = sym_to_vec(w @ vec_to_sym(v[sl], b.order) @ w)
        return out


def nt_scaling(x, y, cone: ConeSpec) -> NtScaling:
    """Nesterov-Todd scaling point of an interior pair (x, y)."""
    x = _check_dim(x, cone)
    y = _check_dim(y, cone)
    if interior_margin(x, cone) <= 0.0 or interior_margin(y, cone) <= 0.0:
        raise NotInterior("nt_scaling requires both points strictly inside the cone")
    data: list[np.ndarray] = []
    for b, sl in cone.iter_slices():
        if isinstance(b, OrthantBlock):
            data.append(np.sqrt(x[sl] / y[sl]))
        else:
            xm = vec_to_sym(x[sl], b.order)
            ym = vec_to_sym(y[sl], b.order)
            vals, vecs = np.linalg.eigh(xm)
            sqrt_x = (vecs * np.sqrt(vals)) @ vecs.T
            inner = sqrt_x @ ym @ sqrt_x
            ivals, ivecs = np.linalg.eigh(inner)
            inv_sqrt_inner = (ivecs / np.sqrt(ivals)) @ ivecs.T
            data.append(sqrt_x @ inv_sqrt_inner @ sqrt_x)
    return NtScaling(cone=cone, data=tuple(data))
