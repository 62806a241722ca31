"""Bundled example problems, as builders and as shipped problem files."""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .cones import ConeSpec, OrthantBlock, PsdBlock, sym_to_vec
from .problem import ProblemData

__all__ = ["single_param_sdp", "elliptope", "square_lp", "fixture_path", "load", "NAMES"]

NAMES = ("single_param_sdp", "elliptope", "square_lp")

SQRT2 = math.sqrt(2.0)


def single_param_sdp() -> ProblemData:
    """One-parameter SDP on the order-2 PSD cone.

    min x11 + u*x22 subject to x12 = 1, X psd.  The optimal value is
    2*sqrt(u) for u > 0 and the rhs image of u is 1/sqrt(u) - d22 with the
    reference point d the all-ones matrix (d22 = 1).
    """
    cone = ConeSpec((PsdBlock(2),))
    return ProblemData(
        A=np.array([[0.0, 1.0 / SQRT2, 0.0]]),
        b=np.array([1.0]),
        c=sym_to_vec(np.diag([1.0, 0.0])),
        M=np.array([[0.0, 0.0, 1.0]]),
        d=sym_to_vec(np.ones((2, 2))),
        cone=cone,
        name="single_param_sdp",
    )


def elliptope() -> ProblemData:
    """Bi-parameter SDP over the order-3 elliptope (unit-diagonal PSD).

    min -x23 + u1*x12 - u2*x13 subject to diag(X) = 1, X psd.  The second
    parameter row picks -x13 (not +x13) and the reference point d is the
    identity; this sign convention is what makes the four linearity-region
    images come out as (1,1), (-1,-1), (1,-1), (-1,1).
    """
    cone = ConeSpec((PsdBlock(3),))
    a = np.zeros((3, 6))
    a[0, 0] = 1.0  # x11
    a[1, 3] = 1.0  # x22
    a[2, 5] = 1.0  # x33
    c = np.zeros(6)
    c[4] = -1.0 / SQRT2  # -x23
    m = np.zeros((2, 6))
    m[0, 1] = 1.0 / SQRT2  # x12
    m[1, 2] = -1.0 / SQRT2  # -x13
    return ProblemData(
        A=a,
        b=np.ones(3),
        c=c,
        M=m,
        d=sym_to_vec(np.eye(3)),
        cone=cone,
        name="elliptope",
    )


def square_lp() -> ProblemData:
    """Parametric LP over the unit square (with slack variables).

    min -(x1 + x2) subject to x1 + s1 = 1, x2 + s2 = 1, all nonnegative;
    the parameter rows pick (x1, x2) and d is the square's center, so the
    rhs-parameter domain is [-1/2, 1/2]^2.
    """
    cone = ConeSpec((OrthantBlock(4),))
    return ProblemData(
        A=np.array([[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]]),
        b=np.array([1.0, 1.0]),
        c=np.array([-1.0, -1.0, 0.0, 0.0]),
        M=np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]),
        d=np.array([0.5, 0.5, 0.5, 0.5]),
        cone=cone,
        name="square_lp",
    )


_BUILDERS = {
    "single_param_sdp": single_param_sdp,
    "elliptope": elliptope,
    "square_lp": square_lp,
}


def load(name: str) -> ProblemData:
    if name not in _BUILDERS:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(NAMES)}")
    return _BUILDERS[name]()


def fixture_path(name: str) -> str:
    """Filesystem path of the shipped problem file for CLI use."""
    if name not in _BUILDERS:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(NAMES)}")
    return str(resources.files("mpcone").joinpath(f"fixtures/{name}.json"))
