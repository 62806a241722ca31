"""Multiparametric conic linear optimization toolkit.

Solves small conic programs over orthant/PSD cone products, evaluates the
two set-valued sensitivity mappings between the objective-parameter and
rhs-parameter sets, and classifies parameter rectangles into linearity sets,
nonlinearity sets and transition faces.
"""

from .cones import ConeSpec, OrthantBlock, PsdBlock
from .problem import ProblemData, assemble_primal, assemble_primal_rhs, validate
from .solver import ConicSolution, SolveStatus, solve

__all__ = [
    "ConeSpec",
    "OrthantBlock",
    "PsdBlock",
    "ProblemData",
    "assemble_primal",
    "assemble_primal_rhs",
    "validate",
    "ConicSolution",
    "SolveStatus",
    "solve",
]
