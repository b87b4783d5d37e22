"""Explicit solutions of multiparametric generalized Nash equilibrium problems."""

from .gne_solver import (ExplicitGNESolution, EquilibriumRegion, GNEProblem, SolveOptions,
                         solve_gnep)
from .evaluator import EvaluationPolicy, equilibrium_residual, evaluate, locate
from .kernels import BACKEND
from .polyhedra import Polyhedron

__version__ = "0.1.0"

__all__ = ["BACKEND", "EquilibriumRegion", "EvaluationPolicy", "ExplicitGNESolution",
           "GNEProblem", "Polyhedron", "SolveOptions", "equilibrium_residual", "evaluate",
           "locate", "solve_gnep"]
