"""Cascadic multigrid finite elements for the Gross-Pitaevskii ground state."""
from .cascadic import (
    Discretization,
    Problem,
    Schedule,
    auxiliary_solve,
    cascadic_solve,
    direct_level_solve,
    schedule_m,
)
from .eigensolve import Eigenpair, ScfConfig, scf_solve
from .fem import FeFunction, FeSpace
from .harness import StudyConfig, fit_slope, run_study
from .mesh import Hierarchy, Mesh, build_hierarchy, build_structured_unit_square, read_mesh
from .smoother import SmootherKind, smooth

__version__ = "0.1.0"
