"""Tight conic relaxations of mixed-integer QCQPs.

The pipeline lifts a quadratically constrained problem to a semidefinite
relaxation, strengthens it with valid linear equalities, optionally
replaces each integer variable's rank-1 disjunction by its convex hull,
and closes the remaining gap with branch and bound.  A radial-feeder
inverter-placement application ships as the worked example.
"""

from .model import (EQ, LE, MiqcqpProblem, ModelError, Partition,
                    QuadraticForm, VarSpec, classify_constraints)
from .lift import (SdpRelaxation, add_valid_equalities, drop_redundant_2d,
                   error_metrics, exactness_certificate, lift_basic)
from .hull import (Disjunction, HullReformulation, build_disjunctions,
                   count_aux, hull_compact, hull_full)
from .conic import ConicProblem, Layout, assemble, read_conic, write_conic
from .solver import (OperatorSplittingSolver, Settings, SolveResult,
                     project_psd)
from .backends import ClarabelBackend, get_backend
from .bnb import DomainEntity, MiResult, SimplexEntity, Strategy, solve_mi
from .tiers import CH_MIESDP, MIBSDP, MIESDP, TIERS, TierBuild, build_tier
from .feeder import (Costs, FeederBranch, FeederNode, PlacementInstance,
                     PvUnit, RadialFeeder, analyze_solution, build_placement,
                     demo_feeder_13, load_feeder, save_feeder)
from .demos import illustrative_oracle, illustrative_problem

__version__ = "0.1.0"

__all__ = [
    "EQ", "LE", "MiqcqpProblem", "ModelError", "Partition", "QuadraticForm",
    "VarSpec", "classify_constraints",
    "SdpRelaxation", "add_valid_equalities", "drop_redundant_2d",
    "error_metrics", "exactness_certificate", "lift_basic",
    "Disjunction", "HullReformulation", "build_disjunctions", "count_aux",
    "hull_compact", "hull_full",
    "ConicProblem", "Layout", "assemble", "read_conic", "write_conic",
    "OperatorSplittingSolver", "Settings", "SolveResult", "project_psd",
    "ClarabelBackend", "get_backend",
    "DomainEntity", "MiResult", "SimplexEntity", "Strategy", "solve_mi",
    "CH_MIESDP", "MIBSDP", "MIESDP", "TIERS", "TierBuild", "build_tier",
    "Costs", "FeederBranch", "FeederNode", "PlacementInstance", "PvUnit",
    "RadialFeeder", "analyze_solution", "build_placement", "demo_feeder_13",
    "load_feeder", "save_feeder",
    "illustrative_oracle", "illustrative_problem",
    "__version__",
]
