"""Robust camera location estimation from pairwise directions, weighted by 3-cycle consistency."""

from .directions import DirectionMeasurements, aab_inconsistency, well_shaped_filter
from .evaluation import align_rotations, align_similarity, exact_recovery, pose_errors
from .graph import ViewGraph, build_view_graph
from .harness import MethodSpec, SweepSpec, run_sweep, theorem_check
from .location import SolverConfig, cycle_sync, solve_wls
from .rotation import RotationConfig, RotationMeasurements, mpls_cycle
from .synthetic import SyntheticScenario, sample_rotation_scenario, sample_scenario
from .taab import TaabConfig, compute_taab, taab_scores

__all__ = [
    "DirectionMeasurements",
    "MethodSpec",
    "RotationConfig",
    "RotationMeasurements",
    "SolverConfig",
    "SweepSpec",
    "SyntheticScenario",
    "TaabConfig",
    "ViewGraph",
    "aab_inconsistency",
    "align_rotations",
    "align_similarity",
    "build_view_graph",
    "compute_taab",
    "cycle_sync",
    "exact_recovery",
    "mpls_cycle",
    "pose_errors",
    "run_sweep",
    "sample_rotation_scenario",
    "sample_scenario",
    "solve_wls",
    "taab_scores",
    "theorem_check",
    "well_shaped_filter",
]

__version__ = "0.1.0"
