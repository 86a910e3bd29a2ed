"""Robust tube MPC with online scenario-based disturbance quantification."""
from .errors import UqTubeError
from .lp import LinearProgram, LpResult, LpStatus, solve_lp
from .mpc import Controller, ControllerOptions, RunRecord, build_opt, region_member, solve_opt
from .poly import Polytope, QuantifiedSet, area_2d, contains, quantified_contains, support, vertices_2d
from .qp import QpResult, QpStatus, QuadraticProgram, solve_qp
from .qtube import QuantifiedTube, horizon_nuk, quantified_tube, tightening_hstar, update_tube
from .riccati import GainSynthesis, build_lifted, solve_dare
from .tube import TubeArtifacts, build_artifacts
from .uq import DisturbanceLog, ScenarioSolution, quantify_batch, quantify_recursive, sample_complexity

__version__ = "0.1.0"
