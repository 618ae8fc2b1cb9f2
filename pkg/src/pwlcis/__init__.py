"""Sample-based approximation of control invariant sets for linear systems.

Closed-loop MPC trajectories are sampled, made 0-symmetric, pruned to their
convex hull vertices and bounded from below by a convex piecewise-linear
function; the pieces and their mirror images give a polyhedral inner
approximation of the maximal control invariant set.
"""
from .config import ConfigError, RunConfig, load_config
from .geometry import (GeometryError, Polyhedron, contains, hull_2d, polygon_2d, polygon_area,
                       project, remove_redundant, vertices)
from .invariant import (Certificate, assemble, certify_invariance, containment_stats,
                        maximal_ci_oracle, pre)
from .mpc import (LinearSystem, MpcProblem, SampleSet, collect, condense, partition, simulate,
                  symmetrize)
from .numerics import Rng, cholesky
from .pipeline import run_pipeline, run_stage
from .pruning import prune, prune_exact, prune_simplex
from .pwlfit import FitConfig, PwlModel, evaluate, fit, objective
from .solver import LpProblem, QpProblem, Status, solve_lp, solve_qp

__version__ = "0.1.0"
