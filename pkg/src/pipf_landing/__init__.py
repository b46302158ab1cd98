"""Landing evaluation on the planar inverted pendulum with flywheel (PIPF)."""
from .capture import CaptureSpec, LipState, capture_point, min_horizontal_speed, n_step_capture
from .dynamics import (CartesianBodyState, ControlInput, FootState, GroundReaction, ModelParams, PipfState,
                       cartesian_body_state, dimensionalize, eom_terms, forward_dynamics, ground_reaction,
                       integrate_step, nondimensionalize)
from .errors import InvalidInputError, PipfError, PreconditionError, SingularDynamicsError
from .stabilizer import (FeasibilityReport, LandingCase, LandingOutcome, PhaseResult, StabilizerConfig,
                         first_stance_step, pitch_horizon, pitch_stabilize, vertical_feasibility,
                         vertical_horizon, vertical_stabilize)
from .sweep import (GrfFactorSummary, PerformanceMap, SweepSpec, build_grid, factor_study, fit_boundary,
                    rod_inertia, run_sweep, select_boundary_neighbors)
from .trajopt import (ConstraintConfig, CostConfig, HorizonSpec, IterationResult, SolverOptions, Status,
                      cost, discount_sequence, solve_iteration)

__version__ = "0.1.0"
