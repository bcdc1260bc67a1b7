"""Data-driven prediction and control from Koopman linear embeddings."""

from .control import (ControllerConfig, DDAController, DDKController, EDMDController,
                      SinusoidReference, StepReference, dda_mpc_step, ddk_mpc_step,
                      edmd_mpc_step, realized_cost, run_receding_horizon,
                      zero_input_warm_start)
from .errors import DimensionError, DivergenceError, InfeasibleError, LengthError, ParameterError
from .lifting import (LiftingDictionary, SnapshotSet, edmd_fit, excitation_design,
                      lifted_excitation_report, monomial_dictionary, thin_plate_dictionary)
from .qp import kkt_residuals, solve_eq_box_qp
from .representation import (PredictionProblem, dda_predict, ddk_predict,
                             embedding_nonexistence_certificate, koopman_predict,
                             membership_residual)
from .systems import (AffineModel, NonlinearSystem, StateSpaceModel, affine_to_embedding,
                      benchmark_system, observability_matrix, simulate_affine, simulate_lti,
                      simulate_nonlinear, toeplitz_response)
from .trajectory import (Trajectory, TrajectoryLibrary, build_hankel, is_collectively_pe,
                         is_persistently_exciting, library_from_multiple, library_from_single)

__version__ = "0.1.0"
