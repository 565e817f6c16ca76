"""Optimal excitation-maneuver design for aircraft parameter identification.

The package works on a 9-state rigid-body model and its decoupled longitudinal
and lateral linearizations. Inputs are designed by minimizing the A-criterion of
the Fisher information of the a-priori aerodynamic derivatives under flight
envelope constraints, and compared against classical 3-2-1-1 maneuvers through
Cramer-Rao lower bounds.
"""

from flightoed.airframe import (
    AeroCoefficients,
    AirframeProperties,
    DimensionalDerivatives,
    TrimCondition,
    default_derivatives,
    default_trim,
)
from flightoed.conversion import derivative_conversion
from flightoed.dynamics import (
    RigidBodyState,
    aero_forces_moments,
    gravity_components,
    nonlinear_rhs,
    trim_solve,
)
from flightoed.lti import (
    LtiModel,
    augment_actuator_rate,
    build_lateral_lti,
    build_longitudinal_lti,
)
from flightoed.modal import ModeCharacteristics, modal_report
from flightoed.maneuvers import (
    InputSignal,
    gen_3211,
    gen_doublet,
    quantize_to_fcc_steps,
    truncate_for_safety,
)
from flightoed.information import (
    InformationReport,
    SensorModel,
    compare_designs,
    fisher_matrix,
    information_report,
    monte_carlo_crlb_check,
    sensitivity_trajectories,
    simulate_lti,
)
from flightoed.oed import (
    EnvelopeConstraints,
    OedProblem,
    OedSolution,
    bang_bang_metric,
    scale_parameters,
    solve_oed,
    transcribe,
)
from flightoed.assessment import (
    EnvelopeViolationReport,
    nonlinear_replay,
    perturbed_model_screen,
)

__version__ = "0.1.0"
