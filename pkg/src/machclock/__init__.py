"""Simulation toolkit for non-periodic (thermal / relaxation) clocks.

Deterministic Lindblad evolution, continuous-measurement and jump
unravelings, the photon-transfer and collective-spin models driven by a
thermal mechanical bath, and the full family of elapsed-time estimators
with their error laws.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    CutoffError,
    DimensionError,
    MachClockError,
    NumericalAbortError,
    SpaceMismatchError,
    StateValidationError,
    StepSizeError,
)
from .operators import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    angular_momentum,
    annihilation,
    dissipator,
    embed,
    fidelity,
    fock_state,
    geometric_weight,
    identity,
    innovation,
    number_operator,
    partial_trace,
    product_state,
    required_cutoff,
    sigma_minus,
    sigma_plus,
    sigma_x,
    sigma_y,
    sigma_z,
    tensor,
    thermal_mode,
    thermal_qubit,
    trace_distance,
)
from .dynamics import (
    EvolutionResult,
    LindbladModel,
    bloch,
    clock_bound,
    evolve,
    lindblad_rhs,
    liouvillian,
    qubit_from_bloch,
    statistical_distance_rate,
    two_level_closed_form,
)
from .trajectories import (
    DiffusiveChannel,
    EnsembleResult,
    MeasurementRecord,
    SeedSpec,
    TelegraphRecord,
    TrajectoryResult,
    ensemble_run,
    photon_number_channel,
    population_difference_channel,
    simulate_diffusive,
    simulate_jump,
    simulate_telegraph,
    simulate_z_sde,
)
from .models import (
    BlockWeights,
    DickeBlock,
    OptomechParams,
    TwoModeOperators,
    adjudicate_semiclassical_constant,
    build_dicke_block_model,
    build_full_optomech,
    build_number_measurement,
    build_optomech_adiabatic,
    build_swap_model,
    build_two_level_thermal,
    classical_birth_death,
    dicke_rates,
    evolve_birth_death,
    initial_block_weights,
    jz_initial_mean,
    jz_initial_mean_high_temperature,
    semiclassical_rhs,
    swap_operator,
    thermal_number_moments,
    two_mode_operators,
)
from .clocks import (
    ClockEstimate,
    RegimeReport,
    delta_s,
    dwell_time_estimate,
    dwell_time_from_intervals,
    ensemble_swap_estimate,
    kl_divergence,
    kl_high_temperature,
    mu_coefficient,
    mu_high_temperature,
    radiocarbon_estimate,
    regime_check,
    s_statistic,
    t_from_s,
    temperature_estimate,
    thermal_distinguishability,
    thermal_qubit_populations,
)
