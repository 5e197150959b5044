"""Central numerical tolerance table.

Every tolerance used by validation and solver code lives here so the
numerics policy can be audited in one place.
"""

# Hilbert-space size guard
MAX_TOTAL_DIM = 4096

# State / operator validation
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
STATE_EIGENVALUE_FLOOR = -1e-8
ALGEBRA_TOL = 1e-12

# Thermal truncation policy: mass allowed above the Fock cutoff
THERMAL_TAIL_MASS = 1e-6

# Deterministic integrator preconditions and runtime monitors
EVOLVE_RATE_DT_MAX = 1e-2        # (max dissipator rate) * dt must not exceed
TRACE_DRIFT_MAX = 1e-9
POSITIVITY_ABORT = -1e-6         # abort when min eigenvalue drops below

# Stochastic integrator preconditions
DIFFUSIVE_RATE_DT_MAX = 1e-3     # (max rate + max strength) * dt
ZSDE_GAMMA_DT_MAX = 1e-4         # measurement strength * dt for the z-SDE
JUMP_PROB_PER_STEP_MAX = 1e-2

# Regularization floor for inverting rho in the statistical-speed metric
RHO_EIGENVALUE_FLOOR = 1e-12
