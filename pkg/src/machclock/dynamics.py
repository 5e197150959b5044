"""Deterministic Lindblad evolution and precision-bound utilities.

The integrator is a classical fixed-step 4th-order Runge-Kutta scheme with
step-doubling error diagnostics.  The (time-independent) generator is
precomputed once as a sparse matrix acting on the row-major vectorized
state, which keeps large tensor-product models affordable without changing
any public dense-matrix surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import constants
from .errors import (
    NumericalAbortError,
    SpaceMismatchError,
    StateValidationError,
    StepSizeError,
)
from .operators import DensityMatrix, HilbertSpace, Operator, sigma_x, sigma_y, sigma_z


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus rate-weighted jump operators; time independent."""

    space: HilbertSpace
    hamiltonian: Operator | None
    dissipators: tuple[tuple[float, Operator], ...]

    def __post_init__(self):
        object.__setattr__(self, "dissipators", tuple(self.dissipators))
        if self.hamiltonian is not None:
            if self.hamiltonian.space != self.space:
                raise SpaceMismatchError("Hamiltonian lives on a different space")
            if not self.hamiltonian.is_hermitian():
                raise StateValidationError("Hamiltonian is not Hermitian to tolerance")
        for rate, op in self.dissipators:
            if rate < 0:
                raise StateValidationError(f"dissipator rate {rate} is negative")
            if op.space != self.space:
                raise SpaceMismatchError("jump operator lives on a different space")

    @property
    def max_rate(self) -> float:
        return max((rate for rate, _ in self.dissipators), default=0.0)

    def with_dissipators(self, extra) -> "LindbladModel":
        return LindbladModel(self.space, self.hamiltonian, self.dissipators + tuple(extra))


def liouvillian(model: LindbladModel) -> sp.csr_matrix:
    """Sparse generator acting on the row-major vectorized density matrix."""
    d = model.space.dim
    eye = sp.identity(d, dtype=complex, format="csr")
    terms = []
    if model.hamiltonian is not None:
        h = sp.csr_matrix(model.hamiltonian.matrix)
        terms.append(-1j * (sp.kron(h, eye) - sp.kron(eye, h.T)))
    for rate, op in model.dissipators:
        if rate == 0.0:
            continue
        a = sp.csr_matrix(op.matrix)
        ada = (a.conj().T @ a).tocsr()
        terms.append(
            rate
            * (
                sp.kron(a, a.conj())
                - 0.5 * sp.kron(ada, eye)
                - 0.5 * sp.kron(eye, ada.T)
            )
        )
    if not terms:
        return sp.csr_matrix((d * d, d * d), dtype=complex)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total.tocsr()


def lindblad_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Dense right-hand side; used by the stochastic unravelings and tests."""
    out = np.zeros_like(rho)
    if model.hamiltonian is not None:
        h = model.hamiltonian.matrix
        out += -1j * (h @ rho - rho @ h)
    for rate, op in model.dissipators:
        if rate == 0.0:
            continue
        a = op.matrix
        ada = a.conj().T @ a
        out += rate * (a @ rho @ a.conj().T - 0.5 * (ada @ rho + rho @ ada))
    return out


@dataclass
class EvolutionResult:
    """Grids, expectation series, stored states and solver diagnostics."""

    times: np.ndarray
    observables: dict[str, np.ndarray]
    states: list[DensityMatrix] | None
    state_times: np.ndarray | None
    max_step_error: float
    max_trace_drift: float
    min_eigenvalue_seen: float

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise StateValidationError("result times must be strictly increasing")


def _rk4(lv: sp.csr_matrix, v: np.ndarray, dt: float) -> np.ndarray:
    k1 = lv @ v
    k2 = lv @ (v + (0.5 * dt) * k1)
    k3 = lv @ (v + (0.5 * dt) * k2)
    k4 = lv @ (v + dt * k3)
    return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _hermitize(v: np.ndarray, d: int) -> np.ndarray:
    m = v.reshape(d, d)
    return (0.5 * (m + m.conj().T)).ravel()


def evolve(
    model: LindbladModel,
    rho0: DensityMatrix,
    times,
    observables: dict[str, Operator] | None = None,
    store_states: bool = True,
    store_every: int = 1,
    error_check_every: int = 10,
    positivity_check_every: int | None = None,
) -> EvolutionResult:
    """Integrate d(rho)/dt = L(rho) on a uniform grid.

    The grid step must satisfy (max dissipator rate) * dt <= 1e-2; this is a
    necessary sanity bound, while accuracy is reported through the
    step-doubling estimate.  Hermiticity is enforced by symmetrization each
    step; the trace is monitored (not renormalized) and drift beyond 1e-9
    aborts, as does any eigenvalue below -1e-6 at the checked points.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise StepSizeError("need a time grid with at least two points")
    steps = np.diff(times)
    dt = float(steps[0])
    if np.any(steps <= 0) or np.max(np.abs(steps - dt)) > 1e-9 * max(dt, 1.0):
        raise StepSizeError("evolve requires a uniform, strictly increasing grid")
    if model.max_rate * dt > constants.EVOLVE_RATE_DT_MAX * (1 + 1e-12):
        raise StepSizeError(
            f"(max rate)*dt = {model.max_rate * dt:.3e} exceeds "
            f"{constants.EVOLVE_RATE_DT_MAX:.0e}; refine the grid"
        )
    if rho0.space != model.space:
        raise SpaceMismatchError("initial state lives on a different space")

    d = model.space.dim
    n_steps = times.size - 1
    lv = liouvillian(model)
    obs_items = list((observables or {}).items())
    for _, op in obs_items:
        if op.space != model.space:
            raise SpaceMismatchError("observable lives on a different space")
        if not op.is_hermitian():
            raise StateValidationError("observables must be Hermitian")
    obs_mats = [op.matrix.T.ravel() for _, op in obs_items]  # tr(O rho) = O.T : rho
    obs_out = np.empty((len(obs_items), times.size))

    if positivity_check_every is None:
        positivity_check_every = max(1, n_steps // 50)

    v = rho0.matrix.astype(complex).ravel().copy()
    diag_idx = np.arange(0, d * d, d + 1)

    def record_obs(i, vec):
        for q, om in enumerate(obs_mats):
            obs_out[q, i] = float(np.real(np.dot(om, vec)))

    def min_eig(vec):
        m = vec.reshape(d, d)
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())

    stored: list[DensityMatrix] | None = [] if store_states else None
    stored_t: list[float] = []

    def maybe_store(i, vec):
        if stored is None:
            return
        if i % store_every == 0 or i == n_steps:
            stored.append(DensityMatrix(model.space, vec.reshape(d, d)))
            stored_t.append(times[i])

    record_obs(0, v)
    maybe_store(0, v)
    max_err = 0.0
    max_drift = 0.0
    lowest = min_eig(v)

    for i in range(1, n_steps + 1):
        v_full = _rk4(lv, v, dt)
        if error_check_every > 0 and i % error_check_every == 0:
            v_half = _rk4(lv, _rk4(lv, v, 0.5 * dt), 0.5 * dt)
            max_err = max(max_err, float(np.max(np.abs(v_full - v_half))) / 15.0)
        v = _hermitize(v_full, d)

        drift = abs(float(np.sum(v[diag_idx].real)) - 1.0)
        max_drift = max(max_drift, drift)
        if drift > constants.TRACE_DRIFT_MAX:
            raise NumericalAbortError(
                f"trace drift {drift:.3e} exceeded {constants.TRACE_DRIFT_MAX:.0e} "
                f"at t={times[i]:.6g}"
            )
        if i % positivity_check_every == 0 or i == n_steps:
            lo = min_eig(v)
            lowest = min(lowest, lo)
            if lo < constants.POSITIVITY_ABORT:
                raise NumericalAbortError(
                    f"eigenvalue {lo:.3e} below {constants.POSITIVITY_ABORT:.0e} "
                    f"at t={times[i]:.6g}"
                )
        record_obs(i, v)
        maybe_store(i, v)

    return EvolutionResult(
        times=times,
        observables={name: obs_out[q] for q, (name, _) in enumerate(obs_items)},
        states=stored,
        state_times=np.asarray(stored_t) if stored is not None else None,
        max_step_error=max_err,
        max_trace_drift=max_drift,
        min_eigenvalue_seen=lowest,
    )


# ---------------------------------------------------------------------------
# two-level closed forms


def bloch(rho: DensityMatrix) -> tuple[float, float, float]:
    """Bloch vector (x1, x2, x3) = (<sx>, <sy>, <sz>) of a qubit state."""
    if rho.space.dim != 2:
        raise SpaceMismatchError("bloch() needs a two-dimensional state")
    x1 = float(np.real(np.trace(sigma_x().matrix @ rho.matrix)))
    x2 = float(np.real(np.trace(sigma_y().matrix @ rho.matrix)))
    x3 = float(np.real(np.trace(sigma_z().matrix @ rho.matrix)))
    norm = x1 * x1 + x2 * x2 + x3 * x3
    if norm > 1.0 + 1e-10:
        raise StateValidationError(f"Bloch norm {norm} exceeds 1")
    return x1, x2, x3


def qubit_from_bloch(x1: float, x2: float, x3: float) -> DensityMatrix:
    m = 0.5 * (
        np.eye(2, dtype=complex)
        + x1 * sigma_x().matrix
        + x2 * sigma_y().matrix
        + x3 * sigma_z().matrix
    )
    return DensityMatrix(HilbertSpace((2,)), m)


def two_level_closed_form(x0, gamma: float, nbar: float, t):
    """Analytic Bloch relaxation of a thermally damped two-level system.

    Transverse components decay at Gamma/2 and the population at Gamma,
    with Gamma = gamma (2 nbar + 1), toward x3 = -1/(2 nbar + 1).
    """
    if gamma <= 0 or nbar < 0:
        raise StateValidationError("need gamma > 0 and nbar >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise StateValidationError("time must be nonnegative")
    x1_0, x2_0, x3_0 = (float(c) for c in x0)
    big_gamma = gamma * (2.0 * nbar + 1.0)
    x3_inf = -1.0 / (2.0 * nbar + 1.0)
    x1 = x1_0 * np.exp(-big_gamma * t / 2.0)
    x2 = x2_0 * np.exp(-big_gamma * t / 2.0)
    x3 = x3_inf + (x3_0 - x3_inf) * np.exp(-big_gamma * t)
    return x1, x2, x3


# ---------------------------------------------------------------------------
# statistical speed and the clock precision bound


def statistical_distance_rate(rho: DensityMatrix, drho: Operator) -> float:
    """Statistical speed sqrt(tr[drho L]) with (rho L + L rho)/2 = drho.

    The symmetric-product inversion is done in the eigenbasis of rho,
    L_ij = 2 drho_ij / (lam_i + lam_j), after flooring the spectrum at 1e-12
    and renormalizing (the metric is singular on rank-deficient states).
    """
    if drho.space != rho.space:
        raise SpaceMismatchError("drho lives on a different space")
    dm = drho.matrix
    scale = max(1.0, float(np.max(np.abs(dm))))
    if np.max(np.abs(dm - dm.conj().T)) > constants.HERMITICITY_TOL * scale:
        raise StateValidationError("drho must be Hermitian")
    if abs(np.trace(dm)) > constants.HERMITICITY_TOL * scale * rho.space.dim:
        raise StateValidationError("drho must be traceless")
    lam, u = np.linalg.eigh(rho.matrix)
    lam = np.clip(lam, constants.RHO_EIGENVALUE_FLOOR, None)
    lam = lam / lam.sum()
    d_eig = u.conj().T @ dm @ u
    denom = lam[:, None] + lam[None, :]
    speed_sq = float(np.real(np.sum(2.0 * np.abs(d_eig) ** 2 / denom)))
    return float(np.sqrt(max(speed_sq, 0.0)))


def clock_bound(ds_dt: float) -> float:
    """Smallest resolvable time increment 1/(ds/dt); infinite at zero speed."""
    if ds_dt < 0:
        raise StateValidationError("statistical speed must be nonnegative")
    if ds_dt == 0.0:
        return float("inf")
    return 1.0 / ds_dt
