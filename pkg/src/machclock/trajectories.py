"""Stochastic unravelings of Lindblad models.

Four samplers are provided:

* ``simulate_diffusive`` -- Euler-Maruyama integration of the conditional
  master equation under weak continuous measurement, producing measurement
  records alongside the conditional state.  Diagonal-preserving models can
  be routed through an equivalent classical filtering recursion on the
  number probabilities (compiled with numba), which is exactly the same
  discretization driven by the same noise stream.
* ``simulate_jump`` -- Poisson jump counting, either per-step Bernoulli on
  the conditional density matrix or exact Gillespie event sampling when the
  model is classical-diagonal.
* ``simulate_z_sde`` -- the reduced two-qubit conditional-population SDE.
* ``simulate_telegraph`` -- exact exponential dwell-time sampling of a
  two-state telegraph process.

Randomness is drawn from a counter-based Philox generator keyed by
(master_seed, trajectory_index); within a trajectory, draws are consumed in
step-major, channel-minor order, so results are independent of chunking or
worker scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import constants
from .dynamics import LindbladModel, lindblad_rhs
from .errors import (
    NumericalAbortError,
    SpaceMismatchError,
    StateValidationError,
    StepSizeError,
)
from .operators import DensityMatrix, Operator

_DIAG_TOL = 1e-12


@dataclass(frozen=True)
class SeedSpec:
    """Identifies one independent noise stream of an ensemble."""

    master_seed: int
    trajectory_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "trajectory_index"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise StateValidationError(f"{name} must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.trajectory_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class DiffusiveChannel:
    """A continuously monitored Hermitian observable.

    ``strength`` multiplies the conditioning (innovation) term as
    sqrt(strength); ``record_noise_scale`` is the coefficient of dW in the
    record increment.  The two live in separate fields because the monitored
    models use two record conventions: 1/sqrt(8 strength) for qubit
    population channels and 1/sqrt(strength) for photon-number channels.
    The deterministic measurement backaction (dephasing) is part of the
    LindbladModel built alongside the channel, not added here.
    """

    op: Operator
    strength: float
    record_noise_scale: float
    label: str = "ch"

    def __post_init__(self):
        if not self.op.is_hermitian():
            raise StateValidationError("measured observable must be Hermitian")
        if self.strength < 0:
            raise StateValidationError("measurement strength must be >= 0")
        if self.record_noise_scale <= 0:
            raise StateValidationError("record noise scale must be > 0")


def population_difference_channel(op: Operator, strength: float, label: str) -> DiffusiveChannel:
    """Qubit sigma-z style channel: record dy = <op> dt + dW / sqrt(8 strength)."""
    return DiffusiveChannel(op, strength, 1.0 / np.sqrt(8.0 * strength), label)


def photon_number_channel(op: Operator, strength: float, label: str) -> DiffusiveChannel:
    """Number-readout channel: record dy = <op> dt + dW / sqrt(strength)."""
    return DiffusiveChannel(op, strength, 1.0 / np.sqrt(strength), label)


@dataclass
class MeasurementRecord:
    """Integrated record increments dy on the saved grid (bin right edges)."""

    times: np.ndarray
    increments: np.ndarray
    channel_id: str

    def __post_init__(self):
        if self.times.shape != self.increments.shape:
            raise StateValidationError("one record increment per grid step required")
        if not np.all(np.isfinite(self.increments)):
            raise StateValidationError("record increments must be finite")

    def current(self) -> np.ndarray:
        """Record increments divided by the bin width: the measured current."""
        width = self.times[0] if self.times.size == 1 else self.times[1] - self.times[0]
        return self.increments / width


@dataclass
class TrajectoryResult:
    times: np.ndarray
    conditional_observables: dict[str, np.ndarray]
    records: list[MeasurementRecord]
    jump_counts: dict[str, np.ndarray]
    seed: SeedSpec
    scheme: str

    def __post_init__(self):
        for name, series in self.conditional_observables.items():
            if not np.all(np.isfinite(series)):
                raise StateValidationError(f"observable series {name!r} has non-finite values")
        for name, counts in self.jump_counts.items():
            if np.any(np.diff(counts) < 0):
                raise StateValidationError(f"jump counts {name!r} must be nondecreasing")


# ---------------------------------------------------------------------------
# diagonal-model detection


def _diagonal_state(rho: DensityMatrix) -> np.ndarray | None:
    off = rho.matrix - np.diag(np.diag(rho.matrix))
    if np.max(np.abs(off)) > _DIAG_TOL:
        return None
    return np.real(np.diag(rho.matrix)).copy()


def _classical_generator(model: LindbladModel) -> np.ndarray | None:
    """Birth-death style generator on the diagonal, or None if not eligible.

    Eligible dissipators map diagonal states to diagonal states: each jump
    operator column holds at most one entry and A^dag A is diagonal.  A
    diagonal (or absent) Hamiltonian contributes nothing on the diagonal.
    """
    d = model.space.dim
    if model.hamiltonian is not None:
        h = model.hamiltonian.matrix
        if np.max(np.abs(h - np.diag(np.diag(h)))) > _DIAG_TOL:
            return None
    gen = np.zeros((d, d))
    for rate, op in model.dissipators:
        if rate == 0.0:
            continue
        a = op.matrix
        if np.max(np.count_nonzero(np.abs(a) > _DIAG_TOL, axis=0)) > 1:
            return None
        ada = a.conj().T @ a
        if np.max(np.abs(ada - np.diag(np.diag(ada)))) > _DIAG_TOL:
            return None
        gen += rate * (np.abs(a) ** 2 - np.diag(np.real(np.diag(ada))))
    return gen


def _diagonal_operator(op: Operator) -> np.ndarray | None:
    m = op.matrix
    if np.max(np.abs(m - np.diag(np.diag(m)))) > _DIAG_TOL:
        return None
    return np.real(np.diag(m)).copy()


# ---------------------------------------------------------------------------
# diffusive conditional evolution


@lru_cache(maxsize=1)
def _classical_filter_kernel():
    import numba

    @numba.njit(cache=True)
    def kernel(p, gen, hdiag, sqrt_strengths, scales, obs_diag, dt,
               noise, save_every, out_obs, out_rec, rec_accum):
        n_steps, n_ch = noise.shape
        dim = p.size
        n_obs = obs_diag.shape[0]
        sqrt_dt = np.sqrt(dt)
        min_p = 0.0
        save_idx = 0
        e_vals = np.empty(n_ch)
        drift = np.empty(dim)
        for i in range(n_steps):
            for c in range(n_ch):
                acc = 0.0
                for k in range(dim):
                    acc += hdiag[c, k] * p[k]
                e_vals[c] = acc
            for k in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc += gen[k, j] * p[j]
                drift[k] = acc
            norm = 0.0
            for k in range(dim):
                kick = 0.0
                for c in range(n_ch):
                    kick += sqrt_strengths[c] * 2.0 * (hdiag[c, k] - e_vals[c]) * noise[i, c]
                newp = p[k] + dt * drift[k] + p[k] * kick * sqrt_dt
                if newp < min_p:
                    min_p = newp
                if newp < 0.0:
                    newp = 0.0
                p[k] = newp
                norm += newp
            for k in range(dim):
                p[k] /= norm
            for c in range(n_ch):
                rec_accum[c] += e_vals[c] * dt + scales[c] * noise[i, c] * sqrt_dt
            if (i + 1) % save_every == 0:
                for c in range(n_ch):
                    out_rec[save_idx, c] = rec_accum[c]
                    rec_accum[c] = 0.0
                    acc = 0.0
                    for k in range(dim):
                        acc += hdiag[c, k] * p[k]
                    out_obs[save_idx, c] = acc
                for q in range(n_obs):
                    acc = 0.0
                    for k in range(dim):
                        acc += obs_diag[q, k] * p[k]
                    out_obs[save_idx, n_ch + q] = acc
                save_idx += 1
        return min_p

    return kernel


def _grid_setup(dt: float, t_final: float, save_every: int):
    if dt <= 0 or t_final <= 0:
        raise StepSizeError("need dt > 0 and t_final > 0")
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise StepSizeError("t_final shorter than one step")
    n_steps = save_every * max(1, int(np.ceil(n_steps / save_every)))
    times = dt * save_every * np.arange(n_steps // save_every + 1)
    return n_steps, times


def simulate_diffusive(
    model: LindbladModel,
    channels: list[DiffusiveChannel],
    rho0: DensityMatrix,
    dt: float,
    t_final: float,
    seed: SeedSpec,
    observables: dict[str, Operator] | None = None,
    save_every: int = 1,
    method: str = "auto",
) -> TrajectoryResult:
    """One diffusive trajectory with its measurement records.

    Record increments and the conditional state are driven by the same
    Wiener increments; records are summed over ``save_every`` integration
    steps before being stored.  ``method`` is "sme" (dense conditional
    master equation), "classical" (equivalent diagonal filter, compiled) or
    "auto" (classical when the model, channels and initial state are all
    diagonal-preserving).
    """
    if rho0.space != model.space:
        raise SpaceMismatchError("initial state lives on a different space")
    for ch in channels:
        if ch.op.space != model.space:
            raise SpaceMismatchError(f"channel {ch.label!r} lives on a different space")
    max_strength = max((ch.strength for ch in channels), default=0.0)
    if (model.max_rate + max_strength) * dt > constants.DIFFUSIVE_RATE_DT_MAX * (1 + 1e-12):
        raise StepSizeError(
            f"(max rate + max strength)*dt = {(model.max_rate + max_strength) * dt:.3e} "
            f"exceeds {constants.DIFFUSIVE_RATE_DT_MAX:.0e}"
        )
    observables = observables or {}
    labels = [ch.label for ch in channels]
    if len(set(labels)) != len(labels) or set(labels) & set(observables):
        raise StateValidationError("channel labels must be unique and not shadow observables")

    n_steps, times = _grid_setup(dt, t_final, save_every)

    if method == "auto":
        eligible = (
            _classical_generator(model) is not None
            and _diagonal_state(rho0) is not None
            and all(_diagonal_operator(ch.op) is not None for ch in channels)
            and all(_diagonal_operator(op) is not None for op in observables.values())
        )
        method = "classical" if eligible else "sme"

    if method == "classical":
        return _diffusive_classical(
            model, channels, rho0, dt, n_steps, times, seed, observables, save_every
        )
    if method == "sme":
        return _diffusive_sme(
            model, channels, rho0, dt, n_steps, times, seed, observables, save_every
        )
    raise StateValidationError(f"unknown method {method!r}")


def _diffusive_sme(model, channels, rho0, dt, n_steps, times, seed, observables, save_every):
    rng = seed.generator()
    noise = rng.standard_normal((n_steps, len(channels)))
    sqrt_dt = np.sqrt(dt)
    rho = rho0.matrix.astype(complex).copy()
    chan_ops = [ch.op.matrix for ch in channels]
    sqrt_strengths = [np.sqrt(ch.strength) for ch in channels]
    obs_items = list(observables.items())

    n_saves = n_steps // save_every
    n_ch = len(channels)
    out_obs = np.empty((n_saves + 1, n_ch + len(obs_items)))
    out_rec = np.zeros((n_saves, n_ch))

    def conditional_means(r):
        return [float(np.real(np.trace(c @ r))) for c in chan_ops] + [
            float(np.real(np.trace(op.matrix @ r))) for _, op in obs_items
        ]

    out_obs[0] = conditional_means(rho)
    pos_every = max(1, n_steps // 64)
    rec_accum = np.zeros(n_ch)
    save_idx = 0
    for i in range(n_steps):
        e_vals = np.array([float(np.real(np.trace(c @ rho))) for c in chan_ops])
        drho = lindblad_rhs(model, rho) * dt
        for c in range(n_ch):
            dw = noise[i, c] * sqrt_dt
            cm = chan_ops[c]
            drho += (sqrt_strengths[c] * dw) * (cm @ rho + rho @ cm - 2.0 * e_vals[c] * rho)
            rec_accum[c] += e_vals[c] * dt + channels[c].record_noise_scale * dw
        rho = rho + drho
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.real(np.trace(rho))
        if (i + 1) % pos_every == 0:
            lo = float(np.linalg.eigvalsh(rho).min())
            if lo < constants.POSITIVITY_ABORT:
                raise NumericalAbortError(
                    f"conditional state eigenvalue {lo:.3e} below "
                    f"{constants.POSITIVITY_ABORT:.0e} at step {i + 1}"
                )
        if (i + 1) % save_every == 0:
            out_rec[save_idx] = rec_accum
            rec_accum[:] = 0.0
            save_idx += 1
            out_obs[save_idx] = conditional_means(rho)

    series = {ch.label: out_obs[:, c] for c, ch in enumerate(channels)}
    series.update(
        {name: out_obs[:, n_ch + q] for q, (name, _) in enumerate(obs_items)}
    )
    records = [
        MeasurementRecord(times[1:], out_rec[:, c].copy(), ch.label)
        for c, ch in enumerate(channels)
    ]
    return TrajectoryResult(times, series, records, {}, seed, "diffusive-sme")


def _diffusive_classical(model, channels, rho0, dt, n_steps, times, seed, observables, save_every):
    gen = _classical_generator(model)
    p0 = _diagonal_state(rho0)
    hdiag = [_diagonal_operator(ch.op) for ch in channels]
    obs_items = list(observables.items())
    obs_diag = [_diagonal_operator(op) for _, op in obs_items]
    if gen is None or p0 is None or any(h is None for h in hdiag) or any(
        o is None for o in obs_diag
    ):
        raise StateValidationError(
            "classical filtering needs a diagonal-preserving model, diagonal "
            "channels/observables and a diagonal initial state"
        )
    n_ch = len(channels)
    hdiag = (
        np.array(hdiag).reshape(n_ch, -1) if channels else np.zeros((0, p0.size))
    )
    obs_diag = (
        np.array(obs_diag).reshape(len(obs_items), -1)
        if obs_items
        else np.zeros((0, p0.size))
    )
    sqrt_strengths = np.array([np.sqrt(ch.strength) for ch in channels])
    scales = np.array([ch.record_noise_scale for ch in channels])

    n_saves = n_steps // save_every
    out_obs = np.empty((n_saves + 1, n_ch + len(obs_items)))
    out_rec = np.empty((n_saves, n_ch))
    out_obs[0, :n_ch] = hdiag @ p0
    out_obs[0, n_ch:] = obs_diag @ p0

    kernel = _classical_filter_kernel()
    rng = seed.generator()
    p = p0.copy()
    rec_accum = np.zeros(n_ch)
    chunk = save_every * max(1, int(np.ceil(2**18 / save_every)))
    done = 0
    save_done = 0
    min_p = 0.0
    while done < n_steps:
        this = min(chunk, n_steps - done)
        noise = rng.standard_normal((this, n_ch))
        saves = this // save_every
        lo = kernel(
            p, gen, hdiag, sqrt_strengths, scales, obs_diag, dt,
            noise, save_every,
            out_obs[1 + save_done : 1 + save_done + saves],
            out_rec[save_done : save_done + saves],
            rec_accum,
        )
        min_p = min(min_p, lo)
        if min_p < constants.POSITIVITY_ABORT:
            raise NumericalAbortError(
                f"filter probability {min_p:.3e} below {constants.POSITIVITY_ABORT:.0e}"
            )
        done += this
        save_done += saves

    series = {ch.label: out_obs[:, c] for c, ch in enumerate(channels)}
    series.update({name: out_obs[:, n_ch + q] for q, (name, _) in enumerate(obs_items)})
    records = [
        MeasurementRecord(times[1:], out_rec[:, c].copy(), ch.label)
        for c, ch in enumerate(channels)
    ]
    return TrajectoryResult(times, series, records, {}, seed, "diffusive-classical")


# ---------------------------------------------------------------------------
# jump unraveling


def jump_labels(model: LindbladModel) -> list[str]:
    return [f"jump{k}" for k in range(len(model.dissipators))]


def simulate_jump(
    model: LindbladModel,
    rho0: DensityMatrix,
    dt: float,
    t_final: float,
    seed: SeedSpec,
    observables: dict[str, Operator] | None = None,
    save_every: int = 1,
    method: str = "auto",
) -> TrajectoryResult:
    """One jump trajectory; counts each dissipator's jumps separately.

    "bernoulli" draws a per-step jump decision on the conditional density
    matrix (total per-step jump probability must stay below 1e-2);
    "gillespie" samples exact event times on the configuration chain and is
    available for classical-diagonal models, where it is bias-free.  "auto"
    picks Gillespie when eligible.
    """
    if rho0.space != model.space:
        raise SpaceMismatchError("initial state lives on a different space")
    observables = observables or {}
    n_steps, times = _grid_setup(dt, t_final, save_every)

    if method == "auto":
        eligible = (
            _classical_generator(model) is not None
            and _diagonal_state(rho0) is not None
            and all(_diagonal_operator(op) is not None for op in observables.values())
        )
        method = "gillespie" if eligible else "bernoulli"
    if method == "gillespie":
        return _jump_gillespie(model, rho0, times, seed, observables)
    if method == "bernoulli":
        return _jump_bernoulli(model, rho0, dt, n_steps, times, seed, observables, save_every)
    raise StateValidationError(f"unknown method {method!r}")


def _jump_bernoulli(model, rho0, dt, n_steps, times, seed, observables, save_every):
    rng = seed.generator()
    uniforms = rng.random(n_steps)
    rho = rho0.matrix.astype(complex).copy()
    h = model.hamiltonian.matrix if model.hamiltonian is not None else None
    rates = np.array([r for r, _ in model.dissipators])
    ops = [op.matrix for _, op in model.dissipators]
    adas = [a.conj().T @ a for a in ops]
    labels = jump_labels(model)
    obs_items = list(observables.items())

    n_saves = n_steps // save_every
    out_obs = np.empty((n_saves + 1, len(obs_items)))
    out_counts = np.zeros((n_saves + 1, len(ops)), dtype=np.int64)
    counts = np.zeros(len(ops), dtype=np.int64)

    def record(idx, r):
        for q, (_, op) in enumerate(obs_items):
            out_obs[idx, q] = float(np.real(np.trace(op.matrix @ r)))

    record(0, rho)
    save_idx = 0
    for i in range(n_steps):
        probs = rates * np.array([max(np.real(np.trace(ada @ rho)), 0.0) for ada in adas]) * dt
        total = float(probs.sum())
        if total > constants.JUMP_PROB_PER_STEP_MAX:
            raise StepSizeError(
                f"per-step jump probability {total:.3e} exceeds "
                f"{constants.JUMP_PROB_PER_STEP_MAX:.0e}; reduce dt"
            )
        u = uniforms[i]
        if u < total:
            k = int(np.searchsorted(np.cumsum(probs), u, side="right"))
            a = ops[k]
            rho = a @ rho @ a.conj().T
            rho /= np.real(np.trace(rho))
            counts[k] += 1
        else:
            drho = np.zeros_like(rho)
            if h is not None:
                drho += -1j * (h @ rho - rho @ h)
            for rate, ada in zip(rates, adas):
                if rate:
                    drho += -0.5 * rate * (ada @ rho + rho @ ada)
            rho = rho + dt * drho
            rho /= np.real(np.trace(rho))
        rho = 0.5 * (rho + rho.conj().T)
        if (i + 1) % save_every == 0:
            save_idx += 1
            record(save_idx, rho)
            out_counts[save_idx] = counts

    series = {name: out_obs[:, q] for q, (name, _) in enumerate(obs_items)}
    jump_counts = {lab: out_counts[:, k].copy() for k, lab in enumerate(labels)}
    return TrajectoryResult(times, series, [], jump_counts, seed, "jump-bernoulli")


def _jump_gillespie(model, rho0, times, seed, observables):
    gen = _classical_generator(model)
    p0 = _diagonal_state(rho0)
    obs_items = list(observables.items())
    obs_diag = [_diagonal_operator(op) for _, op in obs_items]
    if gen is None or p0 is None or any(o is None for o in obs_diag):
        raise StateValidationError(
            "Gillespie sampling needs a classical-diagonal model, diagonal "
            "observables and a diagonal initial state"
        )
    labels = jump_labels(model)
    dim = p0.size
    # per channel: target configuration and rate out of each configuration
    chan_target = []
    chan_rate = []
    for rate, op in model.dissipators:
        a = np.abs(op.matrix) ** 2
        chan_target.append(np.argmax(a, axis=0))
        chan_rate.append(rate * a.max(axis=0))
    chan_target = np.array(chan_target).reshape(len(labels), dim)
    chan_rate = np.array(chan_rate).reshape(len(labels), dim)
    total_rate = chan_rate.sum(axis=0)

    rng = seed.generator()
    config = int(np.searchsorted(np.cumsum(p0), rng.random(), side="right"))
    config = min(config, dim - 1)
    t_final = times[-1]

    path = [config]
    event_times = []
    event_channels = []
    t = 0.0
    while True:
        r = total_rate[config]
        if r <= 0.0:
            break
        t += rng.exponential(1.0 / r)
        if t > t_final:
            break
        rates_here = chan_rate[:, config]
        k = int(np.searchsorted(np.cumsum(rates_here), rng.random() * r, side="right"))
        k = min(k, len(labels) - 1)
        event_times.append(t)
        event_channels.append(k)
        config = int(chan_target[k, config])
        path.append(config)

    event_times = np.asarray(event_times)
    event_channels = np.asarray(event_channels, dtype=np.int64)
    path = np.asarray(path, dtype=np.int64)
    # configuration path evaluated on the output grid
    configs = path[np.searchsorted(event_times, times, side="right")]

    series = {
        name: obs_diag[q][configs] for q, (name, _) in enumerate(obs_items)
    }
    jump_counts = {
        lab: np.searchsorted(event_times[event_channels == k], times, side="right").astype(np.int64)
        for k, lab in enumerate(labels)
    }
    return TrajectoryResult(times, series, [], jump_counts, seed, "jump-gillespie")


# ---------------------------------------------------------------------------
# reduced two-qubit conditional-population SDE


def simulate_z_sde(
    z0: tuple[float, float],
    gamma: float,
    strength: float,
    dt: float,
    t_final: float,
    seed: SeedSpec,
) -> TrajectoryResult:
    """Euler-Maruyama paths of the monitored swap-pair populations.

    dz1 = -gamma (z1 - z2) dt + 2 sqrt(strength) (1 - z1^2) dW1
    dz2 = +gamma (z1 - z2) dt + 2 sqrt(strength) (1 - z2^2) dW2

    Paths are clamped to [-1, 1] after every step (the exact process never
    leaves the interval; Euler overshoot can).
    """
    z1, z2 = float(z0[0]), float(z0[1])
    if abs(z1) > 1 or abs(z2) > 1:
        raise StateValidationError("initial populations must lie in [-1, 1]")
    if strength * dt > constants.ZSDE_GAMMA_DT_MAX * (1 + 1e-12):
        raise StepSizeError(
            f"strength*dt = {strength * dt:.3e} exceeds {constants.ZSDE_GAMMA_DT_MAX:.0e}"
        )
    n_steps, times = _grid_setup(dt, t_final, 1)
    rng = seed.generator()
    noise = rng.standard_normal((n_steps, 2)) * np.sqrt(dt)
    amp = 2.0 * np.sqrt(strength)
    z1_path = np.empty(n_steps + 1)
    z2_path = np.empty(n_steps + 1)
    z1_path[0], z2_path[0] = z1, z2
    for i in range(n_steps):
        drift = gamma * (z1 - z2) * dt
        z1 = z1 - drift + amp * noise[i, 0] * (1.0 - z1 * z1)
        z2 = z2 + drift + amp * noise[i, 1] * (1.0 - z2 * z2)
        z1 = min(1.0, max(-1.0, z1))
        z2 = min(1.0, max(-1.0, z2))
        z1_path[i + 1] = z1
        z2_path[i + 1] = z2
    return TrajectoryResult(
        times, {"z1": z1_path, "z2": z2_path}, [], {}, seed, "z-sde"
    )


# ---------------------------------------------------------------------------
# telegraph sampling


@dataclass
class TelegraphRecord:
    """Piecewise +/-1 signal with exact switch times."""

    start_value: int
    switch_times: np.ndarray
    t_final: float

    def sample(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        flips = np.searchsorted(self.switch_times, times, side="right")
        return self.start_value * (-1) ** (flips % 2)

    def dwell_times(self, level: int | None = None) -> np.ndarray:
        """Completed dwell intervals, optionally only those spent at `level`."""
        edges = np.concatenate(([0.0], self.switch_times))
        dwells = np.diff(edges)
        if level is None:
            return dwells
        start_level = self.start_value
        levels = start_level * (-1) ** np.arange(dwells.size)
        return dwells[levels == level]

    def occupancy(self, level: int = 1) -> float:
        """Fraction of [0, t_final] spent at `level`."""
        edges = np.concatenate(([0.0], self.switch_times, [self.t_final]))
        spans = np.diff(edges)
        levels = self.start_value * (-1) ** np.arange(spans.size)
        return float(spans[levels == level].sum() / self.t_final)


def simulate_telegraph(
    rate_up: float,
    rate_down: float,
    t_final: float,
    seed: SeedSpec,
    start_value: int = -1,
) -> TelegraphRecord:
    """Exact exponential dwell-time sampling of a two-state switch.

    ``rate_up`` drives -1 -> +1 transitions and ``rate_down`` the reverse;
    no grid discretization is involved.
    """
    if rate_up < 0 or rate_down < 0:
        raise StateValidationError("rates must be nonnegative")
    if start_value not in (-1, 1):
        raise StateValidationError("start_value must be +1 or -1")
    rng = seed.generator()
    t = 0.0
    level = start_value
    switches = []
    while True:
        rate = rate_up if level == -1 else rate_down
        if rate == 0.0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= t_final:
            break
        switches.append(t)
        level = -level
    return TelegraphRecord(start_value, np.asarray(switches), float(t_final))


# ---------------------------------------------------------------------------
# seeded ensembles


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    record_mean: dict[str, np.ndarray]
    record_stderr: dict[str, np.ndarray]
    jump_count_mean: dict[str, np.ndarray]
    n_traj: int
    master_seed: int
    per_trajectory: list[TrajectoryResult] | None


def ensemble_run(
    simulate: Callable[[SeedSpec], TrajectoryResult],
    n_traj: int,
    master_seed: int,
    keep_trajectories: bool = False,
) -> EnsembleResult:
    """Run `simulate` for SeedSpec(master_seed, 0..n_traj-1) and average.

    Trajectories run and are reduced in fixed index order, so the result is
    bit-identical however the work would be scheduled.
    """
    if n_traj < 1:
        raise StateValidationError("n_traj must be >= 1")
    sums: dict[str, np.ndarray] = {}
    sumsq: dict[str, np.ndarray] = {}
    rec_sums: dict[str, np.ndarray] = {}
    rec_sumsq: dict[str, np.ndarray] = {}
    count_sums: dict[str, np.ndarray] = {}
    kept = [] if keep_trajectories else None
    times = None
    for i in range(n_traj):
        res = simulate(SeedSpec(master_seed, i))
        if times is None:
            times = res.times
        elif res.times.shape != times.shape or np.max(np.abs(res.times - times)) > 1e-12:
            raise StateValidationError("ensemble trajectories must share one grid")
        for name, series in res.conditional_observables.items():
            if name not in sums:
                sums[name] = np.zeros_like(series)
                sumsq[name] = np.zeros_like(series)
            sums[name] += series
            sumsq[name] += series**2
        for rec in res.records:
            if rec.channel_id not in rec_sums:
                rec_sums[rec.channel_id] = np.zeros_like(rec.increments)
                rec_sumsq[rec.channel_id] = np.zeros_like(rec.increments)
            rec_sums[rec.channel_id] += rec.increments
            rec_sumsq[rec.channel_id] += rec.increments**2
        for name, counts in res.jump_counts.items():
            if name not in count_sums:
                count_sums[name] = np.zeros(counts.shape)
            count_sums[name] += counts
        if kept is not None:
            kept.append(res)

    def finish(s, sq):
        mean = {k: v / n_traj for k, v in s.items()}
        err = {}
        for k in s:
            var = np.maximum(sq[k] / n_traj - mean[k] ** 2, 0.0)
            err[k] = np.sqrt(var / max(n_traj - 1, 1))
        return mean, err

    mean, stderr = finish(sums, sumsq)
    rec_mean, rec_stderr = finish(rec_sums, rec_sumsq)
    return EnsembleResult(
        times=times,
        mean=mean,
        stderr=stderr,
        record_mean=rec_mean,
        record_stderr=rec_stderr,
        jump_count_mean={k: v / n_traj for k, v in count_sums.items()},
        n_traj=n_traj,
        master_seed=master_seed,
        per_trajectory=kept,
    )
