"""Builders for the simulated systems.

Covers the thermally damped two-level system, the randomly swapped qubit
pair with optional weak population monitoring, the two-cavity photon
transfer model (both the full three-mode form and its adiabatically reduced
form), the equivalent collective-spin ladder with its classical birth-death
reduction, thermal initial-state block decompositions, and the dispersive
number-readout channel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dynamics import LindbladModel
from .errors import CutoffError, DimensionError, StateValidationError
from .operators import (
    HilbertSpace,
    Operator,
    angular_momentum,
    annihilation,
    embed,
    geometric_weight,
    number_operator,
    sigma_minus,
    sigma_plus,
    sigma_z,
    tensor,
)
from . import constants
from .trajectories import (
    DiffusiveChannel,
    photon_number_channel,
    population_difference_channel,
)


# ---------------------------------------------------------------------------
# two-level system in a thermal bath


def build_two_level_thermal(gamma: float, nbar: float) -> LindbladModel:
    """Radiative damping at rate gamma against a bath with occupation nbar.

    Downward transitions run at gamma (nbar + 1), upward at gamma nbar.
    """
    if gamma < 0 or nbar < 0:
        raise StateValidationError("gamma and nbar must be nonnegative")
    space = HilbertSpace((2,))
    return LindbladModel(
        space,
        None,
        (
            (gamma * (nbar + 1.0), sigma_minus()),
            (gamma * nbar, sigma_plus()),
        ),
    )


# ---------------------------------------------------------------------------
# randomly swapped qubit pair


def swap_operator() -> Operator:
    """Unitary exchanging the two qubits, |x y> -> |y x>."""
    m = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            m[2 * j + i, 2 * i + j] = 1.0
    return Operator(HilbertSpace((2, 2)), m)


def build_swap_model(
    gamma: float, measurement_strength: float | None = None
) -> tuple[LindbladModel, list[DiffusiveChannel]]:
    """Poisson-swapped qubit pair, optionally with weak sigma-z monitoring.

    The swap enters as a unitary jump operator at rate gamma.  When
    ``measurement_strength`` is given, each qubit gets a population channel
    of that strength and the matching dephasing dissipator, so the returned
    model already contains the full deterministic backaction.
    """
    if gamma < 0:
        raise StateValidationError("gamma must be nonnegative")
    s = swap_operator()
    assert np.allclose((s @ s).matrix, np.eye(4)), "swap must square to identity"
    space = s.space
    dissipators: list[tuple[float, Operator]] = [(gamma, s)]
    channels: list[DiffusiveChannel] = []
    if measurement_strength is not None:
        if measurement_strength <= 0:
            raise StateValidationError("measurement strength must be positive")
        for k in range(2):
            zk = embed(sigma_z(), space, k)
            dissipators.append((measurement_strength, zk))
            channels.append(
                population_difference_channel(zk, measurement_strength, f"z{k + 1}")
            )
    return LindbladModel(space, None, tuple(dissipators)), channels


# ---------------------------------------------------------------------------
# two optical cavities bridged by a damped mechanical mode


@dataclass(frozen=True)
class OptomechParams:
    """Rates of the photon-transfer hardware (all 1/time; nbar dimensionless).

    g couples the cavity exchange to the mechanical displacement; gamma_m
    and nbar describe the mechanical bath.  kappa_probe and gamma_q belong
    to the dispersive read-out qubit and only matter for the reduced
    number-measurement channel; drive metadata for that probe can ride
    along in ``probe_metadata``.
    """

    g: float
    gamma_m: float
    nbar: float
    kappa_probe: float = 0.0
    gamma_q: float = 0.0
    probe_metadata: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("g", "gamma_m", "nbar", "kappa_probe", "gamma_q"):
            if getattr(self, name) < 0:
                raise StateValidationError(f"{name} must be nonnegative")
        if not self.is_adiabatic:
            warnings.warn(
                f"gamma_m * nbar = {self.gamma_m * self.nbar:.3g} is below "
                f"10 g = {10 * self.g:.3g}; adiabatic reduction is unreliable",
                stacklevel=2,
            )

    @property
    def is_adiabatic(self) -> bool:
        return self.gamma_m * self.nbar >= 10.0 * self.g

    @property
    def photon_swap_rate(self) -> float:
        """Effective cavity-exchange rate 4 g^2 / gamma_m."""
        return 4.0 * self.g**2 / self.gamma_m

    @property
    def number_decoherence_rate(self) -> float:
        """Read-out induced dephasing rate 4 kappa^2 / gamma_q."""
        if self.kappa_probe == 0.0:
            return 0.0
        if self.gamma_q <= 0.0:
            raise StateValidationError("gamma_q must be positive when the probe couples")
        return 4.0 * self.kappa_probe**2 / self.gamma_q


@dataclass(frozen=True)
class TwoModeOperators:
    """Frequently used operators on a two-cavity space."""

    space: HilbertSpace
    n1: Operator
    n2: Operator
    total: Operator
    jz: Operator
    j_squared: Operator
    hot_to_cold: Operator  # annihilate in cavity 1, create in cavity 2
    cold_to_hot: Operator


def two_mode_operators(c1: int, c2: int) -> TwoModeOperators:
    a1 = annihilation(c1)
    a2 = annihilation(c2)
    space = HilbertSpace((c1, c2))
    n1 = embed(number_operator(c1), space, 0)
    n2 = embed(number_operator(c2), space, 1)
    total = n1 + n2
    jz = 0.5 * (n1 - n2)
    half_n = 0.5 * total
    j_squared = half_n @ (half_n + Operator(space, np.eye(space.dim, dtype=complex)))
    hot_to_cold = tensor(a1, a2.dag())
    return TwoModeOperators(
        space, n1, n2, total, jz, j_squared, hot_to_cold, hot_to_cold.dag()
    )


def build_optomech_adiabatic(
    params: OptomechParams, sign: str = "plus", cutoffs: tuple[int, int] = (4, 4)
) -> LindbladModel:
    """Reduced two-cavity master equation after eliminating the mechanics.

    For the "plus" resonance the hot-to-cold transfer a1 a2^dag carries rate
    Gamma (nbar + 1) and the reverse carries Gamma nbar, with
    Gamma = 4 g^2 / gamma_m; "minus" exchanges the two (equivalent to
    relabeling the cavities, and opposite net heat flow).
    """
    c1, c2 = cutoffs
    if c1 < 2 or c2 < 2:
        raise CutoffError(f"cavity cutoffs must be >= 2, got {cutoffs}")
    if sign not in ("plus", "minus"):
        raise StateValidationError("sign must be 'plus' or 'minus'")
    ops = two_mode_operators(c1, c2)
    rate = params.photon_swap_rate
    down = (rate * (params.nbar + 1.0), ops.hot_to_cold)
    up = (rate * params.nbar, ops.cold_to_hot)
    dissipators = (down, up) if sign == "plus" else (
        (down[0], ops.cold_to_hot),
        (up[0], ops.hot_to_cold),
    )
    return LindbladModel(ops.space, None, dissipators)


def build_full_optomech(
    params: OptomechParams, cutoffs: tuple[int, int, int]
) -> LindbladModel:
    """Three-mode model: coherent cavity exchange modulated by the mechanics.

    H = g (b a1^dag a2 + b^dag a1 a2^dag) with the mechanical mode damped
    against its thermal bath; cavity decay is not included.  The mechanical
    cutoff must hold a thermal state at nbar within the tail-mass rule.
    """
    c1, c2, cm = cutoffs
    if c1 < 2 or c2 < 2 or cm < 2:
        raise CutoffError(f"cutoffs must be >= 2, got {cutoffs}")
    lam = geometric_weight(params.nbar)
    if lam**cm >= constants.THERMAL_TAIL_MASS:
        raise CutoffError(
            f"mechanical cutoff {cm} leaves tail mass {lam ** cm:.3e} for "
            f"nbar={params.nbar}"
        )
    space = HilbertSpace((c1, c2, cm))
    a1 = embed(annihilation(c1), space, 0)
    a2 = embed(annihilation(c2), space, 1)
    b = embed(annihilation(cm), space, 2)
    exchange = a1.dag() @ a2 @ b
    h = params.g * (exchange + exchange.dag())
    return LindbladModel(
        space,
        h,
        (
            (params.gamma_m * (params.nbar + 1.0), b),
            (params.gamma_m * params.nbar, b.dag()),
        ),
    )


def build_number_measurement(
    model: LindbladModel, decoherence_rate: float, site: int = 0
) -> tuple[LindbladModel, DiffusiveChannel | None]:
    """Attach a continuous photon-number read-out to one cavity.

    Adds the number-dephasing dissipator (rate 2 Lambda, jump n_site), which
    reproduces the double-commutator decoherence -Lambda [n,[n,rho]], plus a
    diffusive channel whose record is dy = <n> dt + dW / sqrt(Lambda).
    Diagonal (number-basis) states are unaffected on average.
    """
    if decoherence_rate < 0:
        raise StateValidationError("decoherence rate must be nonnegative")
    if decoherence_rate == 0.0:
        return model, None
    dim = model.space.dims[site]
    n_op = embed(number_operator(dim), model.space, site)
    extended = model.with_dissipators([(2.0 * decoherence_rate, n_op)])
    channel = photon_number_channel(n_op, decoherence_rate, f"n{site + 1}")
    return extended, channel


# ---------------------------------------------------------------------------
# collective-spin (fixed total photon number) blocks


@dataclass(frozen=True)
class DickeBlock:
    """One conserved-total-photon sector: spin j ladder with thermal rates."""

    j: float
    nbar: float
    rate: float  # the reduced exchange rate 4 g^2 / gamma_m

    def __post_init__(self):
        two_j = round(2 * self.j)
        if two_j < 0 or abs(2 * self.j - two_j) > 1e-12:
            raise DimensionError(f"j must be a half-integer, got {self.j}")
        if self.nbar < 0 or self.rate < 0:
            raise StateValidationError("nbar and rate must be nonnegative")

    @property
    def dim(self) -> int:
        return round(2 * self.j) + 1


def dicke_rates(j: float, m: float) -> tuple[float, float]:
    """Ladder matrix-element factors (down, up) at level m of a spin-j block.

    Multiply by rate*(nbar+1) and rate*nbar respectively to obtain the
    transition rates; both vanish at their end of the ladder.
    """
    two_j, two_m = round(2 * j), round(2 * m)
    if abs(2 * j - two_j) > 1e-12 or abs(2 * m - two_m) > 1e-12:
        raise DimensionError("j and m must be half-integers")
    if abs(two_m) > two_j or (two_j - two_m) % 2 != 0:
        raise DimensionError(f"invalid level m={m} for j={j}")
    j, m = two_j / 2.0, two_m / 2.0
    down = j * (j + 1) - m * (m - 1)
    up = j * (j + 1) - m * (m + 1)
    return down, up


def build_dicke_block_model(block: DickeBlock) -> LindbladModel:
    """Quantum master equation of one block: D[J-] and D[J+] with thermal rates."""
    jp, jm, _ = angular_momentum(block.j)
    return LindbladModel(
        jp.space,
        None,
        (
            (block.rate * (block.nbar + 1.0), jm),
            (block.rate * block.nbar, jp),
        ),
    )


def classical_birth_death(block: DickeBlock) -> np.ndarray:
    """Generator of the diagonal dynamics, states ordered by increasing m.

    Columns sum to zero; dp/dt = G p.  For diagonal initial states this
    chain reproduces the quantum block dynamics exactly.
    """
    dim = block.dim
    j = block.j
    gen = np.zeros((dim, dim))
    for i in range(dim):
        m = i - j
        down, up = dicke_rates(j, m)
        r_down = block.rate * (block.nbar + 1.0) * down
        r_up = block.rate * block.nbar * up
        if i > 0:
            gen[i - 1, i] += r_down
        if i < dim - 1:
            gen[i + 1, i] += r_up
        gen[i, i] -= r_down + r_up
    return gen


def evolve_birth_death(gen: np.ndarray, p0: np.ndarray, times) -> np.ndarray:
    """Exact propagation of dp/dt = G p on a grid via the matrix exponential."""
    times = np.asarray(times, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if p0.ndim != 1 or gen.shape != (p0.size, p0.size):
        raise DimensionError("generator and initial distribution sizes disagree")
    out = np.empty((times.size, p0.size))
    steps = np.diff(times)
    if times.size > 1 and np.max(np.abs(steps - steps[0])) < 1e-12 * max(steps[0], 1.0):
        prop = scipy.linalg.expm(gen * steps[0])
        p = p0.copy()
        out[0] = p
        for i in range(1, times.size):
            p = prop @ p
            out[i] = p
    else:
        for i, t in enumerate(times):
            out[i] = scipy.linalg.expm(gen * (t - times[0])) @ p0
    return out


# ---------------------------------------------------------------------------
# thermal initial-state decomposition over total photon number


@dataclass(frozen=True)
class BlockWeights:
    """Thermal product state resolved into total-photon-number sectors.

    ``pn_total[N]`` is the probability of the N-photon sector (left
    unrenormalized, so it sums to 1 minus the truncation tail) and
    ``p_n_given_total[N][n]`` distributes that sector over n photons in the
    first cavity; each conditional table sums to one.
    """

    pn_total: np.ndarray
    p_n_given_total: tuple[np.ndarray, ...]

    def __post_init__(self):
        if np.any(self.pn_total < 0):
            raise StateValidationError("sector probabilities must be nonnegative")
        for n_tot, table in enumerate(self.p_n_given_total):
            if table.size != n_tot + 1 or np.any(table < 0):
                raise StateValidationError(f"invalid conditional table at N={n_tot}")
            if abs(table.sum() - 1.0) > 1e-10:
                raise StateValidationError(f"conditional table at N={n_tot} not normalized")

    @property
    def n_max(self) -> int:
        return self.pn_total.size - 1

    def joint_distribution(self) -> np.ndarray:
        """p(n1, n2) over the triangle n1 + n2 <= n_max."""
        out = np.zeros((self.n_max + 1, self.n_max + 1))
        for n_tot in range(self.n_max + 1):
            for n1 in range(n_tot + 1):
                out[n1, n_tot - n1] = self.pn_total[n_tot] * self.p_n_given_total[n_tot][n1]
        return out


def initial_block_weights(lambda1: float, lambda2: float, n_max: int) -> BlockWeights:
    """Decompose a product of geometric (thermal) modes by total photon number.

    Sector weights are accumulated from the exact convolution
    sum_n lambda1^n lambda2^(N-n), which is stable for any weights including
    lambda1 = lambda2 (where the conditional table becomes uniform).  The
    reassembled joint distribution therefore reproduces the product of
    geometric laws to machine precision.  The truncation tail above n_max
    must be below the tail-mass rule.
    """
    if not (0 <= lambda1 < 1 and 0 <= lambda2 < 1):
        raise StateValidationError("thermal weights must lie in [0, 1)")
    if n_max < 0:
        raise DimensionError("n_max must be nonnegative")
    prefactor = (1.0 - lambda1) * (1.0 - lambda2)
    pn = np.empty(n_max + 1)
    conditionals = []
    for n_tot in range(n_max + 1):
        w = lambda1 ** np.arange(n_tot + 1) * lambda2 ** np.arange(n_tot, -1, -1)
        total = float(w.sum())
        pn[n_tot] = prefactor * total
        conditionals.append(w / total if total > 0 else np.full(n_tot + 1, 1.0 / (n_tot + 1)))
    tail = 1.0 - float(pn.sum())
    if tail >= constants.THERMAL_TAIL_MASS:
        raise CutoffError(
            f"n_max={n_max} leaves sector tail mass {tail:.3e} >= "
            f"{constants.THERMAL_TAIL_MASS:.0e}"
        )
    return BlockWeights(pn, tuple(conditionals))


def required_block_cutoff(
    lambda1: float, lambda2: float, tail_mass: float = constants.THERMAL_TAIL_MASS
) -> int:
    """Smallest total-photon-number cutoff meeting the sector tail rule."""
    if not (0 <= lambda1 < 1 and 0 <= lambda2 < 1):
        raise StateValidationError("thermal weights must lie in [0, 1)")
    prefactor = (1.0 - lambda1) * (1.0 - lambda2)
    total = 0.0
    n_tot = 0
    while True:
        w = lambda1 ** np.arange(n_tot + 1) * lambda2 ** np.arange(n_tot, -1, -1)
        total += prefactor * float(w.sum())
        if 1.0 - total < tail_mass:
            return n_tot
        n_tot += 1
        if n_tot > 100_000:
            raise CutoffError("sector tail does not converge")


def jz_initial_mean(nbar1: float, nbar2: float) -> float:
    """Initial half photon-number difference of a thermal product state."""
    return 0.5 * (nbar1 - nbar2)


def jz_initial_mean_high_temperature(
    t1: float, omega1: float, t2: float, omega2: float
) -> float:
    """High-temperature form (T1/omega1 - T2/omega2)/2 (k_B = hbar = 1)."""
    return 0.5 * (t1 / omega1 - t2 / omega2)


def thermal_number_moments(nbar1: float, nbar2: float) -> tuple[float, float]:
    """Mean and second moment of the total photon number of a thermal product.

    Uses <n_i^2> = nbar_i + 2 nbar_i^2 per mode, giving
    <N^2> = 2 (nbar1^2 + nbar2^2 + nbar1 nbar2) + (nbar1 + nbar2).
    """
    mean = nbar1 + nbar2
    second = 2.0 * (nbar1**2 + nbar2**2 + nbar1 * nbar2) + mean
    return mean, second


# ---------------------------------------------------------------------------
# semiclassical photon-difference dynamics


def semiclassical_rhs(
    z: float, rate: float, nbar: float, n_total: float, variant: str = "derived"
) -> float:
    """dz/dt of the scaled photon-number difference z = <Jz>/j, j = N/2.

    Two closings of the constant term are available: ``paper`` evaluates
    -(3/2) rate (N+1), ``derived`` evaluates -(3/4) rate (N+2), which is
    what substituting the thermal moments into the exact ladder equation
    gives.  Both share the quadratic and linear terms and collapse to
    -2 rate nbar z when nbar >> N and nbar >> 1.
    """
    if abs(z) > 1.0:
        raise StateValidationError("z must lie in [-1, 1]")
    if variant == "paper":
        constant = -1.5 * rate * (n_total + 1.0)
    elif variant == "derived":
        constant = -0.75 * rate * (n_total + 2.0)
    else:
        raise StateValidationError("variant must be 'paper' or 'derived'")
    return constant + 0.5 * rate * n_total * z**2 - rate * (2.0 * nbar + 1.0) * z


def adjudicate_semiclassical_constant(
    rate: float, nbar1: float, nbar2: float
) -> dict:
    """Compare both constant-term closings against the exact thermal moments.

    The exact constant is -(rate/4) <N(N+2)> / j evaluated with the thermal
    product moments and j = N/2.  Returns the three values and which closing
    is nearer.
    """
    n_mean, n_second = thermal_number_moments(nbar1, nbar2)
    if n_mean <= 0:
        raise StateValidationError("need a nonvacuum thermal product")
    j = 0.5 * n_mean
    exact = -(rate / 4.0) * (n_second + 2.0 * n_mean) / j
    paper = -1.5 * rate * (n_mean + 1.0)
    derived = -0.75 * rate * (n_mean + 2.0)
    err_paper = abs(paper - exact)
    err_derived = abs(derived - exact)
    return {
        "exact": exact,
        "paper": paper,
        "derived": derived,
        "abs_error_paper": err_paper,
        "abs_error_derived": err_derived,
        "winner": "derived" if err_derived <= err_paper else "paper",
    }
