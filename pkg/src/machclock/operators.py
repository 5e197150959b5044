"""Operator and state algebra on finite tensor-product Hilbert spaces.

Dense complex matrices throughout.  Spaces are ordered lists of subsystem
dimensions; operators and density matrices carry their space so that
mismatched combinations fail loudly instead of broadcasting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import constants
from .errors import (
    CutoffError,
    DimensionError,
    SpaceMismatchError,
    StateValidationError,
)


@dataclass(frozen=True)
class HilbertSpace:
    """An ordered tensor product of finite-dimensional subsystems."""

    dims: tuple[int, ...]

    def __init__(self, dims, max_dim: int = constants.MAX_TOTAL_DIM):
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"subsystem dimensions must be >= 1, got {dims}")
        total = int(np.prod(dims))
        if total > max_dim:
            raise DimensionError(
                f"total dimension {total} exceeds the cap {max_dim}"
            )
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)


def _as_square_complex(matrix, dim: int) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (dim, dim):
        raise DimensionError(f"matrix shape {m.shape} does not match dimension {dim}")
    return m


@dataclass(frozen=True)
class Operator:
    """A dense operator tagged with its Hilbert space."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_square_complex(self.matrix, self.space.dim))
        self.matrix.setflags(write=False)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = constants.HERMITICITY_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def expect(self, rho: "DensityMatrix") -> complex:
        if rho.space != self.space:
            raise SpaceMismatchError("operator and state live on different spaces")
        return complex(np.trace(self.matrix @ rho.matrix))

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.space != other.space:
            raise SpaceMismatchError("cannot multiply operators on different spaces")
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        if self.space != other.space:
            raise SpaceMismatchError("cannot add operators on different spaces")
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        if self.space != other.space:
            raise SpaceMismatchError("cannot subtract operators on different spaces")
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True)
class DensityMatrix:
    """A Hermitian, unit-trace, positive operator; validated on construction."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _as_square_complex(self.matrix, self.space.dim)
        if np.max(np.abs(m - m.conj().T)) > constants.HERMITICITY_TOL:
            raise StateValidationError("density matrix is not Hermitian to tolerance")
        tr = np.trace(m)
        if abs(tr - 1.0) > constants.TRACE_TOL:
            raise StateValidationError(f"density matrix trace {tr} is not 1 to tolerance")
        lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
        if lo < constants.STATE_EIGENVALUE_FLOOR:
            raise StateValidationError(f"density matrix has eigenvalue {lo} below floor")
        object.__setattr__(self, "matrix", m)
        self.matrix.setflags(write=False)

    def expect(self, op: Operator) -> complex:
        return op.expect(self)


# ---------------------------------------------------------------------------
# standard operators


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim, dtype=complex))


def annihilation(dim: int) -> Operator:
    """Bosonic lowering operator on a truncated Fock space.

    Entries sqrt(n) on the first superdiagonal.  On the truncated space
    [a, a^dag] = 1 everywhere except the top Fock level, where the diagonal
    defect is 1 - dim (inherent to any finite truncation).
    """
    if dim < 2:
        raise DimensionError(f"annihilation needs dim >= 2, got {dim}")
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    return Operator(HilbertSpace((dim,)), a)


def number_operator(dim: int) -> Operator:
    if dim < 1:
        raise DimensionError(f"number operator needs dim >= 1, got {dim}")
    return Operator(HilbertSpace((dim,)), np.diag(np.arange(dim, dtype=float)).astype(complex))


_QUBIT = HilbertSpace((2,))

# Qubit basis order is (excited, ground), so sigma_z = diag(1, -1).


def sigma_x() -> Operator:
    return Operator(_QUBIT, np.array([[0, 1], [1, 0]], dtype=complex))


def sigma_y() -> Operator:
    return Operator(_QUBIT, np.array([[0, -1j], [1j, 0]], dtype=complex))


def sigma_z() -> Operator:
    return Operator(_QUBIT, np.array([[1, 0], [0, -1]], dtype=complex))


def sigma_plus() -> Operator:
    """|e><g| in the (excited, ground) basis."""
    return Operator(_QUBIT, np.array([[0, 1], [0, 0]], dtype=complex))


def sigma_minus() -> Operator:
    """|g><e| in the (excited, ground) basis."""
    return Operator(_QUBIT, np.array([[0, 0], [1, 0]], dtype=complex))


def angular_momentum(j) -> tuple[Operator, Operator, Operator]:
    """Spin-j ladder and z operators (J+, J-, Jz) on a (2j+1)-dim irrep.

    Basis is ordered by decreasing magnetic number m = j, j-1, ..., -j, so
    j = 1/2 reproduces the Pauli conventions (sigma+, sigma-, sigma_z / 2).
    """
    two_j = round(2 * float(j))
    if two_j < 0 or abs(2 * float(j) - two_j) > 1e-12:
        raise DimensionError(f"j must be a non-negative half-integer, got {j}")
    j = two_j / 2.0
    dim = two_j + 1
    space = HilbertSpace((dim,))
    m = j - np.arange(dim)
    jz = np.diag(m).astype(complex)
    # J+|j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>; row index m+1 sits above m.
    raise_amp = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp = np.zeros((dim, dim), dtype=complex)
    jp[np.arange(dim - 1), np.arange(1, dim)] = raise_amp
    return Operator(space, jp), Operator(space, jp.conj().T), Operator(space, jz)


def tensor(*ops: Operator) -> Operator:
    if not ops:
        raise DimensionError("tensor() needs at least one operator")
    dims = sum((op.space.dims for op in ops), ())
    mat = reduce(np.kron, (op.matrix for op in ops))
    return Operator(HilbertSpace(dims), mat)


def embed(op: Operator, space: HilbertSpace, site: int) -> Operator:
    """Lift a single-subsystem operator onto `site` of a product space."""
    if site < 0 or site >= space.n_subsystems:
        raise DimensionError(f"site {site} outside space with {space.n_subsystems} parts")
    if op.space.dim != space.dims[site]:
        raise SpaceMismatchError(
            f"operator dim {op.space.dim} does not match subsystem dim {space.dims[site]}"
        )
    mats = [np.eye(d, dtype=complex) for d in space.dims]
    mats[site] = op.matrix
    return Operator(space, reduce(np.kron, mats))


def product_state(*states: DensityMatrix) -> DensityMatrix:
    dims = sum((s.space.dims for s in states), ())
    mat = reduce(np.kron, (s.matrix for s in states))
    return DensityMatrix(HilbertSpace(dims), mat)


# ---------------------------------------------------------------------------
# superoperator actions


def _require_same_space(a: Operator, rho) -> None:
    if a.space != rho.space:
        raise SpaceMismatchError("operator and state live on different spaces")


def dissipator(a: Operator, rho: DensityMatrix) -> Operator:
    """Lindblad dissipation term A rho A^dag - (A^dag A rho + rho A^dag A)/2."""
    _require_same_space(a, rho)
    m, r = a.matrix, rho.matrix
    ada = m.conj().T @ m
    out = m @ r @ m.conj().T - 0.5 * (ada @ r + r @ ada)
    return Operator(a.space, out)


def innovation(a: Operator, rho: DensityMatrix) -> Operator:
    """Measurement conditioning term A rho + rho A^dag - tr[(A + A^dag) rho] rho.

    Traceless by construction; vanishes when rho is an eigenstate of a
    Hermitian A.
    """
    _require_same_space(a, rho)
    m, r = a.matrix, rho.matrix
    mean = np.trace((m + m.conj().T) @ r)
    out = m @ r + r @ m.conj().T - mean * r
    return Operator(a.space, out)


# ---------------------------------------------------------------------------
# thermal states


def thermal_qubit(beta_eps: float) -> DensityMatrix:
    """Two-level Gibbs state diag(p_e, p_g) at dimensionless beta*epsilon."""
    if not np.isfinite(beta_eps):
        raise StateValidationError("beta_eps must be finite")
    p_e = 0.5 * (1.0 + np.tanh(-beta_eps / 2.0))
    return DensityMatrix(_QUBIT, np.diag([p_e, 1.0 - p_e]).astype(complex))


def geometric_weight(nbar: float) -> float:
    """Boltzmann weight lambda = nbar / (nbar + 1) of a thermal mode."""
    if nbar < 0:
        raise StateValidationError(f"nbar must be >= 0, got {nbar}")
    return nbar / (nbar + 1.0)


def required_cutoff(nbar: float, tail: float = constants.THERMAL_TAIL_MASS) -> int:
    """Smallest Fock dimension leaving less than `tail` thermal mass above it."""
    lam = geometric_weight(nbar)
    if lam == 0.0:
        return 1
    cutoff = int(np.ceil(np.log(tail) / np.log(lam)))
    while lam**cutoff >= tail:
        cutoff += 1
    return cutoff


def thermal_mode(nbar: float, cutoff: int) -> DensityMatrix:
    """Truncated geometric (thermal) state of a bosonic mode.

    `cutoff` is the dimension of the truncated space; the mass beyond it,
    lambda**cutoff, must be below the tail-mass rule or CutoffError is raised.
    The retained weights are renormalized.
    """
    if cutoff < 1:
        raise DimensionError(f"cutoff must be >= 1, got {cutoff}")
    lam = geometric_weight(nbar)
    tail = lam**cutoff
    if tail >= constants.THERMAL_TAIL_MASS:
        raise CutoffError(
            f"cutoff {cutoff} leaves tail mass {tail:.3e} >= "
            f"{constants.THERMAL_TAIL_MASS:.0e} for nbar={nbar}"
        )
    weights = (1.0 - lam) * lam ** np.arange(cutoff)
    weights /= weights.sum()
    return DensityMatrix(HilbertSpace((cutoff,)), np.diag(weights).astype(complex))


def fock_state(n: int, cutoff: int) -> DensityMatrix:
    if not 0 <= n < cutoff:
        raise DimensionError(f"Fock level {n} outside dimension {cutoff}")
    m = np.zeros((cutoff, cutoff), dtype=complex)
    m[n, n] = 1.0
    return DensityMatrix(HilbertSpace((cutoff,)), m)


# ---------------------------------------------------------------------------
# reductions and distances


def partial_trace(rho: DensityMatrix, keep: tuple[int, ...]) -> DensityMatrix:
    """Trace out all subsystems not listed in `keep` (order preserved)."""
    keep = tuple(keep)
    dims = rho.space.dims
    n = len(dims)
    if any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise DimensionError(f"invalid subsystems {keep} for {n}-part space")
    if tuple(sorted(keep)) != keep:
        raise DimensionError("keep indices must be sorted; reordering is not supported")
    t = rho.matrix.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    for count, i in enumerate(traced):
        axis = i - sum(1 for j in traced[:count] if j < i)
        t = np.trace(t, axis1=axis, axis2=axis + t.ndim // 2)
    d = int(np.prod([dims[k] for k in keep]))
    return DensityMatrix(HilbertSpace(tuple(dims[k] for k in keep)), t.reshape(d, d))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.space != sigma.space:
        raise SpaceMismatchError("states live on different spaces")
    diff = rho.matrix - sigma.matrix
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.space != sigma.space:
        raise SpaceMismatchError("states live on different spaces")
    vals, vecs = np.linalg.eigh(rho.matrix)
    vals = np.clip(vals, 0.0, None)
    sqrt_rho = (vecs * np.sqrt(vals)) @ vecs.conj().T
    inner = sqrt_rho @ sigma.matrix @ sqrt_rho
    ivals = np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.conj().T)), 0.0, None)
    return float(np.sum(np.sqrt(ivals)) ** 2)
