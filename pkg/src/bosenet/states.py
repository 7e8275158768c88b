"""Truncated multimode Fock spaces, operators and states."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import UnsupportedConfigurationError, ValidationError
from .network import NetworkSpec, NormalModeBasis, build_coupling_matrix, diagonalize, symmetric_basis

BASES = ("normal", "natural")
MAX_EXCITATION = 4


@dataclass(frozen=True)
class TruncatedSpace:
    """Tensor product of per-mode Fock spaces {|0>, ..., |d_m - 1>}.

    Flat indices follow C order: mode 0 is the most significant digit, so
    an operator on mode 0 embeds as ``op (x) I (x) ... (x) I``.
    """

    cutoffs: tuple

    def __post_init__(self):
        cutoffs = tuple(int(d) for d in np.atleast_1d(self.cutoffs))
        if not cutoffs:
            raise ValidationError("space needs at least one mode")
        if any(d < 2 for d in cutoffs):
            raise ValidationError(f"every cutoff must be >= 2, got {cutoffs}")
        object.__setattr__(self, "cutoffs", cutoffs)

    @property
    def n_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def dim(self) -> int:
        return math.prod(self.cutoffs)

    def index(self, occupations) -> int:
        occupations = tuple(int(n) for n in occupations)
        if len(occupations) != self.n_modes:
            raise ValidationError(f"expected {self.n_modes} occupations, got {len(occupations)}")
        for n, d in zip(occupations, self.cutoffs):
            if not 0 <= n < d:
                raise ValidationError(f"occupation {occupations} outside cutoffs {self.cutoffs}")
        return int(np.ravel_multi_index(occupations, self.cutoffs))

    def occupations(self, index: int) -> tuple:
        if not 0 <= index < self.dim:
            raise ValidationError(f"index {index} outside space of dimension {self.dim}")
        return tuple(int(n) for n in np.unravel_index(index, self.cutoffs))

    def occupation_table(self) -> np.ndarray:
        """(D, N) integer array; row i holds the occupations of basis state i."""
        grids = np.indices(self.cutoffs).reshape(self.n_modes, -1)
        return grids.T.copy()

    def _check_mode(self, mode):
        if not 0 <= mode < self.n_modes:
            raise ValidationError(f"mode {mode} outside 0..{self.n_modes - 1}")

    def embed(self, op, mode: int):
        """Lift a single-mode operator onto the full space."""
        self._check_mode(mode)
        left = sp.identity(math.prod(self.cutoffs[:mode]), format="csr")
        right = sp.identity(math.prod(self.cutoffs[mode + 1:]), format="csr")
        return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def ladder_ops(space: TruncatedSpace, mode: int):
    """Truncated annihilation and creation operators of ``mode``.

    Returns:
        (a, a_dag) as CSR matrices with a|n> = sqrt(n)|n-1>.
    """
    space._check_mode(mode)
    d = space.cutoffs[mode]
    a1 = sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, shape=(d, d), format="csr")
    a = space.embed(a1, mode)
    return a, a.T.tocsr()


def number_op(space: TruncatedSpace, mode: int):
    space._check_mode(mode)
    d = space.cutoffs[mode]
    return space.embed(sp.diags(np.arange(d, dtype=float), format="csr"), mode)


def selective_ops(space: TruncatedSpace, mode: int, ell: int):
    """Selective lowering |ell><ell+1| and raising |ell+1><ell| on one mode."""
    space._check_mode(mode)
    d = space.cutoffs[mode]
    if ell < 0 or ell + 1 >= d:
        raise ValidationError(f"subspace {{|{ell}>, |{ell + 1}>}} does not fit cutoff {d}")
    low = sp.csr_matrix(([1.0], ([ell], [ell + 1])), shape=(d, d))
    A = space.embed(low, mode)
    return A, A.T.tocsr()


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    space: TruncatedSpace
    basis: str = "normal"

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amps.size != self.space.dim:
            raise ValidationError(f"state has {amps.size} amplitudes, space has {self.space.dim}")
        if self.basis not in BASES:
            raise ValidationError(f"basis must be one of {BASES}, got {self.basis!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def components(self, tol=1e-14):
        """Yield (occupations, amplitude) for non-negligible amplitudes."""
        for i in np.flatnonzero(np.abs(self.amplitudes) > tol):
            yield self.space.occupations(int(i)), self.amplitudes[i]

    def max_excitation(self, tol=1e-14) -> int:
        return max((sum(occ) for occ, _ in self.components(tol)), default=0)

    def projector(self) -> "DensityOperator":
        v = self.amplitudes
        return DensityOperator(np.outer(v, v.conj()), self.space, self.basis)


def fock_state(space: TruncatedSpace, occupations, basis="normal") -> StateVector:
    amps = np.zeros(space.dim, dtype=complex)
    amps[space.index(occupations)] = 1.0
    return StateVector(amps, space, basis)


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    space: TruncatedSpace
    basis: str = "normal"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        D = self.space.dim
        if m.shape != (D, D):
            raise ValidationError(f"density matrix must be {D}x{D}, got {m.shape}")
        if self.basis not in BASES:
            raise ValidationError(f"basis must be one of {BASES}, got {self.basis!r}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))

    def mean_occupations(self) -> np.ndarray:
        return self.populations() @ self.space.occupation_table()

    def check(self, herm_tol=1e-10, trace_tol=1e-8, neg_tol=1e-8):
        """Raise ValidationError unless Hermitian, unit trace and positive."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise ValidationError("density matrix is not Hermitian")
        if abs(self.trace - 1.0) > trace_tol:
            raise ValidationError(f"density matrix trace {self.trace} != 1")
        if self.min_eigenvalue() < -neg_tol:
            raise ValidationError(f"density matrix has eigenvalue {self.min_eigenvalue():.3e}")
        return self


def thermal_state(space: TruncatedSpace, nbar, basis="normal") -> DensityOperator:
    """Product of truncated geometric distributions, renormalized per mode."""
    nbar = np.broadcast_to(np.asarray(nbar, dtype=float), (space.n_modes,))
    if np.any(nbar < 0) or not np.all(np.isfinite(nbar)):
        raise ValidationError("thermal occupations must be finite and non-negative")
    probs = np.ones(1)
    for d, nb in zip(space.cutoffs, nbar):
        p = (nb / (1.0 + nb)) ** np.arange(d)
        probs = np.kron(probs, p / p.sum())
    return DensityOperator(np.diag(probs.astype(complex)), space, basis)


def maximally_mixed(space: TruncatedSpace, basis="normal") -> DensityOperator:
    return DensityOperator(np.eye(space.dim, dtype=complex) / space.dim, space, basis)


def _expand_component(C, occupations):
    """Expand prod_m (A_m^dag)^{n_m} / sqrt(n_m!) |0> into natural Fock amplitudes."""
    n = C.shape[1]
    poly = {(0,) * n: 1.0}
    for m, count in enumerate(occupations):
        for _ in range(count):
            nxt = {}
            for mono, coeff in poly.items():
                for k in range(n):
                    if C[m, k] == 0.0:
                        continue
                    key = mono[:k] + (mono[k] + 1,) + mono[k + 1:]
                    nxt[key] = nxt.get(key, 0.0) + coeff * C[m, k]
            poly = nxt
        poly = {key: c / math.sqrt(math.factorial(count)) for key, c in poly.items()}
    return {key: c * math.sqrt(math.prod(math.factorial(k) for k in key))
            for key, c in poly.items()}


def to_natural_basis(basis: NormalModeBasis, psi: StateVector, max_excitation=MAX_EXCITATION,
                     cutoffs=None) -> StateVector:
    """Re-express a normal-mode Fock-basis state in the natural oscillator basis.

    Each normal-mode creation operator is expanded as
    A_m^dag = sum_n C[m, n] a_n^dag and applied to the vacuum, so total
    excitation number is conserved and the map is unitary on each
    fixed-excitation subspace.

    Args:
        basis: mode transformation; must match ``psi``'s mode count.
        psi: state tagged as ``normal``.
        max_excitation: refuse states holding more quanta than this.
        cutoffs: natural-space cutoffs; by default every mode can hold the
            maximum excitation present in ``psi`` (and at least one quantum).
    """
    if psi.basis != "normal":
        raise ValidationError("to_natural_basis expects a normal-basis state")
    C = basis.C
    if C.shape[0] != psi.space.n_modes:
        raise ValidationError(f"basis has {C.shape[0]} modes, state has {psi.space.n_modes}")
    top = psi.max_excitation()
    if top > max_excitation:
        raise UnsupportedConfigurationError(
            f"state holds {top} quanta, above the supported limit {max_excitation}")
    out_space = TruncatedSpace(cutoffs if cutoffs is not None else (max(top + 1, 2),) * C.shape[1])
    amps = np.zeros(out_space.dim, dtype=complex)
    for occupations, amp in psi.components():
        for key, coeff in _expand_component(C, occupations).items():
            amps[out_space.index(key)] += amp * coeff
    return StateVector(amps, out_space, "natural")


class TargetState(NamedTuple):
    normal: StateVector
    natural: StateVector
    basis: NormalModeBasis


TARGET_KINDS = ("bell_plus", "bell_minus", "noon", "w", "linear_chain")


def target_state(kind: str, n_modes: int | None = None, branch: int | None = None,
                 cutoffs=None, coupling: float = 0.1) -> TargetState:
    """Target entangled state as a normal-mode Fock product and its natural image.

    Args:
        kind: one of ``bell_plus``, ``bell_minus``, ``noon``, ``w``,
            ``linear_chain``.
        n_modes: network size for ``w`` and ``linear_chain``.
        branch: single-excitation branch 1..N for ``linear_chain``.
        cutoffs: normal-space cutoffs; defaults to occupation + 3 per mode.
        coupling: nearest-neighbour coupling used to build the chain's
            normal modes (only its sign matters).
    """
    if kind in ("bell_plus", "bell_minus", "noon"):
        basis = symmetric_basis(2, coupling=coupling)
        occ = {"bell_plus": (1, 0), "bell_minus": (0, 1), "noon": (1, 1)}[kind]
    elif kind == "w":
        if n_modes is None or n_modes < 2:
            raise ValidationError("w target needs n_modes >= 2")
        basis = symmetric_basis(n_modes, coupling=coupling)
        occ = (1,) + (0,) * (n_modes - 1)
    elif kind == "linear_chain":
        if n_modes is None or n_modes < 1:
            raise ValidationError("linear_chain target needs n_modes >= 1")
        if branch is None or not 1 <= branch <= n_modes:
            raise ValidationError(f"branch must lie in 1..{n_modes}, got {branch}")
        if coupling <= 0:
            raise ValidationError("linear_chain ordering assumes a positive coupling")
        basis = diagonalize(build_coupling_matrix(NetworkSpec.linear_chain(n_modes, coupling=coupling)))
        occ = tuple(int(m == branch - 1) for m in range(n_modes))
    else:
        raise ValidationError(f"unknown target kind {kind!r}; expected one of {TARGET_KINDS}")

    space = TruncatedSpace(cutoffs if cutoffs is not None else tuple(n + 3 for n in occ))
    if space.n_modes != len(occ):
        raise ValidationError(f"cutoffs give {space.n_modes} modes, target needs {len(occ)}")
    normal = fock_state(space, occ, "normal")
    return TargetState(normal, to_natural_basis(basis, normal), basis)


def iter_basis_states(space: TruncatedSpace, max_excitation: int):
    """Occupation tuples of ``space`` with at most ``max_excitation`` quanta."""
    ranges = [range(min(d, max_excitation + 1)) for d in space.cutoffs]
    for occ in itertools.product(*ranges):
        if sum(occ) <= max_excitation:
            yield occ
