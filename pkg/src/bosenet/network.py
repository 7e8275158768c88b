"""Coupled-oscillator networks and their normal-mode decomposition.

Frequencies and rates are expressed in units of a reference loss rate
(gamma_ref = 1), so times come out as gamma * t.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedConfigurationError, ValidationError

SYMMETRY_TOL = 1e-12
DEGENERACY_TOL = 1e-9


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NetworkSpec:
    """Natural-basis description of N coupled lossy oscillators.

    Attributes:
        omega: mode frequencies, shape (N,).
        coupling: symmetric (N, N) matrix of coupling strengths with zero
            diagonal.
        gamma: natural loss rate of each oscillator.
        nbar: thermal occupation of each oscillator's bath.
    """

    omega: np.ndarray
    coupling: np.ndarray
    gamma: np.ndarray
    nbar: np.ndarray

    def __post_init__(self):
        omega = np.atleast_1d(_frozen(self.omega))
        n = omega.size
        coupling = _frozen(self.coupling)
        if coupling.size == n * n:
            coupling = _frozen(coupling.reshape(n, n))
        gamma = np.atleast_1d(_frozen(np.broadcast_to(self.gamma, (n,))))
        nbar = np.atleast_1d(_frozen(np.broadcast_to(self.nbar, (n,))))
        if n < 1:
            raise ValidationError("network needs at least one mode")
        if coupling.shape != (n, n):
            raise ValidationError(f"coupling must be {n}x{n}, got {coupling.shape}")
        if not np.all(np.isfinite(omega)):
            raise ValidationError("frequencies must be finite")
        if not np.all(np.isfinite(coupling)):
            raise ValidationError("couplings must be finite")
        if np.any(np.diag(coupling) != 0.0):
            raise ValidationError("coupling matrix must have zero diagonal")
        if np.max(np.abs(coupling - coupling.T), initial=0.0) > SYMMETRY_TOL:
            raise ValidationError("coupling matrix must be symmetric")
        if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
            raise ValidationError("loss rates must be finite and non-negative")
        if np.any(nbar < 0) or not np.all(np.isfinite(nbar)):
            raise ValidationError("thermal occupations must be finite and non-negative")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "nbar", nbar)

    @property
    def n_modes(self) -> int:
        return self.omega.size

    @classmethod
    def symmetric(cls, n_modes, omega=1.0, coupling=0.1, gamma=1.0, nbar=0.05):
        """All-to-all network with identical frequencies and couplings."""
        lam = np.full((n_modes, n_modes), float(coupling))
        np.fill_diagonal(lam, 0.0)
        return cls(np.full(n_modes, float(omega)), lam, gamma, nbar)

    @classmethod
    def linear_chain(cls, n_modes, omega=1.0, coupling=0.1, gamma=1.0, nbar=0.05):
        """Open chain with nearest-neighbour coupling only."""
        lam = np.zeros((n_modes, n_modes))
        idx = np.arange(n_modes - 1)
        lam[idx, idx + 1] = lam[idx + 1, idx] = float(coupling)
        return cls(np.full(n_modes, float(omega)), lam, gamma, nbar)


@dataclass(frozen=True)
class NormalModeBasis:
    """Orthogonal mode transformation A_m = sum_n C[m, n] a_n.

    Row m of ``C`` is the eigenvector of normal mode m. The loss rates and
    occupations are filled in by :func:`transform_rates` and are ``None``
    for a bare diagonalization.
    """

    C: np.ndarray
    omega_bar: np.ndarray
    gamma_bar: np.ndarray | None = field(default=None)
    nbar_bar: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "C", _frozen(self.C))
        object.__setattr__(self, "omega_bar", _frozen(self.omega_bar))
        for name in ("gamma_bar", "nbar_bar"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen(value))

    @property
    def n_modes(self) -> int:
        return self.omega_bar.size

    def with_rates(self, gamma_bar, nbar_bar) -> "NormalModeBasis":
        return NormalModeBasis(self.C, self.omega_bar, gamma_bar, nbar_bar)


def build_coupling_matrix(spec: NetworkSpec) -> np.ndarray:
    """Single-particle matrix H[m, n] = omega_m delta_mn + lambda_mn (1 - delta_mn)."""
    if np.max(np.abs(spec.coupling - spec.coupling.T), initial=0.0) > SYMMETRY_TOL:
        raise ValidationError("coupling matrix must be symmetric")
    H = np.array(spec.coupling, dtype=float)
    np.fill_diagonal(H, spec.omega)
    return H


def _is_symmetric_network(H):
    n = H.shape[0]
    if n < 2:
        return False
    diag = np.diag(H)
    off = H[~np.eye(n, dtype=bool)]
    return bool(np.ptp(diag) <= SYMMETRY_TOL and np.ptp(off) <= SYMMETRY_TOL)


def _sign_fix(v, tol=1e-12):
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def _gram_schmidt(candidates, projector, size, tol=1e-8):
    out = []
    for c in candidates:
        v = projector @ c
        for u in out:
            v = v - (u @ v) * u
        norm = np.linalg.norm(v)
        if norm > tol:
            out.append(v / norm)
        if len(out) == size:
            break
    if len(out) != size:
        raise ValidationError("failed to span degenerate eigenspace")
    return out


def diagonalize(H) -> NormalModeBasis:
    """Orthogonally diagonalize a real symmetric single-particle matrix.

    Rows of the returned ``C`` are ordered by descending eigenvalue and each
    row has a positive first non-negligible component. Degenerate blocks are
    resolved deterministically: for an all-to-all symmetric network the
    closed-form basis of :func:`symmetric_basis` is projected into the block
    and orthonormalized; otherwise the block projector is applied to the
    standard basis vectors in order, orthonormalized, and the resulting rows
    sorted in descending lexicographic order.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {H.shape}")
    if np.max(np.abs(H - H.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(H))):
        raise ValidationError("matrix must be symmetric")
    n = H.shape[0]
    evals, evecs = np.linalg.eigh(H)
    evals, evecs = evals[::-1], evecs[:, ::-1]

    scale = max(1.0, float(np.max(np.abs(evals))))
    reference = symmetric_basis(n).C if _is_symmetric_network(H) else None

    rows = []
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and abs(evals[stop] - evals[start]) <= DEGENERACY_TOL * scale:
            stop += 1
        block = evecs[:, start:stop]
        size = stop - start
        if size == 1:
            block_rows = [_sign_fix(block[:, 0])]
        else:
            projector = block @ block.T
            if reference is not None:
                candidates = [r for r in reference if np.linalg.norm(projector @ r) > 0.5]
                candidates += list(np.eye(n))
                block_rows = [_sign_fix(v) for v in _gram_schmidt(candidates, projector, size)]
            else:
                block_rows = [_sign_fix(v) for v in _gram_schmidt(np.eye(n), projector, size)]
                block_rows.sort(key=lambda v: tuple(np.round(v, 12)), reverse=True)
        rows.extend(block_rows)
        start = stop

    C = np.array(rows)
    # eigenvalues recomputed from the final rows keep C H C^T and omega_bar consistent
    omega_bar = np.einsum("mi,ij,mj->m", C, H, C)
    return NormalModeBasis(C, omega_bar)


def symmetric_basis(n_modes: int, omega: float = 1.0, coupling: float = 0.0) -> NormalModeBasis:
    """Closed-form normal modes of an all-to-all network of identical oscillators.

    Row 0 is the uniform superposition; row j (j >= 1) is
    (a_1 + ... + a_j - j a_{j+1}) / sqrt(j (j + 1)).

    Args:
        n_modes: number of oscillators, at least 2.
        omega: shared natural frequency.
        coupling: shared pairwise coupling.

    Returns:
        NormalModeBasis with frequencies omega + (N-1) coupling for the
        uniform mode and omega - coupling for the rest.
    """
    if n_modes < 2:
        raise ValidationError(f"symmetric basis needs N >= 2, got {n_modes}")
    C = np.zeros((n_modes, n_modes))
    C[0] = 1.0 / np.sqrt(n_modes)
    for j in range(2, n_modes + 1):
        C[j - 1, : j - 1] = 1.0
        C[j - 1, j - 1] = -(j - 1)
        C[j - 1] /= np.sqrt(j * (j - 1))
    omega_bar = np.full(n_modes, omega - coupling)
    omega_bar[0] = omega + (n_modes - 1) * coupling
    return NormalModeBasis(C, omega_bar)


def transform_rates(spec: NetworkSpec, basis: NormalModeBasis):
    """Normal-mode loss rates and bath occupations, assuming no cross-decay.

    For a degenerate all-to-all network with identical reservoirs only the
    uniform mode dissipates, at rate N * gamma; the degenerate modes carry
    none. Otherwise each normal mode inherits the rate-weighted mixture
    ``gamma_bar_m = sum_n C[m, n]**2 gamma_n`` (which reduces to gamma for
    identical reservoirs) with the matching occupation average.

    Raises:
        ValidationError: mode counts differ.
        UnsupportedConfigurationError: degenerate normal modes combined with
            non-identical reservoirs.
    """
    n = spec.n_modes
    if basis.n_modes != n or basis.C.shape != (n, n):
        raise ValidationError(f"basis has {basis.n_modes} modes, network has {n}")
    gamma, nbar = spec.gamma, spec.nbar
    homogeneous = np.ptp(gamma) == 0.0 and np.ptp(nbar) == 0.0

    w = basis.omega_bar
    scale = max(1.0, float(np.max(np.abs(w))))
    gaps = np.where(np.eye(n, dtype=bool), np.inf, np.abs(w[:, None] - w[None, :]))
    degenerate = bool(n > 1 and np.min(gaps) <= DEGENERACY_TOL * scale)

    if degenerate and not homogeneous:
        raise UnsupportedConfigurationError(
            "degenerate normal modes with non-identical reservoirs are not supported")

    H = build_coupling_matrix(spec)
    if degenerate and _is_symmetric_network(H) and np.any(spec.coupling != 0.0):
        uniform = np.full(n, 1.0 / np.sqrt(n))
        overlap = np.abs(basis.C @ uniform)
        collective = int(np.argmax(overlap))
        if not np.isclose(overlap[collective], 1.0, atol=1e-9):
            raise ValidationError("basis does not contain the uniform collective mode")
        gamma_bar = np.zeros(n)
        gamma_bar[collective] = n * gamma[0]
        return gamma_bar, np.full(n, nbar[0])

    weights = basis.C ** 2
    gamma_bar = weights @ gamma
    flux = weights @ (gamma * nbar)
    with np.errstate(invalid="ignore", divide="ignore"):
        nbar_bar = np.where(gamma_bar > 0, flux / np.where(gamma_bar > 0, gamma_bar, 1.0),
                            weights @ nbar)
    return gamma_bar, nbar_bar


def normal_modes(spec: NetworkSpec) -> NormalModeBasis:
    """Diagonalize ``spec`` and attach its normal-mode rates."""
    basis = diagonalize(build_coupling_matrix(spec))
    return basis.with_rates(*transform_rates(spec, basis))
