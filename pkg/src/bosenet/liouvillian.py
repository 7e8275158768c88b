"""Lindblad generators for normal-mode networks.

Superoperators act on column-stacked density matrices:
``vec(rho) = rho.flatten(order="F")``, so ``vec(A rho B) = (B^T kron A) vec(rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .network import NetworkSpec, normal_modes
from .states import DensityOperator, TruncatedSpace, ladder_ops, number_op, selective_ops

CHANNEL_KINDS = (
    "thermal_emission",
    "thermal_absorption",
    "selective_emission",
    "selective_absorption",
    "cooling",
)
SELECTIVE_KINDS = ("selective_emission", "selective_absorption")


@dataclass(frozen=True)
class ChannelSpec:
    """One dissipative channel acting on a normal mode.

    ``rate`` is the full prefactor of the Lindblad term, e.g. gamma (1 + nbar)
    for thermal emission. ``ell`` selects the Fock pair {|ell>, |ell+1>}
    for the selective kinds and is ignored otherwise.
    """

    mode: int
    kind: str
    rate: float
    ell: int | None = None

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValidationError(f"unknown channel kind {self.kind!r}")
        if not np.isfinite(self.rate) or self.rate < 0:
            raise ValidationError(f"channel rate must be finite and >= 0, got {self.rate}")
        if self.mode < 0:
            raise ValidationError(f"channel mode must be >= 0, got {self.mode}")
        if self.kind in SELECTIVE_KINDS:
            if self.ell is None or self.ell < 0:
                raise ValidationError(f"{self.kind} needs a subspace index ell >= 0")
        elif self.ell is not None:
            object.__setattr__(self, "ell", None)

    def jump_operator(self, space: TruncatedSpace):
        if self.kind in ("thermal_emission", "cooling"):
            return ladder_ops(space, self.mode)[0]
        if self.kind == "thermal_absorption":
            return ladder_ops(space, self.mode)[1]
        low, high = selective_ops(space, self.mode, self.ell)
        return low if self.kind == "selective_emission" else high


def thermal_channels(mode: int, gamma: float, nbar: float):
    """Emission and absorption channels of a thermal bath; empty if gamma is 0."""
    if gamma == 0:
        return []
    channels = [ChannelSpec(mode, "thermal_emission", gamma * (1.0 + nbar))]
    if nbar > 0:
        channels.append(ChannelSpec(mode, "thermal_absorption", gamma * nbar))
    return channels


@dataclass(frozen=True)
class GeneratorSpec:
    space: TruncatedSpace
    channels: tuple = ()
    hamiltonian: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        for ch in self.channels:
            if ch.mode >= self.space.n_modes:
                raise ValidationError(
                    f"channel on mode {ch.mode} but space has {self.space.n_modes} modes")
            if ch.kind in SELECTIVE_KINDS and ch.ell + 1 >= self.space.cutoffs[ch.mode]:
                raise ValidationError(
                    f"{ch.kind} ell={ch.ell} does not fit cutoff {self.space.cutoffs[ch.mode]}")
        if self.hamiltonian is not None:
            H = self.hamiltonian.toarray() if sp.issparse(self.hamiltonian) else np.asarray(self.hamiltonian)
            D = self.space.dim
            if H.shape != (D, D):
                raise ValidationError(f"hamiltonian must be {D}x{D}, got {H.shape}")
            if np.max(np.abs(H - H.conj().T)) > 1e-12:
                raise ValidationError("hamiltonian must be Hermitian")
            object.__setattr__(self, "hamiltonian", H)


def dissipator(space: TruncatedSpace, jump, rate: float):
    """Superoperator of rho -> (rate/2)(2 J rho J^dag - rho J^dag J - J^dag J rho)."""
    if rate < 0:
        raise ValidationError(f"dissipator rate must be >= 0, got {rate}")
    J = sp.csr_matrix(jump, dtype=complex)
    D = space.dim
    if J.shape != (D, D):
        raise ValidationError(f"jump operator must be {D}x{D}, got {J.shape}")
    eye = sp.identity(D, dtype=complex, format="csr")
    JdJ = (J.conj().T @ J).tocsr()
    L = rate * sp.kron(J.conj(), J) - 0.5 * rate * (sp.kron(JdJ.T, eye) + sp.kron(eye, JdJ))
    return L.tocsr()


def hamiltonian_superop(H):
    """Superoperator of rho -> -i [H, rho]."""
    H = sp.csr_matrix(H, dtype=complex)
    eye = sp.identity(H.shape[0], dtype=complex, format="csr")
    return (-1j * (sp.kron(eye, H) - sp.kron(H.T, eye))).tocsr()


class Liouvillian:
    """Assembled generator with sparse and matrix-free actions.

    Attributes:
        space: truncated normal-mode space the generator acts on.
        matrix: CSR superoperator of shape (D**2, D**2), column-stacked.
        spec: the generator description it was built from.
    """

    def __init__(self, spec: GeneratorSpec):
        self.spec = spec
        self.space = spec.space
        D = self.space.dim
        L = sp.csr_matrix((D * D, D * D), dtype=complex)
        self._terms = []
        for ch in spec.channels:
            if ch.rate == 0:
                continue
            J = ch.jump_operator(self.space).astype(complex)
            L = L + dissipator(self.space, J, ch.rate)
            self._terms.append((ch.rate, J, (J.conj().T @ J).tocsr()))
        if spec.hamiltonian is not None:
            L = L + hamiltonian_superop(spec.hamiltonian)
        L.sum_duplicates()
        L.eliminate_zeros()
        self.matrix = L.tocsr()
        self.matrix.sort_indices()

    @property
    def dim(self) -> int:
        return self.space.dim

    def apply_vec(self, vec):
        return self.matrix @ vec

    def apply(self, rho):
        """L[rho] for a D x D array via the sparse superoperator."""
        rho = np.asarray(rho, dtype=complex)
        D = self.dim
        return (self.matrix @ rho.reshape(-1, order="F")).reshape((D, D), order="F")

    def apply_matrix_free(self, rho):
        """L[rho] evaluated with D x D operator products, never forming the superoperator."""
        rho = np.asarray(rho, dtype=complex)
        out = np.zeros_like(rho)
        H = self.spec.hamiltonian
        if H is not None:
            out += -1j * (H @ rho - rho @ H)
        for rate, J, JdJ in self._terms:
            Jrho = J @ rho
            out += rate * (J.conj() @ Jrho.T).T
            out -= 0.5 * rate * (JdJ @ rho + (JdJ.T @ rho.T).T)
        return out

    def rate_scale(self) -> float:
        """Largest absolute diagonal entry of the superoperator."""
        return float(np.max(np.abs(self.matrix.diagonal()), initial=0.0))

    def residual(self, rho) -> float:
        """Entrywise max norm of L[rho]."""
        if isinstance(rho, DensityOperator):
            rho = rho.matrix
        return float(np.max(np.abs(self.apply(rho))))


def assemble(gen: GeneratorSpec) -> Liouvillian:
    return Liouvillian(gen)


def number_hamiltonian(space: TruncatedSpace, omega_bar):
    """H_bar = sum_m omega_bar_m A_m^dag A_m as a dense matrix."""
    omega_bar = np.asarray(omega_bar, dtype=float)
    if omega_bar.size != space.n_modes:
        raise ValidationError(f"{omega_bar.size} frequencies for {space.n_modes} modes")
    H = sum(w * number_op(space, m) for m, w in enumerate(omega_bar))
    return np.asarray(H.toarray(), dtype=complex)


def network_generator(spec: NetworkSpec, engineered, cutoffs, with_hamiltonian=False) -> GeneratorSpec:
    """Thermal normal-mode channels of ``spec`` plus the ``engineered`` ones."""
    basis = normal_modes(spec)
    space = TruncatedSpace(cutoffs)
    if space.n_modes != spec.n_modes:
        raise ValidationError(f"{space.n_modes} cutoffs for a {spec.n_modes}-mode network")
    channels = []
    for m in range(spec.n_modes):
        channels += thermal_channels(m, float(basis.gamma_bar[m]), float(basis.nbar_bar[m]))
    channels += [ch for ch in engineered if ch.rate > 0]
    H = number_hamiltonian(space, basis.omega_bar) if with_hamiltonian else None
    return GeneratorSpec(space, tuple(channels), H)


def bell_generator(gamma0, gamma=1.0, nbar=0.05, cutoffs=(4, 4), coupling=0.1,
                   with_hamiltonian=False) -> GeneratorSpec:
    """Two cavities with selective absorption |0> -> |1> engineered on the upper mode."""
    spec = NetworkSpec.symmetric(2, coupling=coupling, gamma=gamma, nbar=nbar)
    engineered = [ChannelSpec(0, "selective_absorption", gamma0, ell=0)]
    return network_generator(spec, engineered, cutoffs, with_hamiltonian)


def bell_full_generator(gamma_plus1, gamma_plus0, gamma_minus, gamma=1.0, nbar=0.05,
                        cutoffs=(4, 4), coupling=0.1, with_hamiltonian=False) -> GeneratorSpec:
    """Bell generator with selective emission |2> -> |1> on the upper mode and
    cooling of the lower mode added."""
    spec = NetworkSpec.symmetric(2, coupling=coupling, gamma=gamma, nbar=nbar)
    engineered = [
        ChannelSpec(0, "selective_emission", gamma_plus1, ell=1),
        ChannelSpec(0, "selective_absorption", gamma_plus0, ell=0),
        ChannelSpec(1, "cooling", gamma_minus),
    ]
    return network_generator(spec, engineered, cutoffs, with_hamiltonian)


def noon_generator(gamma_plus0, gamma_minus0, gamma_plus1=0.0, gamma_minus1=0.0, gamma=1.0,
                   nbar=0.05, cutoffs=(4, 4), coupling=0.1, with_hamiltonian=False) -> GeneratorSpec:
    """Both normal modes driven into |1>; optional selective emission from |2>."""
    spec = NetworkSpec.symmetric(2, coupling=coupling, gamma=gamma, nbar=nbar)
    engineered = [
        ChannelSpec(0, "selective_absorption", gamma_plus0, ell=0),
        ChannelSpec(1, "selective_absorption", gamma_minus0, ell=0),
        ChannelSpec(0, "selective_emission", gamma_plus1, ell=1),
        ChannelSpec(1, "selective_emission", gamma_minus1, ell=1),
    ]
    return network_generator(spec, engineered, cutoffs, with_hamiltonian)


def w_generator(n_modes, gamma10, gamma_j, gamma=1.0, nbar=0.05, cutoffs=None, coupling=0.1,
                with_hamiltonian=False) -> GeneratorSpec:
    """Symmetric N-cavity network: |1> on the collective mode, vacuum elsewhere.

    Only the collective mode loses energy to the natural baths (at rate
    N * gamma), so the degenerate modes get engineered cooling and no
    thermal terms.
    """
    if n_modes < 2:
        raise ValidationError(f"w_generator needs N >= 2, got {n_modes}")
    if cutoffs is None:
        cutoffs = (4,) + (3,) * (n_modes - 1)
    spec = NetworkSpec.symmetric(n_modes, coupling=coupling, gamma=gamma, nbar=nbar)
    engineered = [ChannelSpec(0, "selective_absorption", gamma10, ell=0)]
    engineered += [ChannelSpec(j, "cooling", gamma_j) for j in range(1, n_modes)]
    return network_generator(spec, engineered, cutoffs, with_hamiltonian)


def linear_chain_generator(n_modes, branch, gamma_select, gamma_cool, gamma=1.0, nbar=0.05,
                           cutoffs=None, coupling=0.1, with_hamiltonian=False) -> GeneratorSpec:
    """Open chain: |1> in the sine mode ``branch`` (1-based), other modes cooled."""
    if not 1 <= branch <= n_modes:
        raise ValidationError(f"branch must lie in 1..{n_modes}, got {branch}")
    if coupling <= 0:
        raise ValidationError("linear chain mode ordering assumes a positive coupling")
    target = branch - 1
    if cutoffs is None:
        cutoffs = tuple(4 if m == target else 3 for m in range(n_modes))
    spec = NetworkSpec.linear_chain(n_modes, coupling=coupling, gamma=gamma, nbar=nbar)
    engineered = [ChannelSpec(target, "selective_absorption", gamma_select, ell=0)]
    engineered += [ChannelSpec(m, "cooling", gamma_cool) for m in range(n_modes) if m != target]
    return network_generator(spec, engineered, cutoffs, with_hamiltonian)
