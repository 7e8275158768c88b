"""Atomic-beam reservoir engineering of selective normal-mode channels.

Drive parameters are angular frequencies in rad/s and times in seconds.
The effective dispersive model of a driven three-level atom crossing the
cavity gives a dispersive shift ``xi``, a Raman coupling ``zeta`` and laser
level shifts; tuning the first laser puts exactly one Fock transition
|ell> <-> |ell+1> on resonance. A beam of such atoms arriving at rate ``r``
and interacting for a time ``tau`` each acts on the mode as a Lindblad
channel of rate ``r (zeta_ell tau)**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la

from .errors import DiagnosticError, ValidationError
from .liouvillian import ChannelSpec

MUCH_GREATER = 10.0
PHASE_TOL = 1e-12


@dataclass(frozen=True)
class DriveParams:
    """Atom-field drive settings for one engineered channel.

    ``delta`` is the selectivity detuning; when omitted it is taken as
    ``Delta - Delta2``. It is kept as an independent field so a tuning can
    set it without re-solving for ``Delta2``.
    """

    Omega0: complex
    Omega1: complex
    Omega2: complex
    Delta: float
    Delta1: float
    Delta2: float
    r: float
    tau: float
    delta: float | None = None
    ell_target: int = 0
    lam: float | None = None

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", self.Delta - self.Delta2)
        if self.ell_target < 0:
            raise ValidationError(f"ell_target must be >= 0, got {self.ell_target}")
        if self.r < 0 or self.tau < 0:
            raise ValidationError("arrival rate and transit time must be non-negative")

    @classmethod
    def microwave_regime(cls, Omega0=5e5, lam=None, ell_target=0):
        """Microwave cavity-QED operating point: Delta = Delta1 = 1.01 Delta2 = 10|Omega0|,
        |Omega1| = 10|Omega2| = |Omega0|, 1/r = tau = 100/|Omega0|."""
        Delta = 10.0 * abs(Omega0)
        return cls(
            Omega0=Omega0,
            Omega1=abs(Omega0),
            Omega2=abs(Omega0) / 10.0,
            Delta=Delta,
            Delta1=Delta,
            Delta2=Delta / 1.01,
            r=abs(Omega0) / 100.0,
            tau=100.0 / abs(Omega0),
            ell_target=ell_target,
            lam=lam,
        )


@dataclass(frozen=True)
class EffectiveCouplings:
    xi: float
    zeta: complex
    varpi_g: float
    varpi_e: float
    delta: float

    def zeta_n(self, n: int) -> complex:
        return math.sqrt(n + 1) * self.zeta

    def phi_n(self, n: int) -> float:
        return ((n + 1) * self.xi - self.varpi_g) + (self.delta - self.varpi_e)


def _nonzero(p, *names):
    for name in names:
        if getattr(p, name) == 0:
            raise ValidationError(f"detuning {name} is zero; effective couplings divide by it")


def effective_couplings(p: DriveParams) -> EffectiveCouplings:
    """Dispersive shift, Raman coupling and laser level shifts of ``p``."""
    _nonzero(p, "Delta", "Delta1", "Delta2")
    xi = abs(p.Omega0) ** 2 / (p.Delta * math.sqrt(2.0))
    zeta = math.sqrt(2.0) * np.conj(p.Omega0) * p.Omega2 * (1.0 / p.Delta + 1.0 / p.Delta2) / 4.0
    return EffectiveCouplings(
        xi=xi,
        zeta=complex(zeta),
        varpi_g=abs(p.Omega1) ** 2 / p.Delta1,
        varpi_e=abs(p.Omega2) ** 2 / p.Delta2,
        delta=float(p.delta),
    )


@dataclass(frozen=True)
class SelectivityTuning:
    """Laser settings putting |ell> <-> |ell+1> on resonance.

    ``omega1`` zeroes phi_ell given the dispersive shift; ``omega1_closed_form``
    is sqrt((ell+1) Delta1/Delta)|Omega0|, the shorthand that drops the
    sqrt(2) of the shift and is reported for comparison only.
    """

    ell: int
    omega1: float
    omega1_closed_form: float
    delta: float
    params: DriveParams


def selectivity_tuning(p: DriveParams, ell: int) -> SelectivityTuning:
    if ell < 0:
        raise ValidationError(f"ell must be >= 0, got {ell}")
    c = effective_couplings(p)
    target_shift = (ell + 1) * c.xi
    sq = target_shift * p.Delta1
    if sq < 0:
        raise ValidationError("Delta1 and Delta must share a sign to cancel the dispersive shift")
    omega1 = math.sqrt(sq)
    phase = np.exp(1j * np.angle(p.Omega1)) if p.Omega1 != 0 else 1.0
    tuned = replace(p, Omega1=omega1 * phase, delta=c.varpi_e, ell_target=ell)
    closed = math.sqrt((ell + 1) * p.Delta1 / p.Delta) * abs(p.Omega0)
    return SelectivityTuning(ell, omega1, closed, c.varpi_e, tuned)


def engineered_rate(p: DriveParams, ell: int) -> float:
    """Coarse-grained rate r (|zeta_ell| tau)**2 of the channel on {|ell>, |ell+1>}."""
    c = effective_couplings(p)
    return p.r * (abs(c.zeta_n(ell)) * p.tau) ** 2


@dataclass(frozen=True)
class RegimeCheck:
    """One 'much less than' inequality ``lhs << rhs``; ratio = rhs / lhs."""

    name: str
    kind: str
    lhs: float
    rhs: float
    ratio: float
    passed: bool


@dataclass
class RegimeReport:
    checks: list = field(default_factory=list)
    threshold: float = MUCH_GREATER

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def of_kind(self, kind):
        return [c for c in self.checks if c.kind == kind]

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "checks": [
                {"name": c.name, "kind": c.kind, "lhs": c.lhs, "rhs": c.rhs,
                 "ratio": c.ratio, "passed": c.passed}
                for c in self.checks
            ],
        }


def _check(name, kind, small, large, threshold):
    small, large = abs(float(small)), abs(float(large))
    ratio = math.inf if small == 0 else large / small
    return RegimeCheck(name, kind, small, large, ratio, ratio >= threshold)


def validate_regime(p: DriveParams, n_max: int | None = None,
                    threshold: float = MUCH_GREATER) -> RegimeReport:
    """Evaluate every validity inequality of the effective model.

    Each check is written as ``lhs << rhs`` and passes when rhs/lhs reaches
    ``threshold``. Checks are grouped by ``kind``: ``dispersive`` (adiabatic
    elimination of the intermediate level), ``selectivity`` (resolving one
    Fock transition), ``mode`` (single normal mode addressed; only when
    ``lam`` is set) and ``coarse_graining`` (perturbative atom passes).

    Args:
        p: drive parameters.
        n_max: largest photon number the dispersive and selectivity bounds
            must cover; defaults to ``p.ell_target``.
        threshold: ratio standing in for "much greater".
    """
    n_max = p.ell_target if n_max is None else n_max
    if n_max < 0:
        raise ValidationError(f"n_max must be >= 0, got {n_max}")
    c = effective_couplings(p)
    O0 = abs(p.Omega0)
    checks = []
    if p.lam is not None:
        checks.append(_check("Omega0 << lambda", "mode", O0, p.lam, threshold))
    checks += [
        _check(f"Omega0 sqrt({n_max}+1) << Delta", "dispersive",
               O0 * math.sqrt(n_max + 1), p.Delta, threshold),
        _check("Omega1 << Delta1", "dispersive", abs(p.Omega1), p.Delta1, threshold),
        _check("Omega2 << Delta2", "dispersive", abs(p.Omega2), p.Delta2, threshold),
        _check(f"sqrt({n_max}+2) |zeta| << xi", "selectivity",
               math.sqrt(n_max + 2) * abs(c.zeta), c.xi, threshold),
        _check("delta << varpi_g", "selectivity", c.delta, c.varpi_g, threshold),
        _check(f"|zeta_{p.ell_target}| tau << 1", "coarse_graining",
               abs(c.zeta_n(p.ell_target)) * p.tau, 1.0, threshold),
    ]
    return RegimeReport(checks, threshold)


def _atom_mode_ops(cutoff):
    """sigma_ge (x) I, and |n+1><n| pieces on atom (x) mode, atom order (g, e)."""
    sigma_ge = np.zeros((2, 2))
    sigma_ge[0, 1] = 1.0
    raise_n = []
    for n in range(cutoff - 1):
        op = np.zeros((cutoff, cutoff))
        op[n + 1, n] = 1.0
        raise_n.append(np.kron(sigma_ge, op))
    return raise_n


def _require_tuning(p: DriveParams, c: EffectiveCouplings):
    if abs(c.phi_n(p.ell_target)) > PHASE_TOL * max(c.xi, abs(c.zeta), 1e-300):
        raise ValidationError(
            f"phi_{p.ell_target} = {c.phi_n(p.ell_target):.3e} is not zero; "
            "apply selectivity_tuning first")


def simulate_atom_pass(p: DriveParams, field_n: int, duration: float, atom: str = "e",
                       cutoff: int | None = None) -> float:
    """Atomic transition probability after one pass under the rotating-frame coupling.

    Integrates i d|psi>/dt = V(t)|psi> with
    V(t) = sum_n zeta_n |n+1><n| sigma_ge exp(i phi_n t) + h.c. for an atom
    starting in ``atom`` and the mode in Fock state ``field_n``. Steps are
    exact exponentials of the midpoint coupling, no longer than
    1/(50 * fastest frequency).

    Raises:
        ValidationError: ``p`` has not been tuned (phi_ell != 0).
    """
    if atom not in ("g", "e"):
        raise ValidationError(f"atom must be 'g' or 'e', got {atom!r}")
    if field_n < 0:
        raise ValidationError(f"field_n must be >= 0, got {field_n}")
    c = effective_couplings(p)
    _require_tuning(p, c)
    cutoff = cutoff or field_n + 3
    ops = _atom_mode_ops(cutoff)
    zetas = np.array([c.zeta_n(n) for n in range(cutoff - 1)])
    phis = np.array([c.phi_n(n) for n in range(cutoff - 1)])
    fastest = max(np.max(np.abs(phis)), np.max(np.abs(zetas)))
    n_steps = max(1, math.ceil(duration * 50.0 * fastest))
    h = duration / n_steps

    psi = np.zeros(2 * cutoff, dtype=complex)
    psi[(1 if atom == "e" else 0) * cutoff + field_n] = 1.0
    for k in range(n_steps):
        t = (k + 0.5) * h
        V = sum(z * np.exp(1j * ph * t) * op for z, ph, op in zip(zetas, phis, ops))
        V = V + V.conj().T
        psi = la.expm(-1j * h * V) @ psi
    other = slice(0, cutoff) if atom == "e" else slice(cutoff, 2 * cutoff)
    return float(np.sum(np.abs(psi[other]) ** 2))


@dataclass
class RepeatedInteractionResult:
    gamma_meas: float
    gamma_pred: float
    rel_error: float
    r_squared: float
    times: np.ndarray
    populations: np.ndarray


def _pass_hamiltonian(channel: ChannelSpec, coupling, cutoff):
    sigma_ge = np.zeros((2, 2))
    sigma_ge[0, 1] = 1.0
    a_dag = np.diag(np.sqrt(np.arange(1, cutoff)), -1)
    if channel.kind == "cooling":
        up = a_dag
    else:
        ell = channel.ell
        up = np.zeros((cutoff, cutoff))
        up[ell + 1, ell] = 1.0
    H = coupling * np.kron(sigma_ge, up)
    return H + H.conj().T


def repeated_interaction_check(p: DriveParams, channel: ChannelSpec, n_atoms: int,
                               cutoff: int | None = None,
                               min_r_squared: float = 0.95) -> RepeatedInteractionResult:
    """Measure a channel's rate by sending atoms through the mode one at a time.

    Each atom starts in ``e`` (selective absorption) or ``g`` (selective
    emission, cooling), couples to the mode for ``p.tau`` and is traced out;
    atoms arrive every ``1/p.r``. The population of the source level
    (ell for absorption, ell+1 for emission, 1 for cooling) is fitted to an
    exponential in time. Selective channels use the coupling zeta_ell;
    cooling uses resonant two-level atoms with coupling |Omega0|/sqrt(2)
    and no lasers.

    Raises:
        ValidationError: unsupported channel kind or coupling * tau > 0.3.
        DiagnosticError: the log-linear fit has R**2 below ``min_r_squared``.
    """
    if n_atoms < 2:
        raise ValidationError("need at least two atoms to fit a rate")
    c = effective_couplings(p)
    if channel.kind == "selective_absorption":
        coupling, atom, source = abs(c.zeta_n(channel.ell)), "e", channel.ell
    elif channel.kind == "selective_emission":
        coupling, atom, source = abs(c.zeta_n(channel.ell)), "g", channel.ell + 1
    elif channel.kind == "cooling":
        coupling, atom, source = abs(p.Omega0) / math.sqrt(2.0), "g", 1
    else:
        raise ValidationError(f"no atomic-beam construction for {channel.kind!r}")
    if coupling * p.tau > 0.3:
        raise ValidationError(f"coupling * tau = {coupling * p.tau:.3g} exceeds 0.3")
    if p.r <= 0:
        raise ValidationError("arrival rate r must be positive")

    cutoff = cutoff or source + 3
    U = la.expm(-1j * p.tau * _pass_hamiltonian(channel, coupling, cutoff))
    level = 1 if atom == "e" else 0
    atom_proj = np.zeros((2, 2))
    atom_proj[level, level] = 1.0

    rho = np.zeros((cutoff, cutoff), dtype=complex)
    rho[source, source] = 1.0
    pops = [np.real(np.diag(rho))]
    for _ in range(n_atoms):
        joint = U @ np.kron(atom_proj, rho) @ U.conj().T
        rho = np.einsum("aiaj->ij", joint.reshape(2, cutoff, 2, cutoff))
        pops.append(np.real(np.diag(rho)))
    pops = np.array(pops)
    times = np.arange(n_atoms + 1) / p.r

    src = pops[:, source]
    keep = src > 1e-12
    t, y = times[keep], np.log(src[keep])
    slope, intercept = np.polyfit(t, y, 1)
    fit = slope * t + intercept
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - fit) ** 2) / ss_tot if ss_tot > 0 else 0.0
    if r2 < min_r_squared:
        raise DiagnosticError(f"population transfer is not exponential (R^2 = {r2:.3f})")
    gamma_meas = -slope
    gamma_pred = p.r * (coupling * p.tau) ** 2
    return RepeatedInteractionResult(
        gamma_meas=gamma_meas,
        gamma_pred=gamma_pred,
        rel_error=abs(gamma_meas - gamma_pred) / gamma_pred,
        r_squared=r2,
        times=times,
        populations=pops,
    )
