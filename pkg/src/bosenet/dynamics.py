"""Time evolution, steady states and observables of assembled generators."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IntegrationError, ValidationError
from .liouvillian import Liouvillian
from .states import DensityOperator, StateVector, maximally_mixed

log = logging.getLogger(__name__)

TRACE_DRIFT_TOL = 1e-8
INSTABILITY_TOL = 1e-6
MAX_STORED_STATES = 200
DIRECT_LIMIT = 40_000  # entries of the D^2 x D^2 generator's side squared
DENSE_NULLSPACE_LIMIT = 1_600
DEFAULT_HORIZON = 50.0
DEFAULT_STOP_TOL = 1e-8


def fidelity(rho: DensityOperator, target: StateVector) -> float:
    """Square-root overlap sqrt(<psi| rho |psi>) with a pure target."""
    if rho.basis != target.basis:
        raise ValidationError(
            f"basis mismatch: state is {rho.basis!r}, target is {target.basis!r}")
    if rho.space != target.space:
        raise ValidationError("state and target live on different truncated spaces")
    psi = target.amplitudes
    overlap = float(np.real(np.vdot(psi, rho.matrix @ psi)))
    return math.sqrt(min(max(overlap, 0.0), 1.0))


def purity(rho: DensityOperator) -> float:
    m = rho.matrix
    return float(np.real(np.vdot(m.conj().T, m)))


@dataclass
class Trajectory:
    """Observable series sampled at the output times of an evolution.

    ``states`` holds at most MAX_STORED_STATES density operators, thinned
    evenly over the output points. ``horizon`` is the last time reached,
    which is earlier than the requested final time when the run stopped on
    ``stop_tol``.
    """

    times: np.ndarray
    observables: dict
    states: list = field(default_factory=list)
    state_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dt: float = 0.0
    horizon: float = 0.0
    stopped_early: bool = False
    trace_drift: float = 0.0
    min_eigenvalue: float = 0.0

    @property
    def final_state(self) -> DensityOperator:
        return self.states[-1]

    def final(self, name: str) -> float:
        return float(self.observables[name][-1])


def default_dt(L: Liouvillian) -> float:
    """Step keeping dt * ||L||_inf at 0.25, well inside the RK4 stability region."""
    norm = float(abs(L.matrix).sum(axis=1).max()) if L.matrix.nnz else 0.0
    return 0.25 / norm if norm > 0 else 0.1


def _rk4_steps(A, v, h, n):
    for _ in range(n):
        k1 = A @ v
        k2 = A @ (v + 0.5 * h * k1)
        k3 = A @ (v + 0.5 * h * k2)
        k4 = A @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return v


def _observe(rho, space, target, store):
    obs = {"purity": purity(rho)}
    if target is not None:
        obs["fidelity"] = fidelity(rho, target)
    for m, n in enumerate(rho.mean_occupations()):
        obs[f"n_mode_{m + 1}"] = float(n)
    return obs


def _integrate(L, rho0, t_final, dt, n_output, target, stop_tol, store_states):
    A = L.matrix
    D = L.dim
    space = L.space
    interval = t_final / n_output
    steps = max(1, math.ceil(interval / dt - 1e-12))
    h = interval / steps

    vec = rho0.matrix.reshape(-1, order="F").astype(complex)
    times = [0.0]
    series = {k: [v] for k, v in _observe(rho0, space, target, False).items()}
    stored, stored_t = [rho0], [0.0]
    store_every = max(1, math.ceil(n_output / (MAX_STORED_STATES - 1)))
    drift, min_eig = 0.0, rho0.min_eigenvalue()
    stopped = False

    for k in range(1, n_output + 1):
        vec = _rk4_steps(A, vec, h, steps)
        mat = vec.reshape((D, D), order="F")
        mat = 0.5 * (mat + mat.conj().T)
        rho = DensityOperator(mat, space, rho0.basis)
        t = k * interval
        drift = max(drift, abs(rho.trace - 1.0))
        lam = rho.min_eigenvalue()
        min_eig = min(min_eig, lam)
        if not np.all(np.isfinite(mat)) or drift > INSTABILITY_TOL or lam < -INSTABILITY_TOL:
            raise IntegrationError(
                f"integration unstable at t={t:.4g} with step {h:.3e}: "
                f"trace drift {drift:.2e}, min eigenvalue {lam:.2e}")
        times.append(t)
        for name, value in _observe(rho, space, target, False).items():
            series[name].append(value)
        done = stop_tol is not None and float(np.max(np.abs(A @ vec))) < stop_tol
        if store_states and (k % store_every == 0 or k == n_output or done):
            stored.append(rho)
            stored_t.append(t)
        if done:
            stopped = True
            break

    return Trajectory(
        times=np.array(times),
        observables={k: np.array(v) for k, v in series.items()},
        states=stored,
        state_times=np.array(stored_t),
        dt=h,
        horizon=times[-1],
        stopped_early=stopped,
        trace_drift=drift,
        min_eigenvalue=min_eig,
    )


def evolve(L: Liouvillian, rho0: DensityOperator, t_final: float, dt: float | None = None,
           target: StateVector | None = None, n_output: int = 200, stop_tol: float | None = None,
           store_states: bool = True, accuracy_tol: float = 1e-8, max_halvings: int = 6) -> Trajectory:
    """Integrate d rho/dt = L[rho] with fixed-step classical Runge-Kutta.

    Before the full run the first output interval is integrated at ``dt``
    and ``dt / 2``; the step is halved until the two agree to
    ``accuracy_tol`` (entrywise). The full run is repeated at half the step
    if the trace drifts by more than 1e-8.

    Args:
        L: assembled generator.
        rho0: initial state on ``L.space``.
        t_final: final time in units of 1/gamma_ref.
        dt: requested step; defaults to :func:`default_dt`.
        target: optional pure target for the ``fidelity`` series.
        n_output: number of output intervals.
        stop_tol: stop once max|L[rho]| drops below this value.
        store_states: keep up to 200 density operators along the run.

    Raises:
        IntegrationError: trace drift or negativity above 1e-6, or the
            accuracy check still failing after ``max_halvings`` halvings.
    """
    if rho0.space != L.space:
        raise ValidationError("initial state and generator live on different spaces")
    if t_final <= 0:
        raise ValidationError(f"t_final must be positive, got {t_final}")
    if dt is not None and dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if n_output < 1:
        raise ValidationError("n_output must be >= 1")
    rho0.check()

    dt = default_dt(L) if dt is None else float(dt)
    interval = t_final / n_output
    v0 = rho0.matrix.reshape(-1, order="F").astype(complex)
    for _ in range(max_halvings + 1):
        n = max(1, math.ceil(interval / dt - 1e-12))
        coarse = _rk4_steps(L.matrix, v0, interval / n, n)
        fine = _rk4_steps(L.matrix, v0, interval / (2 * n), 2 * n)
        if np.max(np.abs(coarse - fine)) <= accuracy_tol:
            break
        dt /= 2
    else:
        raise IntegrationError(f"accuracy check failed down to step {dt:.3e}")

    for _ in range(max_halvings + 1):
        traj = _integrate(L, rho0, t_final, dt, n_output, target, stop_tol, store_states)
        if traj.trace_drift < TRACE_DRIFT_TOL:
            return traj
        log.info("trace drift %.2e at dt=%.3e, halving step", traj.trace_drift, dt)
        dt /= 2
    raise IntegrationError(f"trace drift {traj.trace_drift:.2e} persists at step {dt:.3e}")


@dataclass
class SteadyStateResult:
    rho_ss: DensityOperator
    residual: float
    method: str
    unique: bool = True
    null_dim: int = 1
    horizon: float | None = None


def _to_density(vec, space, basis):
    D = space.dim
    mat = vec.reshape((D, D), order="F")
    mat = 0.5 * (mat + mat.conj().T)
    mat = mat / np.trace(mat).real
    return DensityOperator(mat, space, basis)


def _trace_row(D):
    return np.eye(D, dtype=complex).reshape(-1, order="F")


def _integrate_to_rest(L, rho0, tol, t_max):
    t, chunk = 0.0, DEFAULT_HORIZON
    rho = rho0
    while t < t_max:
        traj = evolve(L, rho, chunk, target=None, n_output=50, stop_tol=tol, store_states=True)
        rho = traj.final_state
        t += traj.horizon
        if traj.stopped_early:
            break
    return rho, t


def steady_state(L: Liouvillian, method: str = "auto", tol: float | None = None,
                 rho_guess: DensityOperator | None = None, t_max: float = 1e4,
                 basis: str = "normal") -> SteadyStateResult:
    """Fixed point of ``L``, normalized to unit trace.

    ``method="auto"`` uses a direct null-space solve while D**2 <= 40000 and
    long-time integration beyond that. When the null space has more than one
    dimension the result is flagged non-unique and the returned state is the
    trace-normalized projection onto the null space of the state reached by
    integrating ``rho_guess`` (maximally mixed by default).
    """
    D = L.dim
    n = D * D
    if method == "auto":
        method = "direct" if n <= DIRECT_LIMIT else "integration"
    if method not in ("direct", "integration"):
        raise ValidationError(f"unknown steady-state method {method!r}")
    start = rho_guess if rho_guess is not None else maximally_mixed(L.space, basis)

    if method == "integration":
        tol = 1e-6 if tol is None else tol
        # stop slightly below tol so the returned residual clears it after renormalization
        rho, horizon = _integrate_to_rest(L, start, 0.5 * tol, t_max)
        rho = _to_density(rho.matrix.reshape(-1, order="F"), L.space, basis)
        res = L.residual(rho)
        return SteadyStateResult(rho, res, "integration", horizon=horizon)

    tol = 1e-8 if tol is None else tol
    null_basis = None
    if n <= DENSE_NULLSPACE_LIMIT:
        A = L.matrix.toarray()
        _, s, vh = np.linalg.svd(A)
        cutoff = 1e-10 * max(1.0, s[0])
        null_basis = vh[s <= cutoff].conj().T
        null_dim = null_basis.shape[1]
    else:
        null_dim = 1

    if null_dim == 1:
        A = L.matrix.tolil()
        # replace the first population equation by the trace condition
        A[0, :] = _trace_row(D)
        rhs = np.zeros(n, dtype=complex)
        rhs[0] = 1.0
        try:
            vec = spla.splu(sp.csc_matrix(A)).solve(rhs)
        except RuntimeError:
            null_dim = 2
        else:
            rho = _to_density(vec, L.space, basis)
            return SteadyStateResult(rho, L.residual(rho), "direct")

    log.warning("steady state is not unique (null-space dimension %s)", null_dim)
    reached, horizon = _integrate_to_rest(L, start, 1e-10, t_max)
    v = reached.matrix.reshape(-1, order="F")
    if null_basis is not None:
        coeffs, *_ = np.linalg.lstsq(null_basis, v, rcond=None)
        v = null_basis @ coeffs
    rho = _to_density(v, L.space, basis)
    return SteadyStateResult(rho, L.residual(rho), "direct", unique=False,
                             null_dim=null_dim, horizon=horizon)
