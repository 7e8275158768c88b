import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bosenet.dynamics import evolve, fidelity, purity, steady_state
from bosenet.errors import IntegrationError, ValidationError
from bosenet.liouvillian import (
    ChannelSpec,
    GeneratorSpec,
    assemble,
    bell_generator,
    noon_generator,
    thermal_channels,
    w_generator,
)
from bosenet.states import (
    DensityOperator,
    TruncatedSpace,
    fock_state,
    maximally_mixed,
    target_state,
    thermal_state,
)


def _single(channels, d):
    space = TruncatedSpace((d,))
    return space, assemble(GeneratorSpec(space, channels))


# --- observables ---

def test_fidelity_of_pure_state_is_one():
    space = TruncatedSpace((2, 2))
    psi = fock_state(space, (1, 0))
    assert fidelity(psi.projector(), psi) == pytest.approx(1.0, abs=1e-15)
    assert purity(psi.projector()) == pytest.approx(1.0, abs=1e-15)


def test_maximally_mixed_observables():
    space = TruncatedSpace((2, 2))
    rho = maximally_mixed(space)
    assert fidelity(rho, fock_state(space, (0, 1))) == pytest.approx(0.5)
    assert purity(rho) == pytest.approx(0.25)


def test_fidelity_rejects_basis_mismatch():
    space = TruncatedSpace((2, 2))
    with pytest.raises(ValidationError, match="basis"):
        fidelity(maximally_mixed(space, "natural"), fock_state(space, (1, 0), "normal"))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_observables_stay_in_range(seed):
    rng = np.random.default_rng(seed)
    space = TruncatedSpace((2, 3))
    g = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = DensityOperator(g @ g.conj().T / np.trace(g @ g.conj().T).real, space)
    psi = fock_state(space, (1, 2))
    assert 0.0 <= fidelity(rho, psi) <= 1.0
    assert 1.0 / 6 - 1e-12 <= purity(rho) <= 1.0 + 1e-12


# --- evolve ---

def test_emission_decay_law():
    space, L = _single(thermal_channels(0, 1.0, 0.0), 2)
    traj = evolve(L, fock_state(space, (1,)).projector(), 1.0, n_output=10)
    assert traj.final("n_mode_1") == pytest.approx(np.exp(-1.0), abs=1e-6)


@pytest.mark.parametrize("rate", [0.5, 5.0, 50.0])
def test_selective_absorption_fills_one(rate):
    space, L = _single([ChannelSpec(0, "selective_absorption", rate, ell=0)], 3)
    traj = evolve(L, fock_state(space, (0,)).projector(), 0.2, n_output=20)
    p1 = traj.final_state.populations()[1]
    assert p1 == pytest.approx(1 - np.exp(-rate * 0.2), abs=1e-6)


def test_trajectory_bookkeeping():
    L = assemble(bell_generator(50))
    target = target_state("bell_plus", cutoffs=(4, 4)).normal
    traj = evolve(L, thermal_state(L.space, 0.05), 5.0, target=target, n_output=500)
    assert np.all(np.diff(traj.times) > 0)
    assert len(traj.states) <= 200
    assert set(traj.observables) == {"purity", "fidelity", "n_mode_1", "n_mode_2"}
    for rho in traj.states:
        rho.check()
    assert traj.trace_drift < 1e-8
    assert traj.min_eigenvalue >= -1e-6


def test_evolve_argument_errors():
    space, L = _single(thermal_channels(0, 1.0, 0.0), 2)
    rho = fock_state(space, (1,)).projector()
    with pytest.raises(ValidationError):
        evolve(L, rho, 1.0, dt=0.0)
    with pytest.raises(ValidationError):
        evolve(L, rho, -1.0)
    with pytest.raises(ValidationError):
        evolve(L, fock_state(TruncatedSpace((3,)), (1,)).projector(), 1.0)


def test_oversized_step_is_reported():
    # a step far outside the RK4 stability region with the accuracy check disabled
    space, L = _single([ChannelSpec(0, "cooling", 50.0)], 4)
    with pytest.raises(IntegrationError, match="step"):
        evolve(L, fock_state(space, (3,)).projector(), 1.0, dt=0.5, n_output=2,
               accuracy_tol=np.inf, max_halvings=0)


def test_stop_tolerance_ends_run_early():
    space, L = _single(thermal_channels(0, 1.0, 0.0), 2)
    traj = evolve(L, fock_state(space, (1,)).projector(), 50.0, stop_tol=1e-8)
    assert traj.stopped_early
    assert traj.horizon < 50.0
    assert L.residual(traj.final_state) < 1e-8


@settings(max_examples=10, deadline=None)
@given(st.floats(1.0, 50.0), st.floats(0.0, 0.2))
def test_bell_evolution_stays_physical(gamma0, nbar):
    L = assemble(bell_generator(gamma0, nbar=nbar, cutoffs=(3, 3)))
    traj = evolve(L, thermal_state(L.space, nbar), 2.0, n_output=20)
    assert traj.trace_drift < 1e-8
    assert traj.min_eigenvalue >= -1e-6


def test_bell_fidelity_monotone_after_transient():
    L = assemble(bell_generator(50))
    target = target_state("bell_plus", cutoffs=(4, 4)).normal
    traj = evolve(L, thermal_state(L.space, 0.05), 50.0, target=target, stop_tol=1e-8)
    F = traj.observables["fidelity"]
    start = int(np.argmax(F > 0.5))
    assert np.min(np.diff(F[start:])) >= -1e-6


# --- steady_state ---

def test_thermal_only_steady_state_is_truncated_thermal():
    space = TruncatedSpace((5, 4))
    L = assemble(GeneratorSpec(space, thermal_channels(0, 1.0, 0.05) + thermal_channels(1, 2.0, 0.05)))
    result = steady_state(L)
    assert result.unique and result.method == "direct"
    assert result.residual < 1e-8
    np.testing.assert_allclose(result.rho_ss.matrix, thermal_state(space, 0.05).matrix, atol=1e-10)


def test_absorption_and_cooling_pin_single_quantum():
    # selective absorption on mode 1 and cooling on mode 2 both annihilate |1, 0>;
    # a two-level first mode keeps higher Fock states from forming dark states
    space = TruncatedSpace((2, 3))
    L = assemble(GeneratorSpec(space, [ChannelSpec(0, "selective_absorption", 5.0, ell=0),
                                       ChannelSpec(1, "cooling", 1.0)]))
    result = steady_state(L)
    assert result.unique
    np.testing.assert_allclose(result.rho_ss.matrix, fock_state(space, (1, 0)).projector().matrix, atol=1e-12)


def test_w3_steady_fidelity():
    L = assemble(w_generator(3, 50, 50))
    target = target_state("w", 3, cutoffs=L.space.cutoffs).normal
    result = steady_state(L)
    assert result.residual < 1e-8
    assert fidelity(result.rho_ss, target) == pytest.approx(0.95, abs=0.02)


def test_steady_residual_checked_independently():
    L = assemble(noon_generator(50, 50, 50, 50))
    result = steady_state(L)
    rho = result.rho_ss.matrix
    D = rho.shape[0]
    dense = L.matrix.toarray() @ rho.reshape(-1, order="F")
    assert np.max(np.abs(dense)) < 1e-8
    assert abs(np.trace(rho) - 1) < 1e-12
    assert result.rho_ss.min_eigenvalue() > -1e-10
    assert D == L.dim


def test_integration_path_matches_direct():
    L = assemble(bell_generator(50, cutoffs=(3, 3)))
    direct = steady_state(L, method="direct").rho_ss.matrix
    integrated = steady_state(L, method="integration")
    assert integrated.method == "integration"
    assert integrated.residual < 1e-6
    assert np.abs(np.linalg.eigvalsh(integrated.rho_ss.matrix - direct)).sum() < 1e-4


def test_non_unique_null_space_is_flagged():
    space = TruncatedSpace((2, 2))
    L = assemble(GeneratorSpec(space, [ChannelSpec(0, "cooling", 1.0)]))
    result = steady_state(L)
    assert not result.unique
    assert result.null_dim > 1
    assert result.residual < 1e-8
    assert result.rho_ss.trace == pytest.approx(1.0)


def test_unknown_method():
    space, L = _single(thermal_channels(0, 1.0, 0.0), 2)
    with pytest.raises(ValidationError):
        steady_state(L, method="magic")


def test_evolve_and_steady_state_agree_for_bell():
    L = assemble(bell_generator(50))
    traj = evolve(L, thermal_state(L.space, 0.05), 30.0, n_output=60)
    rho_ss = steady_state(L).rho_ss.matrix
    diff = traj.final_state.matrix - rho_ss
    assert np.abs(np.linalg.eigvalsh(diff)).sum() < 1e-3
