"""End-to-end acceptance runs, one test per criterion, each within its time budget."""
import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from bosenet.dynamics import evolve, fidelity, purity, steady_state
from bosenet.engineering import (
    DriveParams,
    effective_couplings,
    repeated_interaction_check,
    selectivity_tuning,
    simulate_atom_pass,
)
from bosenet.liouvillian import (
    ChannelSpec,
    GeneratorSpec,
    assemble,
    bell_full_generator,
    bell_generator,
    noon_generator,
    thermal_channels,
    w_generator,
)
from bosenet.network import NetworkSpec, normal_modes
from bosenet.scenarios import ScenarioConfig, convergence_study, design_report
from bosenet.states import (
    TruncatedSpace,
    fock_state,
    maximally_mixed,
    target_state,
    thermal_state,
)

from conftest import random_hermitian

pytestmark = pytest.mark.acceptance


def _steady(gen, occ):
    L = assemble(gen)
    ss = steady_state(L)
    target = fock_state(gen.space, occ)
    return fidelity(ss.rho_ss, target), purity(ss.rho_ss), ss


def test_bell_fidelity_against_engineered_rate(criterion):
    start = time.perf_counter()
    F = [_steady(bell_generator(g), (1, 0))[0] for g in (10, 25, 50)]
    elapsed = time.perf_counter() - start
    within = all(abs(f - e) <= 0.02 for f, e in zip(F, (0.91, 0.93, 0.94)))
    ok = within and F[0] < F[1] < F[2] and elapsed < 10
    criterion(1, ok, "F(10, 25, 50) = " + ", ".join(f"{f:.4f}" for f in F), elapsed)
    assert ok


def test_bell_all_engineered_channels(criterion):
    start = time.perf_counter()
    F, _, _ = _steady(bell_full_generator(50, 50, 50), (1, 0))
    elapsed = time.perf_counter() - start
    ok = abs(F - 0.98) <= 0.01 and elapsed < 10
    criterion(2, ok, f"F = {F:.4f}", elapsed)
    assert ok


def test_noon_absorption_and_emission(criterion):
    start = time.perf_counter()
    F1, P1, _ = _steady(noon_generator(50, 50), (1, 1))
    F2, P2, _ = _steady(noon_generator(50, 50, 50, 50), (1, 1))
    elapsed = time.perf_counter() - start
    ok = (abs(F1 - 0.93) <= 0.02 and abs(P1 - 0.77) <= 0.03
          and abs(F2 - 0.98) <= 0.01 and abs(P2 - 0.91) <= 0.03 and elapsed < 30)
    criterion(3, ok, f"absorption F={F1:.4f} p={P1:.4f}; full F={F2:.4f} p={P2:.4f}", elapsed)
    assert ok


def test_w_states(criterion):
    start = time.perf_counter()
    results, ok = {}, True
    for n, (f_ref, p_ref) in {3: (0.95, 0.81), 4: (0.94, 0.79)}.items():
        gen = w_generator(n, 50, 50)
        L = assemble(gen)
        target = target_state("w", n, cutoffs=gen.space.cutoffs).normal
        traj = evolve(L, thermal_state(gen.space, 0.05), 50.0, target=target, stop_tol=1e-8,
                      store_states=False)
        F, P = traj.final("fidelity"), traj.final("purity")
        results[n] = (F, P, traj.horizon)
        hit = abs(F - f_ref) <= 0.02 and abs(P - p_ref) <= 0.03
        if not hit:
            cfg = ScenarioConfig.from_dict({"scenario": "w", "N": n})
            print(f"W N={n} outside tolerance; convergence study:")
            print(json.dumps(convergence_study(cfg), indent=2, sort_keys=True))
        ok &= hit
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    detail = "; ".join(f"N={n} F={F:.4f} p={P:.4f} (gamma t = {h:.3g})"
                       for n, (F, P, h) in results.items())
    criterion(4, ok, detail, elapsed)
    assert ok


def test_property_suite(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    checks = {}

    L = assemble(bell_generator(50))
    checks["trace"] = max(abs(np.trace(L.apply(random_hermitian(rng, L.dim)))) for _ in range(100)) < 1e-10

    traj = evolve(L, thermal_state(L.space, 0.05), 10.0, n_output=50)
    checks["positivity"] = traj.min_eigenvalue >= -1e-6

    space = TruncatedSpace((6, 6))
    thermal = assemble(GeneratorSpec(space, thermal_channels(0, 1.0, 0.05) + thermal_channels(1, 1.0, 0.05)))
    rho = steady_state(thermal).rho_ss.matrix
    checks["thermal"] = np.max(np.abs(rho - thermal_state(space, 0.05).matrix)) < 1e-6

    C = normal_modes(NetworkSpec.symmetric(4)).C
    checks["orthogonality"] = np.max(np.abs(C @ C.T - np.eye(4))) < 1e-12

    single = TruncatedSpace((2,))
    decay = assemble(GeneratorSpec(single, thermal_channels(0, 1.0, 0.0)))
    p1 = evolve(decay, fock_state(single, (1,)).projector(), 1.0, n_output=10).final("n_mode_1")
    checks["decay"] = abs(p1 - math.exp(-1)) < 1e-6

    two = TruncatedSpace((2, 2))
    psi = fock_state(two, (1, 0))
    mixed = maximally_mixed(two)
    checks["identities"] = (abs(fidelity(psi.projector(), psi) - 1) < 1e-12
                            and abs(fidelity(mixed, psi) - 0.5) < 1e-12
                            and abs(purity(mixed) - 0.25) < 1e-12)

    elapsed = time.perf_counter() - start
    ok = all(checks.values()) and elapsed < 5
    criterion(5, ok, ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items()), elapsed)
    assert ok


def test_engineering_bridge(criterion):
    start = time.perf_counter()
    report = design_report(DriveParams.microwave_regime(Omega0=5e5), gamma=7.5)
    ratio = report.table[0]["Gamma_over_gamma"]
    dispersive = report.regime.of_kind("dispersive")
    elapsed = time.perf_counter() - start
    ok = 300 <= ratio <= 1500 and all(c.passed for c in dispersive) and elapsed < 1
    ratios = ", ".join(f"{c.ratio:.3g}" for c in dispersive)
    criterion(6, ok, f"Gamma0/gamma = {ratio:.1f}; dispersive ratios {ratios}", elapsed)
    assert ok


def test_repeated_interaction_oracle(criterion):
    start = time.perf_counter()
    p = selectivity_tuning(DriveParams.microwave_regime(), 0).params
    zeta = abs(effective_couplings(p).zeta)
    channel = ChannelSpec(0, "selective_absorption", 1.0, ell=0)
    errors = {zt: repeated_interaction_check(replace(p, tau=zt / zeta), channel, 500).rel_error
              for zt in (0.3, 0.1, 0.03)}
    elapsed = time.perf_counter() - start
    e = list(errors.values())
    ok = errors[0.1] < 0.1 and e[0] > e[1] > e[2] and elapsed < 60
    criterion(7, ok, "relative errors " + ", ".join(f"{zt}: {v:.2e}" for zt, v in errors.items()),
              elapsed)
    assert ok


def test_atom_pass_selectivity(criterion):
    start = time.perf_counter()
    p = selectivity_tuning(DriveParams.microwave_regime(), 0).params
    t_pi = math.pi / (2 * abs(effective_couplings(p).zeta))
    transfer = {n: simulate_atom_pass(p, n, t_pi) for n in range(4)}
    elapsed = time.perf_counter() - start
    off = max(transfer[n] for n in (1, 2, 3))
    ok = transfer[0] > 0.95 and off < 0.05 and elapsed < 10
    criterion(8, ok, "pi-pulse transfer " + ", ".join(f"n={n}: {v:.4f}" for n, v in transfer.items()),
              elapsed)
    assert ok
