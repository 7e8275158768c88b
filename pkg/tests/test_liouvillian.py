import numpy as np
import pytest

from bosenet.errors import ValidationError
from bosenet.liouvillian import (
    ChannelSpec,
    GeneratorSpec,
    assemble,
    bell_full_generator,
    bell_generator,
    dissipator,
    noon_generator,
    number_hamiltonian,
    thermal_channels,
    w_generator,
)
from bosenet.states import TruncatedSpace, ladder_ops, thermal_state

from conftest import random_density, random_hermitian


def apply(L, rho):
    D = rho.shape[0]
    return (L @ rho.reshape(-1, order="F")).reshape((D, D), order="F")


def proj(d, n):
    p = np.zeros((d, d), dtype=complex)
    p[n, n] = 1
    return p


def test_dissipator_emission_from_one():
    space = TruncatedSpace((2,))
    a, _ = ladder_ops(space, 0)
    out = apply(dissipator(space, a, 1.0), proj(2, 1))
    np.testing.assert_allclose(out, proj(2, 0) - proj(2, 1), atol=1e-15)


def test_dissipator_selective_absorption_from_vacuum():
    space = TruncatedSpace((3,))
    J = np.zeros((3, 3))
    J[1, 0] = 1
    out = apply(dissipator(space, J, 2.5), proj(3, 0))
    np.testing.assert_allclose(out, 2.5 * (proj(3, 1) - proj(3, 0)), atol=1e-15)


def test_dissipator_fixed_point_of_competing_channels():
    # two-level rate equation dp1/dt = g_up p0 - g_down p1 -> p1 = g_up / (g_up + g_down)
    space = TruncatedSpace((2,))
    a, adag = ladder_ops(space, 0)
    g_down, g_up = 1.05, 0.05
    L = dissipator(space, a, g_down) + dissipator(space, adag, g_up)
    p1 = g_up / (g_up + g_down)
    rho = np.diag([1 - p1, p1]).astype(complex)
    np.testing.assert_allclose(apply(L, rho), 0, atol=1e-15)


def test_dissipator_rejects_negative_rate():
    space = TruncatedSpace((2,))
    with pytest.raises(ValidationError):
        dissipator(space, ladder_ops(space, 0)[0], -1.0)


def test_channel_validation():
    with pytest.raises(ValidationError):
        ChannelSpec(0, "selective_emission", 1.0)
    with pytest.raises(ValidationError):
        ChannelSpec(0, "cooling", -1.0)
    with pytest.raises(ValidationError):
        ChannelSpec(0, "dephasing", 1.0)
    with pytest.raises(ValidationError):
        GeneratorSpec(TruncatedSpace((3,)), [ChannelSpec(1, "cooling", 1.0)])
    with pytest.raises(ValidationError):
        GeneratorSpec(TruncatedSpace((3,)), [ChannelSpec(0, "selective_absorption", 1.0, ell=2)])


def test_empty_channels_leave_populations_alone():
    space = TruncatedSpace((3, 3))
    H = number_hamiltonian(space, [1.1, 0.9])
    L = assemble(GeneratorSpec(space, (), H))
    rho = np.diag(np.linspace(1, 2, 9)).astype(complex)
    np.testing.assert_allclose(L.apply(rho), 0, atol=1e-15)


def _groups(gen):
    return {c.kind for c in gen.channels}


def test_bell_generator_structure():
    gen = bell_generator(50)
    assert _groups(gen) == {"selective_absorption", "thermal_emission", "thermal_absorption"}
    sel = [c for c in gen.channels if c.kind == "selective_absorption"]
    assert sel == [ChannelSpec(0, "selective_absorption", 50, ell=0)]
    for m in (0, 1):
        rates = {c.kind: c.rate for c in gen.channels if c.mode == m and c.kind.startswith("thermal")}
        assert rates["thermal_emission"] == pytest.approx(1.05)
        assert rates["thermal_absorption"] == pytest.approx(0.05)
    assert gen.space.cutoffs == (4, 4)


def test_bell_full_generator_structure():
    gen = bell_full_generator(50, 50, 50)
    engineered = {(c.mode, c.kind, c.ell) for c in gen.channels if not c.kind.startswith("thermal")}
    assert engineered == {(0, "selective_emission", 1), (0, "selective_absorption", 0), (1, "cooling", None)}


def test_noon_generator_channel_count():
    assert len(noon_generator(50, 50, 50, 50).channels) == 8
    assert len(noon_generator(50, 50).channels) == 6


@pytest.mark.parametrize("n", [3, 4])
def test_w_generator_structure(n):
    gen = w_generator(n, 50, 50)
    thermal = [c for c in gen.channels if c.kind.startswith("thermal")]
    assert {c.mode for c in thermal} == {0}
    em = next(c for c in thermal if c.kind == "thermal_emission")
    ab = next(c for c in thermal if c.kind == "thermal_absorption")
    assert em.rate == pytest.approx(n * 1.05)
    assert ab.rate == pytest.approx(n * 0.05)
    cool = sorted(c.mode for c in gen.channels if c.kind == "cooling")
    assert cool == list(range(1, n))
    assert ChannelSpec(0, "selective_absorption", 50, ell=0) in gen.channels
    with pytest.raises(ValidationError):
        w_generator(1, 50, 50)


@pytest.fixture(params=["bell", "noon_full", "w3", "hamiltonian"])
def generator(request):
    if request.param == "bell":
        return assemble(bell_generator(25))
    if request.param == "noon_full":
        return assemble(noon_generator(50, 50, 50, 50))
    if request.param == "w3":
        return assemble(w_generator(3, 50, 50, cutoffs=(3, 2, 2)))
    return assemble(bell_full_generator(50, 50, 50, with_hamiltonian=True))


def test_trace_preservation(generator, rng):
    D = generator.dim
    worst = max(abs(np.trace(generator.apply(random_hermitian(rng, D)))) for _ in range(100))
    assert worst < 1e-10


def test_hermiticity_preservation(generator, rng):
    for _ in range(20):
        out = generator.apply(random_hermitian(rng, generator.dim))
        np.testing.assert_allclose(out, out.conj().T, atol=1e-10)


def test_matrix_free_matches_sparse(generator, rng):
    for _ in range(10):
        rho = rng.normal(size=(generator.dim,) * 2) + 1j * rng.normal(size=(generator.dim,) * 2)
        np.testing.assert_allclose(generator.apply_matrix_free(rho), generator.apply(rho),
                                   atol=1e-12, rtol=0)


def test_thermal_only_annihilates_truncated_thermal_state():
    space = TruncatedSpace((6, 6))
    channels = thermal_channels(0, 1.0, 0.05) + thermal_channels(1, 1.0, 0.05)
    L = assemble(GeneratorSpec(space, channels))
    assert L.residual(thermal_state(space, 0.05)) < 1e-6


def test_column_stacking_convention():
    # vec(A rho B) = (B^T kron A) vec(rho) with column stacking
    space = TruncatedSpace((2,))
    a, _ = ladder_ops(space, 0)
    L = assemble(GeneratorSpec(space, [ChannelSpec(0, "cooling", 1.0)]))
    rho = np.array([[0.3, 0.2 + 0.1j], [0.2 - 0.1j, 0.7]])
    vec = rho.flatten(order="F")
    out = (L.matrix @ vec).reshape((2, 2), order="F")
    A = a.toarray()
    expected = A @ rho @ A.T - 0.5 * (A.T @ A @ rho + rho @ A.T @ A)
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_assembly_is_reproducible():
    a = assemble(w_generator(3, 50, 50)).matrix
    b = assemble(w_generator(3, 50, 50)).matrix
    np.testing.assert_array_equal(a.indptr, b.indptr)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.data, b.data)


def test_random_density_stays_in_domain(rng):
    L = assemble(bell_generator(10))
    rho = random_density(rng, L.dim)
    assert abs(np.trace(L.apply(rho))) < 1e-12
