import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsecascade import cascade as cs
from pulsecascade import evolve as ev
from pulsecascade import hilbert as hb
from pulsecascade import pulses as pu
from pulsecascade.errors import NetworkError


def D(L, rho):
    Ld = L.conj().T
    return L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L)


def random_rho(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = m @ m.conj().T
    return r / np.trace(r)


@pytest.fixture(scope="module")
def grid():
    return pu.TimeGrid(0, 12, 600)


def test_bare_atom_generator(grid):
    net = cs.CascadeNetwork(grid, cs.two_level_atom(gamma=0.7))
    gen = cs.build_single(net)
    s = gen.sample(10)
    assert np.allclose(s.H, 0)
    assert len(s.lindblads) == 1
    assert np.allclose(s.lindblads[0], math.sqrt(0.7) * hb.sigma_minus())


def test_one_way_structure(grid):
    """Input quanta are only annihilated: a_u acts from the left of rho, a_u^dag from the right."""
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    sc = cs.empty_cavity(3, detuning=0.4, gamma=1.3)
    net = cs.CascadeNetwork(grid, sc, inputs=pu.single_input(u), input_dims=[3])
    gen = cs.build_single(net)
    rng = np.random.default_rng(1)
    rho = random_rho(rng, net.space.total_dim)
    k = 300
    A = net.in_couplings[0].samples[k] * net.operator("u1")
    C = math.sqrt(1.3) * net.operator("c")
    Hs = 0.4 * C.conj().T @ C / 1.3
    expected = (-1j * (Hs @ rho - rho @ Hs) + D(A, rho) + D(C, rho)
                + (A @ rho @ C.conj().T - C.conj().T @ A @ rho)
                + (C @ rho @ A.conj().T - rho @ A.conj().T @ C))
    assert np.allclose(ev.lindblad_rhs(rho, gen.sample(k)), expected, atol=1e-12)


def test_multi_matches_single(grid):
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    v = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, cs.empty_cavity(2), inputs=pu.single_input(u),
                            outputs=pu.single_output(v))
    a, b = cs.build_single(net), cs.build_multi(net)
    for k in (0, 123, 600):
        assert np.max(np.abs(a.effective_hamiltonian(k) - b.effective_hamiltonian(k))) < 1e-12


def test_hamiltonian_hermitian_at_random_times(grid):
    modes = [pu.TemporalMode(grid, np.exp(-((grid.times - 6) / 1.5) ** 2 / 2)),
             pu.TemporalMode(grid, (grid.times - 6) * np.exp(-((grid.times - 6) / 1.5) ** 2 / 2))]
    net = cs.CascadeNetwork(grid, cs.lambda_system(0.1, 0.5),
                            outputs=pu.multimode_output_couplings(modes))
    gen = cs.build_multi(net)
    rng = np.random.default_rng(0)
    for t in rng.uniform(0, 12, 100):
        assert hb.is_hermitian(gen.at(t).H, 1e-12)


def test_sparse_matches_dense(grid):
    u = pu.gaussian_mode(grid, 1.0, 6.0, detuning=2.0)
    net = cs.CascadeNetwork(grid, cs.jaynes_cummings(2.0, cavity_dim=3), inputs=pu.single_input(u),
                            input_dims=[3], outputs=pu.single_output(u), output_dims=[2])
    d, s = net.compile(sparse=False), net.compile(sparse=True)
    for k in (0, 301, 600):
        assert np.allclose(s.effective_hamiltonian(k).toarray(), d.effective_hamiltonian(k), atol=1e-14)
        for a, b in zip(s.jump_operators(k), d.jump_operators(k)):
            assert np.allclose(a.toarray(), b, atol=1e-14)


def test_blockade_without_transmission_capture(grid):
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, cs.jaynes_cummings(1.0, kappa=0.8), inputs=pu.single_input(u))
    gen = cs.build_blockade(net)
    assert gen.channel_names == ["L_r", "L_t"]
    Lt = gen.channel_operator(200, "L_t")
    assert np.allclose(Lt, math.sqrt(0.8) * net.scatterer_operator(net.scatterer.c))


def test_network_validation(grid):
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    with pytest.raises(NetworkError):
        cs.CascadeNetwork(grid, cs.empty_cavity(), transmission=pu.single_output(u))
    with pytest.raises(NetworkError):
        cs.CascadeNetwork(pu.TimeGrid(0, 12, 700), cs.empty_cavity(), inputs=pu.single_input(u))
    with pytest.raises(NetworkError):
        cs.build_single(cs.CascadeNetwork(grid, cs.jaynes_cummings(1.0), inputs=pu.single_input(u)))
    with pytest.raises(NetworkError):
        cs.build_blockade(cs.CascadeNetwork(grid, cs.empty_cavity(), inputs=pu.single_input(u)))
    with pytest.raises(NetworkError):
        cs.build_thermal(cs.CascadeNetwork(grid, cs.empty_cavity(), inputs=pu.single_input(u)))
    with pytest.raises(NetworkError):
        cs.CascadeNetwork(grid, cs.empty_cavity(), inputs=pu.single_input(u), input_dims=[2, 2])
    with pytest.raises(NetworkError):
        cs.empty_cavity(gamma=-1)
    with pytest.raises(NetworkError):
        cs.ThermalSource(1.0, 1.0, -0.5)


def test_thermal_source_relaxes_to_N():
    grid = pu.TimeGrid(0, 16, 1600)
    th = cs.ThermalSource(kappa=1.0, kappa_prime=0.5, n_tilde=1.2, dim=14)
    assert th.N == pytest.approx(0.4)
    net = cs.CascadeNetwork(grid, thermal=th)
    tr = ev.propagate(net.initial_state(thermal=hb.ket2dm(hb.fock(14, 0))), cs.build_thermal(net))
    n = net.space.populations(tr.final_state, "th") @ np.arange(14)
    assert abs(n - th.N) < 1e-3


def test_thermal_steady_state_is_stationary():
    grid = pu.TimeGrid(0, 1, 16)
    th = cs.ThermalSource.for_flux(0.8, kappa=1.0, kappa_prime=2.0, dim=20)
    assert th.flux == pytest.approx(0.8)
    net = cs.CascadeNetwork(grid, thermal=th)
    gen = cs.build_thermal(net)
    assert np.max(np.abs(ev.lindblad_rhs(th.thermal_state(), gen.sample(0)))) < 1e-10


def test_zero_flux_thermal_is_inert():
    grid = pu.TimeGrid(0, 12, 1200)
    u = pu.gaussian_mode(grid, 0.5, 6.0)
    th = cs.ThermalSource(1.0, 1.0, 0.0, dim=2)
    net = cs.CascadeNetwork(grid, thermal=th, inputs=pu.single_input(u),
                            outputs=pu.single_output(u))
    tr = ev.propagate(net.initial_state(inputs=[hb.fock(2, 1)]), cs.build_thermal(net))
    assert net.space.populations(tr.final_state, "v1")[1] > 1 - 1e-3
    assert net.space.populations(tr.final_state, "th")[0] > 1 - 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 3.0), st.floats(0.2, 2.0))
def test_rhs_trace_free_and_hermitian(seed, g, kappa):
    grid = pu.TimeGrid(0, 8, 160)
    u = pu.gaussian_mode(grid, 0.8, 4.0, detuning=g)
    net = cs.CascadeNetwork(grid, cs.jaynes_cummings(g, kappa, cavity_dim=3),
                            inputs=pu.single_input(u), input_dims=[3],
                            outputs=pu.single_output(u), transmission=pu.single_output(u))
    gen = cs.build_blockade(net)
    rng = np.random.default_rng(seed)
    rho = random_rho(rng, net.space.total_dim)
    d = ev.lindblad_rhs(rho, gen.sample(int(rng.integers(0, 161))))
    assert abs(np.trace(d)) < 1e-10
    assert np.max(np.abs(d - d.conj().T)) < 1e-10
