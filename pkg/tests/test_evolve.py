import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp, trapezoid

from pulsecascade import cascade as cs
from pulsecascade import evolve as ev
from pulsecascade import hilbert as hb
from pulsecascade import pulses as pu
from pulsecascade.errors import NumericalInstabilityError, SpaceMismatchError


def test_rhs_one_photon_decay():
    L = math.sqrt(0.5) * hb.annihilation(2)
    gen = cs.GeneratorAt(np.zeros((2, 2)), [L], 0.0)
    d = ev.lindblad_rhs(hb.ket2dm(hb.fock(2, 1)), gen)
    assert np.allclose(d, 0.5 * np.diag([1, -1]))
    with pytest.raises(SpaceMismatchError):
        ev.lindblad_rhs(np.eye(3) / 3, gen)


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32 - 1))
def test_rhs_trace_free(seed):
    rng = np.random.default_rng(seed)
    d = 4
    H = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Ls = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(2)]
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    out = ev.lindblad_rhs(rho / np.trace(rho), cs.GeneratorAt(H + H.conj().T, Ls, 0.0))
    assert abs(np.trace(out)) < 1e-10


def test_atom_decay():
    grid = pu.TimeGrid(0, 1, 100)
    net = cs.CascadeNetwork(grid, cs.two_level_atom(1.0))
    pe = net.space.embed(hb.projector(2, 1), 0)
    tr = ev.propagate(net.initial_state(scatterer=hb.fock(2, 1)), cs.build_single(net),
                      observables={"pe": pe})
    assert abs(tr.observables["pe"][-1].real - math.exp(-1)) < 1e-5
    assert tr.total_loss("L0") == pytest.approx(1 - math.exp(-1), abs=1e-4)


def test_coherent_input_stays_coherent():
    grid = pu.TimeGrid(0, 12, 1200)
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, inputs=pu.single_input(u), input_dims=[10])
    cfg = ev.IntegratorConfig(store_stride=5)
    tr = ev.propagate(net.initial_state(inputs=[hb.coherent_state(10, 1.0)]),
                      cs.build_single(net), cfg)
    rate = np.abs(net.in_couplings[0].samples) ** 2
    for k, rho in tr.states.items():
        t = tr.times[k]
        i = grid.index(t)
        alpha = math.exp(-0.5 * trapezoid(rate[:i + 1], dx=grid.dt)) if i else 1.0
        assert hb.state_fidelity(rho, hb.coherent_state(10, alpha)) > 1 - 1e-4


def _driven_atom_oracle(tau, t_p, gamma, alpha0, times):
    """Reduced master equation of a two-level atom under the equivalent classical drive.

    The release coupling is switched off once less than 1e-6 of the pulse
    norm remains, so the drive stops there too.
    """
    sm = hb.sigma_minus()
    C = math.sqrt(gamma) * sm

    def u(t):
        if 0.5 * math.erfc((t - t_p) / tau) < pu.EPSILON_CUT:
            return 0.0
        return math.exp(-((t - t_p) ** 2) / (2 * tau ** 2)) / (math.sqrt(tau) * math.pi ** 0.25)

    def f(t, y):
        r = y.reshape(2, 2)
        H = 1j * u(t) * (np.conj(alpha0) * C - alpha0 * C.conj().T)
        d = -1j * (H @ r - r @ H) + C @ r @ C.conj().T - 0.5 * (C.conj().T @ C @ r + r @ C.conj().T @ C)
        return d.ravel()

    sol = solve_ivp(f, (times[0], times[-1]), hb.ket2dm(hb.fock(2, 0)).ravel(), t_eval=times,
                    rtol=1e-10, atol=1e-12, method="DOP853")
    return sol.y.T.reshape(-1, 2, 2)


def test_coherent_input_factorizes():
    grid = pu.TimeGrid(0, 12, 2400)
    alpha0 = 1.2 * np.exp(0.3j)
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, cs.two_level_atom(1.0), inputs=pu.single_input(u),
                            input_dims=[12])
    tr = ev.propagate(net.initial_state(inputs=[hb.coherent_state(12, alpha0)]),
                      cs.build_single(net), ev.IntegratorConfig(store_stride=40))
    keys = sorted(tr.states)
    oracle = _driven_atom_oracle(1.0, 6.0, 1.0, alpha0, tr.times[keys])
    sp = net.space
    for k, rs in zip(keys, oracle):
        rho = tr.states[k]
        ru, ra = sp.partial_trace(rho, "u1"), sp.partial_trace(rho, "atom")
        assert np.max(np.abs(ra - rs)) < 1e-4
        assert np.max(np.abs(rho - np.kron(ru, ra))) < 1e-4
        amp = hb.expectation(ru, hb.annihilation(12))
        assert hb.state_fidelity(ru, hb.coherent_state(12, amp)) > 1 - 1e-4


def _direct_cascade(capture=True):
    grid = pu.TimeGrid(0, 12, 1200)
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, inputs=pu.single_input(u),
                            outputs=pu.single_output(u) if capture else None)
    return net, ev.propagate(net.initial_state(inputs=[hb.fock(2, 1)]), cs.build_single(net))


def test_matched_capture_is_dark():
    net, tr = _direct_cascade()
    assert net.space.populations(tr.final_state, "v1")[1] > 1 - 1e-3
    assert ev.channel_loss(tr, "L0") < 1e-3


def test_no_capture_loses_photon():
    net, tr = _direct_cascade(capture=False)
    assert ev.channel_loss(tr, "L0") == pytest.approx(1, abs=1e-3)
    half = ev.channel_loss(tr, "L0", 0, 6)
    assert half == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(ValueError):
        ev.channel_loss(tr, "L0", 0, 20)


def test_blockade_bookkeeping():
    grid = pu.TimeGrid(0, 22, 2200)
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, cs.jaynes_cummings(0.0, cavity_dim=2), inputs=pu.single_input(u))
    tr = ev.propagate(net.initial_state(inputs=[hb.fock(2, 1)]), cs.build_blockade(net))
    assert tr.total_loss("L_r") + tr.total_loss("L_t") == pytest.approx(1, abs=1e-3)


def _phase_noise_final(n_steps):
    grid = pu.TimeGrid(0, 12, n_steps)
    u = pu.gaussian_mode(grid, 1.0, 4.0)
    net = cs.CascadeNetwork(grid, cs.empty_cavity(3, 0.5, 1.0, 1.5), inputs=pu.single_input(u),
                            outputs=pu.single_output(u))
    return ev.propagate(net.initial_state(inputs=[hb.fock(2, 1)]), cs.build_single(net))


def test_step_halving_convergence():
    a, b = _phase_noise_final(600).final_state, _phase_noise_final(1200).final_state
    assert np.linalg.norm(a - b) / np.linalg.norm(b) < 1e-4


@settings(max_examples=8, deadline=None)
@given(st.floats(0.3, 1.5), st.floats(0.0, 3.0), st.floats(0.0, 2.0), st.sampled_from([1, 2]))
def test_trace_and_positivity(tau, g, gamma_p, n):
    t_end = 12 * tau + 6
    # RK4 error near the steep ends of the couplings grows with n and 1/tau
    density = max(100 * n, 40 * n / tau)
    grid = pu.TimeGrid(0, t_end, 2 * math.ceil(density * t_end / 2))
    u = pu.gaussian_mode(grid, tau, 6 * tau)
    net = cs.CascadeNetwork(grid, cs.empty_cavity(n + 2, g, 1.0, gamma_p),
                            inputs=pu.single_input(u), input_dims=[n + 1],
                            outputs=pu.single_output(u), output_dims=[n + 1])
    tr = ev.propagate(net.initial_state(inputs=[hb.fock(n + 1, n)]), cs.build_single(net),
                      ev.IntegratorConfig(positivity_checks=20, leakage_skip=("c", "v1")))
    assert tr.max_trace_error < 1e-6
    assert tr.min_eigenvalue > -1e-6
    assert not tr.warnings


def test_coarse_grid_warns_and_strict_raises():
    grid = pu.TimeGrid(0, 12, 16)
    net = cs.CascadeNetwork(grid, cs.two_level_atom(20.0))
    rho0 = net.initial_state(scatterer=hb.fock(2, 1))
    with pytest.warns(UserWarning):
        tr = ev.propagate(rho0, cs.build_single(net))
    assert tr.warnings
    with pytest.raises(NumericalInstabilityError):
        ev.propagate(rho0, cs.build_single(net), ev.IntegratorConfig(strict=True))


def test_leakage_monitor():
    grid = pu.TimeGrid(0, 12, 1200)
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, cs.empty_cavity(3), inputs=pu.single_input(u), input_dims=[3])
    rho0 = net.initial_state(inputs=[hb.fock(3, 2)])
    with pytest.warns(UserWarning, match="c"):
        tr = ev.propagate(rho0, cs.build_single(net))
    assert tr.leakage["c"] > 1e-4
    assert tr.leakage["u1"] == 0


def test_window_validation():
    net, _ = _direct_cascade()
    gen = cs.build_single(net)
    with pytest.raises(ValueError):
        ev.propagate(net.initial_state(), gen, start=0, stop=3)
    with pytest.raises(SpaceMismatchError):
        ev.propagate(np.eye(2), gen)


def test_partial_window_matches_full():
    net, full = _direct_cascade()
    gen = cs.build_single(net)
    rho0 = net.initial_state(inputs=[hb.fock(2, 1)])
    first = ev.propagate(rho0, gen, stop=600)
    second = ev.propagate(first.final_state, gen, start=600)
    assert np.allclose(second.final_state, full.final_state, atol=1e-13)


def test_state_and_observable_export(tmp_path):
    net, _ = _direct_cascade()
    gen = cs.build_single(net)
    n_v = net.space.embed(hb.number(2), "v1")
    tr = ev.propagate(net.initial_state(inputs=[hb.fock(2, 1)]), gen,
                      ev.IntegratorConfig(store_stride=100), observables={"n_v": n_v})
    ev.save_states(tr, tmp_path / "s.bin")
    dims, labels, stride, times, data = ev.load_states(tmp_path / "s.bin")
    assert dims == net.space.dims and labels == list(net.space.labels) and stride == 100
    keys = sorted(tr.states)
    assert np.array_equal(times, tr.times[keys])
    assert np.array_equal(data[-1], tr.states[keys[-1]])
    ev.save_observables_csv(tr, tmp_path / "o.csv")
    rows = list(csv.reader(open(tmp_path / "o.csv")))
    assert rows[0] == ["t", "n_v", "rate_L0", "loss_L0"]
    assert len(rows) == len(tr.times) + 1
    assert float(rows[-1][1]) == pytest.approx(1, abs=1e-3)
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        ev.load_states(tmp_path / "bad.bin")
