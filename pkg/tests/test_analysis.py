import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.linalg import expm

from pulsecascade import analysis as an
from pulsecascade import hilbert as hb
from pulsecascade import pulses as pu
from pulsecascade.errors import InvalidDimensionError


def random_rho(rng, d, rank=None):
    rank = rank or d
    m = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    r = m @ m.conj().T
    return r / np.trace(r)


def wigner_by_parity(rho, x, p, big=40):
    """Oracle: W = Tr[rho D(a) P D(a)^dag] / pi with a = (x + ip)/sqrt(2), on a padded space."""
    d = rho.shape[0]
    r = np.zeros((big, big), complex)
    r[:d, :d] = rho
    a = hb.annihilation(big)
    alpha = (x + 1j * p) / math.sqrt(2)
    Dop = expm(alpha * a.conj().T - np.conj(alpha) * a)
    parity = np.diag((-1.0) ** np.arange(big))
    return float(np.real(np.trace(r @ Dop @ parity @ Dop.conj().T))) / math.pi


def test_wigner_vacuum_and_one_photon():
    x = np.linspace(-1, 1, 3)
    assert an.wigner(hb.fock(4, 0), x).values[1, 1] == pytest.approx(1 / math.pi, abs=1e-6)
    assert an.wigner(hb.fock(4, 1), x).values[1, 1] == pytest.approx(-1 / math.pi, abs=1e-6)


def test_wigner_vacuum_marginal():
    x = np.linspace(-7, 7, 281)
    wg = an.wigner(hb.fock(3, 0), x)
    assert wg.resolution == (281, 281)
    assert np.allclose(wg.x_marginal(), np.exp(-x ** 2) / math.sqrt(math.pi), atol=1e-8)
    assert wg.integral() == pytest.approx(1, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_wigner_matches_displaced_parity(seed):
    rng = np.random.default_rng(seed)
    rho = random_rho(rng, 5)
    pts = rng.uniform(-2.5, 2.5, size=(4, 2))
    for x, p in pts:
        W = an.wigner(rho, np.array([x]), np.array([p])).values[0, 0]
        assert W == pytest.approx(wigner_by_parity(rho, x, p), abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_wigner_normalized(seed):
    rho = random_rho(np.random.default_rng(seed), 6)
    x = np.linspace(-8, 8, 241)
    assert an.wigner(rho, x).integral() == pytest.approx(1, abs=1e-6)


def test_wigner_rejects_bad_shape():
    with pytest.raises(InvalidDimensionError):
        an.wigner(np.ones((2, 3)), np.zeros(3))


def test_cat_wigner_has_negative_fringes():
    x = np.linspace(-4, 4, 81)
    W = an.wigner(hb.cat_state(22, 2 * np.exp(-0.31j * np.pi)), x).values
    assert W.min() < -0.1
    assert W.max() > 0.1


def test_wigner_csv(tmp_path):
    wg = an.wigner(hb.fock(3, 1), np.linspace(-1, 1, 5), np.linspace(-2, 2, 3))
    an.save_wigner_csv(wg, tmp_path / "w.csv")
    data = np.loadtxt(tmp_path / "w.csv", delimiter=",", skiprows=1)
    assert data.shape == (5, 4)
    assert np.array_equal(data[:, 1:], wg.values)


def test_lpf_constant_input():
    grid = pu.TimeGrid(0, 20, 2000)
    y = an.lpf_filter(grid, np.full(2001, 3.0), 2.5, 4).values
    assert y[0] == 0
    assert y[-1] == pytest.approx(3.0, abs=1e-9)


def test_lpf_impulse_response():
    B = 2.5
    grid = pu.TimeGrid(0, 6, 60000)
    t = grid.times
    w = 0.002
    pulse = np.exp(-((t - 0.5) / w) ** 2 / 2) / (w * math.sqrt(2 * math.pi))
    y = an.lpf_filter(grid, pulse, B, 1).values
    late = t > 0.6
    assert np.allclose(y[late], B * np.exp(-B * (t[late] - 0.5)), rtol=1e-4)


def test_kpo_pump_matches_ode():
    K, A, B, gamma = 5.0, 4.45, 2.5, 1.0
    grid = pu.TimeGrid(0, 14, 7000)
    pump = an.kpo_pump(grid, K, A, B, 4, gamma)

    def f(t, y):
        x = K * A * math.exp(-gamma * t)
        return B * (np.concatenate([[x], y[:-1]]) - y)

    sol = solve_ivp(f, (0, 14), np.zeros(4), t_eval=grid.times, rtol=1e-11, atol=1e-12,
                    method="DOP853")
    assert np.max(np.abs(pump.values - sol.y[-1])) < 1e-5 * np.max(sol.y[-1])
    with pytest.raises(ValueError):
        an.lpf_filter(grid, pump.values, -1.0)
    with pytest.raises(ValueError):
        an.lpf_filter(grid, pump.values, 1.0, 0)


def test_cat_fidelity_and_photon_number(oracles):
    beta = 2 * np.exp(-0.31j * np.pi)
    rho = hb.ket2dm(hb.cat_state(22, beta))
    assert an.cat_fidelity(rho, beta) == pytest.approx(1, abs=1e-12)
    assert an.cat_fidelity(rho, -beta) == pytest.approx(1, abs=1e-12)
    assert an.cat_photon_number(2.0) == pytest.approx(oracles["cat_mean_2"], abs=1e-12)


def _brute_force_beta(rho):
    """Grid search over |beta| in [1.5, 2.5] and all phases, then a finer grid around the best."""
    def search(rs, phis):
        return max((an.cat_fidelity(rho, r * np.exp(1j * phi)), r, phi) for r in rs for phi in phis)

    f, r, phi = search(np.linspace(1.5, 2.5, 101), np.linspace(-np.pi, np.pi, 361))
    f, r, phi = search(np.linspace(r - 0.01, r + 0.01, 41), np.linspace(phi - 0.01, phi + 0.01, 41))
    return f, r * np.exp(1j * phi)


@pytest.mark.parametrize("beta0", [1.9 * np.exp(-0.31j * np.pi), 2.2 * np.exp(0.7j)])
def test_optimize_beta_matches_grid_search(beta0):
    rng = np.random.default_rng(3)
    noise = random_rho(rng, 30, rank=2)
    rho = 0.9 * hb.ket2dm(hb.cat_state(30, beta0)) + 0.1 * noise
    beta, fid = an.optimize_beta(rho)
    f_grid, b_grid = _brute_force_beta(rho)
    assert min(abs(beta - b_grid), abs(beta + b_grid)) < 1e-2
    assert fid >= f_grid - 1e-6
    assert beta.real >= 0


def test_blockade_coefficients():
    assert an.blockade_transmission(2.0, 2.0) == pytest.approx(-1)
    assert abs(an.blockade_reflection(2.0, 2.0)) < 1e-15
    assert an.blockade_transmission(0.0, 1.5) == 0
    assert an.blockade_reflection(0.0, 1.5) == 1
    w = np.linspace(-5, 5, 101) + 0.01
    for g in (0.0, 2.0):
        T = an.blockade_transmission(w, g)
        # lossless two-sided cavity: |R|^2 + |T|^2 = 1
        assert np.allclose(np.abs(1 + T) ** 2 + np.abs(T) ** 2, 1)


def test_gaussian_spectrum_normalized():
    val, _ = quad(lambda w: an.gaussian_spectrum(w, 0.7, 1.3), -np.inf, np.inf)
    assert val == pytest.approx(1, abs=1e-10)


def test_blockade_populations_oracle(oracles):
    for key, (R, T) in oracles["blockade_one_photon"].items():
        tau, g = map(float, key.split(","))
        r, t = an.blockade_populations(tau, g)
        assert r == pytest.approx(R, abs=1e-8) and t == pytest.approx(T, abs=1e-8)


def test_beamsplitter_reference():
    amps = an.beamsplitter_reference(1, 0)
    assert abs(amps[(2, 0)]) == pytest.approx(1) and abs(amps[(1, 1)]) == 0
    c = 1 / math.sqrt(2)
    pops = {k: abs(a) ** 2 for k, a in an.beamsplitter_reference(c, c).items()}
    assert pops == pytest.approx({(2, 0): 0.25, (0, 2): 0.25, (1, 1): 0.5})
    with pytest.raises(ValueError):
        an.beamsplitter_reference(1, 1)


def test_hinton_product_state():
    sp = hb.TensorSpace([hb.NLevel(3, "atom"), hb.Oscillator(2, "v1"), hb.Oscillator(2, "v2")])
    H = an.hinton_amplitudes(hb.ket2dm(sp.basis(0, 1, 0)), (3, 2, 2), ("atom", "v1", "v2"))
    entries = H.entries()
    assert len(entries) == 1 and entries[0][0] == (0, 1, 0)
    assert H.population(0, 1, 0) == pytest.approx(1)


@settings(max_examples=20, deadline=None)
# p >= 0.98 keeps the purity above the warning floor
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.98, 1.0))
def test_hinton_weights_sum(seed, p):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=12) + 1j * rng.normal(size=12)
    psi /= np.linalg.norm(psi)
    rho = p * hb.ket2dm(psi) + (1 - p) * np.eye(12) / 12
    H = an.hinton_amplitudes(rho, (3, 2, 2))
    assert np.sum(np.abs(H.amplitudes) ** 2) == pytest.approx(H.weight, abs=1e-6)
    assert H.weight == pytest.approx(np.linalg.eigvalsh(rho)[-1], abs=1e-12)


def test_hinton_warns_and_validates():
    with pytest.warns(UserWarning):
        an.hinton_amplitudes(np.eye(4) / 4, (2, 2))
    with pytest.raises(InvalidDimensionError):
        an.hinton_amplitudes(np.eye(4) / 4, (2, 3))
