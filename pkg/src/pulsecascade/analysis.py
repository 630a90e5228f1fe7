"""Derived quantities and closed-form references.

Wigner functions, cat-state overlaps, low-pass-filtered pump pulses, the
one-photon transmission coefficient of a driven atom-cavity system and the
two-photon beam-splitter transformation.
"""
from dataclasses import dataclass, field
import csv
import logging
import math
import warnings

import numpy as np
from scipy import integrate, optimize, signal, special

from . import hilbert as hb
from .errors import InvalidDimensionError, TruncationError
from .pulses import TimeGrid

log = logging.getLogger(__name__)


# -- Wigner function ------------------------------------------------------------

@dataclass
class WignerGrid:
    """``values[i, j] = W(x[i], p[j])`` with ``a = (x + i p) / sqrt(2)``."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray

    @property
    def resolution(self):
        return len(self.x), len(self.p)

    def integral(self):
        return float(integrate.trapezoid(integrate.trapezoid(self.values, self.p, axis=1), self.x))

    def x_marginal(self):
        return integrate.trapezoid(self.values, self.p, axis=1)

    def p_marginal(self):
        return integrate.trapezoid(self.values, self.x, axis=0)


def wigner(rho, x, p=None):
    """Wigner function of a single-oscillator state on the grid ``x`` by ``p``.

    Sums the closed-form displaced-parity kernels of the Fock elements
    ``|m><n|``, which are generalized Laguerre polynomials. Normalized so that
    ``int W dx dp = Tr rho`` and the vacuum peaks at 1/pi.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = hb.ket2dm(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDimensionError(f"expected a single-factor density matrix, got {rho.shape}")
    x = np.asarray(x, dtype=float)
    p = x if p is None else np.asarray(p, dtype=float)
    X, P = np.meshgrid(x, p, indexing="ij")
    two_a = np.sqrt(2) * (X + 1j * P)
    r2 = np.abs(two_a) ** 2                  # 4 |alpha|^2
    W = np.zeros_like(r2)
    M = rho.shape[0]
    for m in range(M):
        W += (-1) ** m * np.real(rho[m, m]) * special.eval_laguerre(m, r2)
        for n in range(m + 1, M):
            if rho[m, n] == 0:
                continue
            k = n - m
            c = (-1) ** m * math.exp(0.5 * (math.lgamma(m + 1) - math.lgamma(n + 1)))
            W += 2 * c * np.real(rho[m, n] * two_a ** k) * special.eval_genlaguerre(m, k, r2)
    return WignerGrid(x, p, W * np.exp(-r2 / 2) / np.pi)


def save_wigner_csv(wg, path):
    """First row: ``x\\p`` then the p axis; each further row: x value then W(x, p)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x\\p"] + [repr(float(v)) for v in wg.p])
        for xi, row in zip(wg.x, wg.values):
            w.writerow([repr(float(xi))] + [repr(float(v)) for v in row])


# -- pump shaping ---------------------------------------------------------------

@dataclass
class PumpSeries:
    grid: TimeGrid
    values: np.ndarray
    params: dict = field(default_factory=dict)

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "p"])
            for t, v in zip(self.grid.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])


def lpf_filter(grid, samples, bandwidth, order=1):
    """Cascade of ``order`` first-order low-pass filters ``y' = B (x - y)``, ``y(t0) = 0``.

    Each stage is discretized exactly for an input that is linear between
    samples, so a filter cascade is exact up to that interpolation.
    """
    if order < 1:
        raise ValueError(f"filter order must be >= 1, got {order}")
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    x = np.asarray(samples, dtype=float)
    e = math.exp(-bandwidth * grid.dt)
    c0 = 1 - e
    c1 = 1 - c0 / (bandwidth * grid.dt)
    # y[k] = e y[k-1] + c1 x[k] + (c0 - c1) x[k-1]
    b, a = [c1, c0 - c1], [1.0, -e]
    for _ in range(order):
        x, _ = signal.lfilter(b, a, x, zi=[-c1 * x[0]])
    return PumpSeries(grid, x, dict(B=bandwidth, order=order))


def kpo_pump(grid, K=5.0, amplitude=4.45, bandwidth=2.5, order=4, gamma=1.0):
    """Filtered exponential pump: input ``K A exp(-gamma t)`` for ``t > 0`` through the LPF cascade."""
    t = grid.times
    p_in = np.where(t >= 0, K * amplitude * np.exp(-gamma * t), 0.0)
    p = lpf_filter(grid, p_in, bandwidth, order).values
    p[t <= 0] = 0.0
    return PumpSeries(grid, p, dict(K=K, A_p=amplitude, B=bandwidth, order=order, gamma=gamma))


# -- cat states -----------------------------------------------------------------

def cat_fidelity(rho, beta):
    """Overlap of a single-oscillator state with the even cat of amplitude ``beta``."""
    rho = np.asarray(rho)
    if rho.ndim == 2 and rho.shape[0] != rho.shape[1]:
        raise InvalidDimensionError("expected a square density matrix")
    return hb.state_fidelity(rho, hb.cat_state(rho.shape[0], beta))


def cat_photon_number(beta):
    b2 = abs(beta) ** 2
    return b2 * math.tanh(b2)


def _canonical_beta(beta):
    # the even cat is invariant under beta -> -beta; keep arg in (-pi/2, pi/2]
    if beta.real < 0 or (beta.real == 0 and beta.imag < 0):
        beta = -beta
    return beta


def optimize_beta(rho, seeds=None, xatol=1e-5, fatol=1e-6):
    """Cat amplitude maximizing :func:`cat_fidelity`; returns ``(beta, fidelity)``.

    Nelder-Mead over (Re beta, Im beta) from four quadrant seeds at the
    modulus implied by the mean photon number.
    """
    rho = np.asarray(rho)
    dim = rho.shape[0]
    if seeds is None:
        n = max(float(np.real(hb.expectation(rho, hb.number(dim)))), 0.25)
        r = math.sqrt(n)
        seeds = [r * np.exp(1j * (np.pi / 4 + k * np.pi / 2)) for k in range(4)]

    def cost(xy):
        b = complex(xy[0], xy[1])
        try:
            return -cat_fidelity(rho, b)
        except TruncationError:
            return 1.0

    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for s in seeds:
            res = optimize.minimize(cost, [s.real, s.imag], method="Nelder-Mead",
                                    options=dict(xatol=xatol, fatol=fatol))
            if best is None or res.fun < best.fun:
                best = res
    beta = _canonical_beta(complex(*best.x))
    return beta, -float(best.fun)


# -- photon blockade references ---------------------------------------------------

def blockade_transmission(omega, g, kappa=1.0):
    """Transmission ``i w / ((g^2 - w^2) - i kappa w)``; rates in units with kappa = 1."""
    omega = np.asarray(omega, dtype=float)
    return 1j * omega / ((g ** 2 - omega ** 2) - 1j * kappa * omega)


def blockade_reflection(omega, g, kappa=1.0):
    return 1 + blockade_transmission(omega, g, kappa)


def gaussian_spectrum(omega, tau, center=0.0):
    """``|u(w)|^2`` of the unit-norm Gaussian pulse with duration ``tau``."""
    return tau / math.sqrt(math.pi) * np.exp(-((omega - center) * tau) ** 2)


def blockade_populations(tau, g, kappa=1.0, carrier=None):
    """One-photon (reflected, transmitted) populations of a Gaussian pulse.

    The carrier defaults to ``g`` (resonant with a one-excitation dressed state).
    """
    carrier = g if carrier is None else carrier
    half = 12.0 / tau + abs(carrier) + 10 * kappa
    pts = sorted({carrier, g, -g, 0.0})

    def pop(coef):
        f = lambda w: abs(coef(w, g, kappa)) ** 2 * gaussian_spectrum(w, tau, carrier)
        val, _ = integrate.quad(f, carrier - half, carrier + half, points=pts, limit=400,
                                epsabs=1e-12, epsrel=1e-10)
        return val

    return pop(blockade_reflection), pop(blockade_transmission)


def beamsplitter_reference(c_v, c_w, tol=1e-6):
    """Two photons split by a beam splitter with amplitudes ``c_v``, ``c_w``.

    Returns amplitudes keyed by ``(n_v, n_w)`` for the outcomes (2,0), (0,2), (1,1).
    """
    c_v, c_w = complex(c_v), complex(c_w)
    if abs(abs(c_v) ** 2 + abs(c_w) ** 2 - 1) > tol:
        raise ValueError(f"|c_v|^2 + |c_w|^2 = {abs(c_v) ** 2 + abs(c_w) ** 2:.6g} differs from 1")
    amps = {(2, 0): math.sqrt(2) * c_v ** 2, (0, 2): math.sqrt(2) * c_w ** 2,
            (1, 1): 2 * c_v * c_w}
    norm = math.sqrt(sum(abs(a) ** 2 for a in amps.values()))
    return {k: a / norm for k, a in amps.items()}


# -- Hinton table -----------------------------------------------------------------

@dataclass
class HintonTable:
    """Dominant-eigenvector amplitudes of a joint state in its product basis.

    ``amplitudes`` has shape ``dims`` and is scaled by the square root of the
    dominant eigenvalue, so squared magnitudes sum to that eigenvalue.
    """

    labels: tuple
    dims: tuple
    amplitudes: np.ndarray
    weight: float

    def population(self, *levels):
        return float(abs(self.amplitudes[tuple(levels)]) ** 2)

    def entries(self, threshold=1e-3):
        """Sorted ``(levels, amplitude)`` pairs with ``|amplitude|^2 >= threshold``."""
        out = [(idx, self.amplitudes[idx]) for idx in np.ndindex(*self.dims)
               if abs(self.amplitudes[idx]) ** 2 >= threshold]
        return sorted(out, key=lambda e: -abs(e[1]))


def hinton_amplitudes(rho, dims, labels=None, purity_warn=0.95):
    rho = np.asarray(rho)
    dims = tuple(int(d) for d in dims)
    if rho.shape != (int(np.prod(dims)),) * 2:
        raise InvalidDimensionError(f"state {rho.shape} does not match dims {dims}")
    pur = hb.purity(rho)
    if pur < purity_warn:
        warnings.warn(f"state purity {pur:.3f} is below {purity_warn}", stacklevel=2)
    w, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    v = vecs[:, -1]
    p = v[np.argmax(np.abs(v))]
    v = v * (abs(p) / p) * math.sqrt(max(w[-1], 0.0))
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(len(dims)))
    return HintonTable(labels, dims, v.reshape(dims), float(w[-1]))
