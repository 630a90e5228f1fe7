"""Exact first- and second-moment dynamics of linear cascades.

When every component is a harmonic oscillator (virtual cavities, an empty
cavity, a thermal source), the Heisenberg equations close on ``<a>`` and
``<a_i^dag a_j>``. The reduced state of one capture cavity is then the
input state pushed through a phase-insensitive Gaussian channel: a
beam splitter of transmissivity ``eta`` with a thermal environment, followed
by a phase rotation. This makes large thermal occupations tractable where
the dense density matrix would be far too big.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import expm

from . import hilbert as hb
from .errors import NetworkError


@dataclass
class LinearChannel:
    """``a_out = exp(i phase) (sqrt(eta) a_in + sqrt(1 - eta) e)`` with ``<e^dag e> = n_env``."""

    eta: float
    phase: float
    n_env: float
    added_noise: float

    def apply(self, rho, dim=None):
        """Channel output (Fock basis, cutoff ``dim``) for an input density matrix or ket."""
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim == 1:
            rho = hb.ket2dm(rho)
        d_in = rho.shape[0]
        dim = dim or d_in
        d_env = max(4, int(math.ceil(12 * self.n_env + 12)))
        d = max(dim, d_in) + 2
        theta = math.acos(min(1.0, math.sqrt(max(self.eta, 0.0))))
        a = np.kron(hb.annihilation(d), np.eye(d_env))
        e = np.kron(np.eye(d), hb.annihilation(d_env))
        U = expm(theta * (a.conj().T @ e - e.conj().T @ a))
        rho_in = np.zeros((d, d), complex)
        rho_in[:d_in, :d_in] = rho
        N = self.n_env
        p = (N / (1 + N)) ** np.arange(d_env) / (1 + N) if N > 0 else np.eye(1, d_env)[0]
        joint = U @ np.kron(rho_in, np.diag(p / p.sum())) @ U.conj().T
        out = hb.TensorSpace([hb.Oscillator(d, "s"), hb.Oscillator(d_env, "e")]).partial_trace(joint, 0)
        R = np.diag(np.exp(1j * self.phase * np.arange(d)))
        out = R @ out @ R.conj().T
        return out[:dim, :dim]


class LinearCascade:
    """Mode-level description of a cascade built from oscillators only.

    Parameters
    ----------
    network : cascade.CascadeNetwork
        Scatterer must be absent or an ``empty_cavity`` without dephasing.
    """

    def __init__(self, network):
        s = network.scatterer
        if s is not None and (s.kind != "empty_cavity" or s.lindblads):
            raise NetworkError("moment equations need a linear, dephasing-free scatterer")
        self.network = network
        self.labels = list(network.space.labels)
        idx = {lab: i for i, lab in enumerate(self.labels)}
        n = len(self.labels)
        self.n = n
        grid = network.grid
        ns = len(grid)
        self.grid = grid

        chain = []   # (coef array, mode index), upstream -> downstream
        h_static = np.zeros((n, n), complex)
        gain = np.zeros(n)
        loss = np.zeros(n)
        th = network.thermal
        if th is not None:
            chain.append((np.full(ns, math.sqrt(th.kappa), complex), idx["th"]))
            gain[idx["th"]] = th.n_tilde * th.kappa_prime
            loss[idx["th"]] = (th.n_tilde + 1) * th.kappa_prime
        for i in reversed(range(network.n_inputs)):
            chain.append((network.in_couplings[i].samples, idx[f"u{i + 1}"]))
        if s is not None:
            c = idx[s.factors[0].label]
            h_static[c, c] = s.params.get("detuning", 0.0)
            if s.gamma > 0:
                chain.append((np.full(ns, math.sqrt(s.gamma), complex), c))
        for i in range(network.n_outputs):
            chain.append((network.out_couplings[i].samples, idx[f"v{i + 1}"]))
        if network.transmission is not None:
            raise NetworkError("moment equations support a single channel")

        # G(k) = i h_eff-like drift with <a>' = -G <a>
        G = np.zeros((ns, n, n), complex)
        G += 1j * h_static + np.diag((loss - gain) / 2)
        for a, (ca, ia) in enumerate(chain):
            G[:, ia, ia] += np.abs(ca) ** 2 / 2
            for b in range(a):
                cb, ib = chain[b]
                # downstream mode a is driven by upstream mode b
                G[:, ia, ib] += np.conj(ca) * cb
        self.G = G
        self.D = np.diag(gain).astype(complex)

    def _rhs(self, k, Phi, N):
        G = self.G[k]
        return -G @ Phi, -(G.conj() @ N + N @ G.T) + self.D

    def propagate(self, n0):
        """Propagator ``Phi`` (``<a>(T) = Phi <a>(0)``) and ``<a_i^dag a_j>(T)`` from ``n0``."""
        Phi = np.eye(self.n, dtype=complex)
        N = np.array(n0, dtype=complex)
        h = 2 * self.grid.dt
        for k in range(0, self.grid.n_steps, 2):
            a1, b1 = self._rhs(k, Phi, N)
            a2, b2 = self._rhs(k + 1, Phi + h / 2 * a1, N + h / 2 * b1)
            a3, b3 = self._rhs(k + 1, Phi + h / 2 * a2, N + h / 2 * b2)
            a4, b4 = self._rhs(k + 2, Phi + h * a3, N + h * b3)
            Phi = Phi + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            N = N + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        return Phi, N

    def channel(self, source, target, occupations=None):
        """Gaussian channel taking the initial state of ``source`` to the final state of ``target``.

        ``occupations`` maps labels to initial thermal occupations; the
        thermal source defaults to its isolated steady state, others to vacuum.
        """
        occ = np.zeros(self.n)
        if self.network.thermal is not None:
            occ[self.labels.index("th")] = self.network.thermal.N
        for lab, v in (occupations or {}).items():
            occ[self.labels.index(lab)] = v
        i, j = self.labels.index(source), self.labels.index(target)
        occ[i] = 0.0
        Phi, N = self.propagate(np.diag(occ))
        m = Phi[j, i]
        eta = float(abs(m) ** 2)
        noise = float(N[j, j].real)
        n_env = noise / (1 - eta) if eta < 1 - 1e-12 else 0.0
        return LinearChannel(eta, float(np.angle(m)), n_env, noise)
