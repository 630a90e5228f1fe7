"""Compile a cascaded network into a time-dependent Hamiltonian and jump operators.

A network is a chain along one waveguide: optional thermal source cavity,
input (release) cavities ``u_n .. u_1``, the scatterer, and capture
cavities ``v_1 .. v_m``. A two-sided scatterer adds a second channel
(transmission) with an optional capture cavity ``w``.

Each channel contributes one collective jump operator ``L = sum_k L_k`` and
the cascade Hamiltonian ``(i/2) sum_{k upstream of j} (L_k^dag L_j - h.c.)``.
"""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import sparse as sp

from . import hilbert as hb
from .errors import NetworkError
from .pulses import CouplingFunction, ModeBundle, TimeGrid

log = logging.getLogger(__name__)


@dataclass
class Scatterer:
    """Localized quantum system coupled to the waveguide through ``c``.

    Operators are defined on the scatterer's own factors (kron order).
    ``hamiltonian`` terms are ``(coefficient, operator)`` pairs where the
    coefficient is a scalar or an array sampled on the network grid.
    ``gamma`` is the emission rate into the waveguide (per mirror when
    ``two_sided``).
    """

    kind: str
    factors: list
    c: np.ndarray
    gamma: float
    hamiltonian: list = field(default_factory=list)
    lindblads: list = field(default_factory=list)
    two_sided: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma < 0:
            raise NetworkError(f"emission rate must be nonnegative, got {self.gamma}")
        d = int(np.prod([f.dim for f in self.factors]))
        if self.c.shape != (d, d):
            raise NetworkError("coupling operator does not match scatterer factors")

    @property
    def dim(self):
        return int(np.prod([f.dim for f in self.factors]))

    def local_space(self):
        return hb.TensorSpace(self.factors)


def _rate(name, value):
    if value < 0:
        raise NetworkError(f"{name} must be nonnegative, got {value}")
    return float(value)


def empty_cavity(dim=3, detuning=0.0, gamma=1.0, gamma_phase=0.0):
    """Linear cavity; optional dephasing ``sqrt(gamma_phase) c^dag c``."""
    a = hb.annihilation(dim)
    n = a.conj().T @ a
    lind = []
    if _rate("gamma_phase", gamma_phase) > 0:
        lind.append(("phase", np.sqrt(gamma_phase) * n))
    return Scatterer("empty_cavity", [hb.Oscillator(dim, "c")], a, _rate("gamma", gamma),
                     [(detuning, n)] if detuning else [], lind,
                     params=dict(detuning=detuning, gamma_phase=gamma_phase))


def two_level_atom(gamma=1.0, detuning=0.0):
    sm = hb.sigma_minus()
    ham = [(detuning, sm.conj().T @ sm)] if detuning else []
    return Scatterer("two_level_atom", [hb.NLevel(2, "atom")], sm, _rate("gamma", gamma), ham,
                     params=dict(detuning=detuning))


def jaynes_cummings(g, kappa=1.0, cavity_dim=3, two_sided=True):
    """Atom in a cavity, ``H = g (a s+ + a^dag s-)``; ``c`` is the cavity field.

    With ``two_sided`` each mirror couples with rate ``kappa``.
    """
    space = hb.TensorSpace([hb.NLevel(2, "atom"), hb.Oscillator(cavity_dim, "cav")])
    sm = space.embed(hb.sigma_minus(), 0)
    a = space.embed(hb.annihilation(cavity_dim), 1)
    h = g * (a @ sm.conj().T + a.conj().T @ sm)
    return Scatterer("jaynes_cummings", list(space.factors), a, _rate("kappa", kappa),
                     [(1.0, h)], two_sided=two_sided, params=dict(g=g, kappa=kappa))


def kpo(K, pump, dim=22, gamma=1.0, detuning=0.0):
    """Kerr parametric oscillator driven by a sampled pump ``p(t)``.

    ``H = p(t)/2 (a^dag^2 + a^2) - K/2 a^dag^2 a^2 + detuning a^dag a``.
    """
    a = hb.annihilation(dim)
    ad = a.conj().T
    pump = np.asarray(getattr(pump, "values", pump), dtype=float)
    ham = [(pump / 2, ad @ ad + a @ a), (-K / 2, ad @ ad @ a @ a)]
    if detuning:
        ham.append((detuning, ad @ a))
    return Scatterer("kpo", [hb.Oscillator(dim, "kpo")], a, _rate("gamma", gamma), ham,
                     params=dict(K=K, detuning=detuning))


def lambda_system(g, omega12, gamma=1.0, cavity_dim=3):
    """Lambda atom (levels g1, g2, e) in a one-sided cavity that leaks at ``gamma``.

    Both transitions couple to the cavity with strength ``g``; the g2-e
    transition is detuned by ``omega12``.
    """
    G1, G2, E = 0, 1, 2
    space = hb.TensorSpace([hb.NLevel(3, "atom"), hb.Oscillator(cavity_dim, "cav")])
    a = space.embed(hb.annihilation(cavity_dim), 1)
    s1 = space.embed(hb.projector(3, G1, E), 0)
    s2 = space.embed(hb.projector(3, G2, E), 0)
    h = g * (a.conj().T @ s1 + a.conj().T @ s2)
    h = h + h.conj().T + omega12 * space.embed(hb.projector(3, G2), 0)
    return Scatterer("lambda_system", list(space.factors), a, _rate("gamma", gamma), [(1.0, h)],
                     params=dict(g=g, omega12=omega12))


@dataclass(frozen=True)
class ThermalSource:
    """Cavity with output rate ``kappa`` and bath coupling ``kappa_prime`` at occupation ``n_tilde``."""

    kappa: float
    kappa_prime: float
    n_tilde: float
    dim: int = 20

    def __post_init__(self):
        if self.n_tilde < 0:
            raise NetworkError(f"bath occupation must be nonnegative, got {self.n_tilde}")
        _rate("kappa", self.kappa)
        _rate("kappa_prime", self.kappa_prime)

    @property
    def N(self):
        """Mean photon number of the isolated source."""
        if self.kappa_prime == 0:
            return 0.0
        return self.n_tilde / (1 + self.kappa / self.kappa_prime)

    @property
    def flux(self):
        return self.kappa * self.N

    @staticmethod
    def for_flux(flux, kappa=1.0, kappa_prime=1.0, dim=20):
        """Source whose output photon flux ``kappa N`` equals ``flux``."""
        N = flux / kappa
        return ThermalSource(kappa, kappa_prime, N * (1 + kappa / kappa_prime), dim)

    def thermal_state(self, dim=None):
        dim = self.dim if dim is None else dim
        N = self.N
        p = (N / (1 + N)) ** np.arange(dim) / (1 + N) if N > 0 else np.eye(1, dim)[0]
        return np.diag(p / p.sum()).astype(complex)


@dataclass
class GeneratorAt:
    """Hamiltonian and named jump operators at time ``time``."""

    H: np.ndarray
    lindblads: list
    time: float
    names: list = field(default_factory=list)


SPARSE_DIM = 128


class _SparseCombo:
    """Time-dependent linear combination sum_i c_i(k) O_i on the union sparsity pattern."""

    def __init__(self, coefs, ops):
        mats = [sp.csr_matrix(op) for op in ops]
        shape = mats[0].shape
        union = sum((abs(m) for m in mats), sp.csr_matrix(shape)).tocsr()
        union.sort_indices()
        union.data[:] = 1.0
        rows = np.repeat(np.arange(shape[0]), np.diff(union.indptr))
        cols = union.indices
        self.vals = np.array([np.asarray(m[rows, cols]).ravel() for m in mats])  # (terms, nnz)
        self.coefs = np.asarray(coefs)                                          # (terms, samples)
        self.indices, self.indptr, self.shape = union.indices, union.indptr, shape

    def at(self, k):
        data = self.coefs[:, k] @ self.vals
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


class Generator:
    """Compiled network: evaluates H(t), {L_k(t)} and H_eff(t) on the sample grid.

    Master-equation integrators step over pairs of samples, so every RK4
    stage time is a sample and coupling functions are never interpolated.
    With ``sparse`` (default: dimension >= 128) H_eff and the jump operators
    are returned as CSR matrices.
    """

    def __init__(self, space, grid, hamiltonian, channels, static_lindblads, labels=None,
                 sparse=None):
        self.space = space
        self.sparse = space.total_dim >= SPARSE_DIM if sparse is None else bool(sparse)
        self.grid = grid
        self.labels = labels or {}
        n = len(grid)
        D = space.total_dim

        def coef(c):
            c = np.asarray(c, dtype=complex)
            if c.ndim == 0:
                return np.full(n, complex(c))
            if c.shape != (n,):
                raise NetworkError(f"time series of length {c.shape[0]} on a grid of {n} samples")
            return c

        self._h_coefs = [coef(c) for c, _ in hamiltonian]
        self._h_ops = [np.asarray(op, dtype=complex) for _, op in hamiltonian]
        for op in self._h_ops:
            if op.shape != (D, D):
                raise NetworkError("Hamiltonian term does not match the network space")
        # channels: list of (name, [(coef, op), ...]) ordered upstream -> downstream
        self.channel_names = [name for name, _ in channels]
        self._channels = [[(coef(c), np.asarray(op, complex)) for c, op in comps]
                          for _, comps in channels]
        self._static = [(name, np.asarray(op, complex)) for name, op in static_lindblads]
        self.lindblad_names = self.channel_names + [name for name, _ in self._static]

        # H_eff = H - i/2 sum L^dag L  reduces, per channel, to
        #   -i sum_{a downstream of b} conj(c_a) c_b O_a^dag O_b - i/2 sum_a |c_a|^2 O_a^dag O_a
        coefs, ops = [], []
        for c, op in zip(self._h_coefs, self._h_ops):
            coefs.append(c)
            ops.append(op)
        for comps in self._channels:
            for a, (ca, oa) in enumerate(comps):
                oad = oa.conj().T
                coefs.append(-0.5j * np.abs(ca) ** 2)
                ops.append(oad @ oa)
                for b in range(a):
                    cb, ob = comps[b]
                    coefs.append(-1j * np.conj(ca) * cb)
                    ops.append(oad @ ob)
        static_decay = sum((op.conj().T @ op for _, op in self._static), np.zeros((D, D), complex))
        if self._static:
            coefs.append(np.full(n, -0.5j))
            ops.append(static_decay)
        self._eff_coefs = np.array(coefs)           # (terms, samples)
        self._eff_ops = np.array(ops)               # (terms, D, D)
        self._static_ops = [op for _, op in self._static]
        if self.sparse:
            self._eff_sparse = _SparseCombo(self._eff_coefs, self._eff_ops)
            self._chan_sparse = [_SparseCombo([c for c, _ in comps], [op for _, op in comps])
                                 for comps in self._channels]
            self._static_sparse = [sp.csr_matrix(op) for op in self._static_ops]

    def rate_bound(self):
        """Cheap per-sample upper bound on the fastest rate of the master equation."""
        n = len(self.grid)
        out = np.zeros(n)
        for c, op in zip(self._h_coefs, self._h_ops):
            if np.all(np.abs(c.imag) < 1e-14) and hb.is_hermitian(op):
                ev = np.linalg.eigvalsh(op)
                out += np.abs(c.real) * (ev[-1] - ev[0])
            else:
                out += 2 * np.abs(c) * np.linalg.norm(op, 2)
        for comps in self._channels:
            norms = [np.abs(c) * np.linalg.norm(op, 2) for c, op in comps]
            tot = sum(norms)
            out += tot ** 2
            # cascade Hamiltonian, bounded by the pairwise products
            out += tot ** 2 - sum(x ** 2 for x in norms)
        for op in self._static_ops:
            out += np.linalg.norm(op, 2) ** 2
        return out

    # -- sample-indexed evaluation ------------------------------------------------
    @property
    def n_samples(self):
        return len(self.grid)

    def hamiltonian(self, k):
        D = self.space.total_dim
        H = np.zeros((D, D), complex)
        for c, op in zip(self._h_coefs, self._h_ops):
            H += c[k] * op
        for comps in self._channels:
            for a, (ca, oa) in enumerate(comps):
                for b in range(a):
                    cb, ob = comps[b]
                    # i/2 (L_b^dag L_a - L_a^dag L_b) with b upstream of a
                    term = 0.5j * np.conj(cb[k]) * ca[k] * (ob.conj().T @ oa)
                    H += term + term.conj().T
        return H

    def channel_operator(self, k, channel=0):
        if isinstance(channel, str):
            channel = self.channel_names.index(channel)
        comps = self._channels[channel]
        return sum(c[k] * op for c, op in comps)

    def jump_operators(self, k):
        if self.sparse:
            return [c.at(k) for c in self._chan_sparse] + self._static_sparse
        return [self.channel_operator(k, i) for i in range(len(self._channels))] + self._static_ops

    def effective_hamiltonian(self, k):
        if self.sparse:
            return self._eff_sparse.at(k)
        return np.tensordot(self._eff_coefs[:, k], self._eff_ops, axes=1)

    def sample(self, k):
        return GeneratorAt(self.hamiltonian(k), self.jump_operators(k),
                           float(self.grid.times[k]), list(self.lindblad_names))

    def at(self, t):
        """Generator at time ``t``; exact on samples, linear in between."""
        x = (t - self.grid.t0) / self.grid.dt
        k = int(np.floor(x + 1e-9))
        frac = x - k
        if k < 0 or k > self.grid.n_steps or (k == self.grid.n_steps and frac > 1e-9):
            raise NetworkError(f"time {t} outside the network grid")
        if frac < 1e-9 or k == self.grid.n_steps:
            return self.sample(k)
        g0, g1 = self.sample(k), self.sample(k + 1)
        return GeneratorAt((1 - frac) * g0.H + frac * g1.H,
                           [(1 - frac) * a + frac * b for a, b in zip(g0.lindblads, g1.lindblads)],
                           float(t), g0.names)

    def __call__(self, t):
        return self.at(t)


class CascadeNetwork:
    """Declarative cascade; factor order ``u1..un, th, scatterer, v1..vm, w``.

    Parameters
    ----------
    grid : TimeGrid
        Sample grid shared by every coupling function and time series.
    scatterer : Scatterer or None
        ``None`` gives a bare channel (virtual cavities only).
    inputs, outputs : ModeBundle or None
        Release and capture cavity bundles.
    thermal : ThermalSource or None
    transmission : ModeBundle, CouplingFunction or None
        Capture cavity in the transmission channel of a two-sided scatterer.
    input_dims, output_dims : list of int
        Fock cutoffs of the virtual cavities (default 2).
    """

    def __init__(self, grid, scatterer=None, inputs=None, outputs=None, thermal=None,
                 transmission=None, input_dims=None, output_dims=None, transmission_dim=2):
        self.grid = grid
        self.scatterer = scatterer
        self.inputs = inputs
        self.outputs = outputs
        self.thermal = thermal
        if isinstance(transmission, ModeBundle):
            transmission = transmission.couplings[0]
        self.transmission = transmission
        self.in_couplings = list(inputs.couplings) if inputs is not None else []
        self.out_couplings = list(outputs.couplings) if outputs is not None else []
        n, m = len(self.in_couplings), len(self.out_couplings)
        self.input_dims = list(input_dims) if input_dims is not None else [2] * n
        self.output_dims = list(output_dims) if output_dims is not None else [2] * m
        if len(self.input_dims) != n or len(self.output_dims) != m:
            raise NetworkError("one Fock cutoff is needed per virtual cavity")
        if transmission is not None and (scatterer is None or not scatterer.two_sided):
            raise NetworkError("a transmission capture cavity needs a two-sided scatterer")
        for g in self.in_couplings + self.out_couplings + ([transmission] if transmission else []):
            if g.grid != grid:
                raise NetworkError("coupling function grid differs from the network grid")

        factors = [hb.Oscillator(d, f"u{i + 1}") for i, d in enumerate(self.input_dims)]
        if thermal is not None:
            factors.append(hb.Oscillator(thermal.dim, "th"))
        self.scatterer_start = len(factors)
        if scatterer is not None:
            factors.extend(scatterer.factors)
        self.scatterer_stop = len(factors)
        factors += [hb.Oscillator(d, f"v{i + 1}") for i, d in enumerate(self.output_dims)]
        if transmission is not None:
            factors.append(hb.Oscillator(transmission_dim, "w"))
        self.space = hb.TensorSpace(factors)

    @property
    def n_inputs(self):
        return len(self.in_couplings)

    @property
    def n_outputs(self):
        return len(self.out_couplings)

    def operator(self, label):
        """Annihilation operator of a named oscillator factor."""
        i = self.space.index(label)
        return self.space.embed(hb.annihilation(self.space.dims[i]), i)

    def scatterer_operator(self, op):
        """Embed an operator given on the scatterer's own factors."""
        if self.scatterer is None:
            raise NetworkError("network has no scatterer")
        return self.space.embed(op, slice(self.scatterer_start, self.scatterer_stop))

    def compile(self, sparse=None):
        space = self.space
        s = self.scatterer
        ham = []
        static = []
        c_full = None
        if s is not None:
            c_full = self.scatterer_operator(s.c)
            ham = [(coef, self.scatterer_operator(op)) for coef, op in s.hamiltonian]
            static += [(name, self.scatterer_operator(op)) for name, op in s.lindblads]

        main = []
        if self.thermal is not None:
            th = self.thermal
            a_in = self.operator("th")
            main.append((np.sqrt(th.kappa), a_in))
            if th.n_tilde > 0:
                static.append(("thermal_plus", np.sqrt(th.n_tilde * th.kappa_prime) * a_in.conj().T))
            static.append(("thermal_minus", np.sqrt((th.n_tilde + 1) * th.kappa_prime) * a_in))
        # u_n is most upstream, u_1 releases straight onto the scatterer
        for i in reversed(range(self.n_inputs)):
            main.append((self.in_couplings[i].samples, self.operator(f"u{i + 1}")))
        if s is not None and s.gamma > 0:
            main.append((np.sqrt(s.gamma), c_full))
        for i in range(self.n_outputs):
            main.append((self.out_couplings[i].samples, self.operator(f"v{i + 1}")))
        if not main:
            raise NetworkError("network has no waveguide coupling")

        channels = []
        if s is not None and s.two_sided:
            channels.append(("L_r", main))
            trans = [(np.sqrt(s.gamma), c_full)]
            if self.transmission is not None:
                trans.append((self.transmission.samples, self.operator("w")))
            channels.append(("L_t", trans))
        else:
            channels.append(("L0", main))
        labels = {"scatterer": (self.scatterer_start, self.scatterer_stop)}
        return Generator(space, self.grid, ham, channels, static, labels, sparse=sparse)

    # -- states -----------------------------------------------------------
    def initial_state(self, inputs=None, scatterer=None, outputs=None, thermal=None,
                      transmission=None):
        """Product density matrix; omitted parts start in their ground/vacuum state.

        The thermal source defaults to its isolated steady state.
        """
        parts = []
        inputs = inputs or [None] * self.n_inputs
        for d, st in zip(self.input_dims, inputs):
            parts.append(hb.fock(d, 0) if st is None else st)
        if self.thermal is not None:
            parts.append(self.thermal.thermal_state() if thermal is None else thermal)
        if self.scatterer is not None:
            if scatterer is None:
                scatterer = hb.fock(self.scatterer.dim, 0)
            parts.append(scatterer)
        outputs = outputs or [None] * self.n_outputs
        for d, st in zip(self.output_dims, outputs):
            parts.append(hb.fock(d, 0) if st is None else st)
        if self.transmission is not None:
            d = self.space.dims[-1]
            parts.append(hb.fock(d, 0) if transmission is None else transmission)
        rho = np.ones((1, 1), complex)
        for p in parts:
            p = np.asarray(p, complex)
            if p.ndim == 1:
                p = np.outer(p, p.conj())
            rho = np.kron(rho, p)
        return rho


def _require(cond, message):
    if not cond:
        raise NetworkError(message)


def build_single(network):
    """One input cavity (or none) and at most one capture cavity."""
    _require(network.n_inputs <= 1, "build_single takes at most one input mode")
    _require(network.n_outputs <= 1, "build_single takes at most one output mode")
    _require(network.thermal is None, "use build_thermal for networks with a thermal source")
    _require(network.scatterer is None or not network.scatterer.two_sided,
             "use build_blockade for two-sided scatterers")
    return network.compile()


def build_multi(network):
    _require(network.thermal is None, "use build_thermal for networks with a thermal source")
    _require(network.scatterer is None or not network.scatterer.two_sided,
             "use build_blockade for two-sided scatterers")
    for b in (network.inputs, network.outputs):
        _require(b is None or isinstance(b, ModeBundle), "multimode networks need ModeBundles")
    return network.compile()


def build_blockade(network):
    s = network.scatterer
    _require(s is not None and s.kind == "jaynes_cummings" and s.two_sided,
             "blockade networks need a two-sided Jaynes-Cummings scatterer")
    _require(network.n_inputs == 1, "blockade networks take exactly one input mode")
    _require(network.n_outputs <= 1, "blockade networks take at most one reflection capture")
    if "kappa_2" in s.params and s.params["kappa_2"] != s.gamma:
        raise NetworkError("asymmetric mirror rates are not supported")
    return network.compile()


def build_thermal(network):
    _require(network.thermal is not None, "network has no thermal source")
    return network.compile()
