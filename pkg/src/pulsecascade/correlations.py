"""First-order coherence kernel of an output channel and its eigenmodes.

``g1(t1, t2) = Tr{L^dag(t1) Lambda(t1, t2)[L(t2) rho(t2)]}`` for ``t1 >= t2``,
with ``Lambda`` the master-equation flow; the upper triangle follows from
Hermitian symmetry. All columns are propagated together with the state,
so one forward sweep yields the full kernel.
"""
from dataclasses import dataclass, field
import csv
import logging
import warnings

import numpy as np

from .errors import ModeError, NumericalInstabilityError
from .evolve import IntegratorConfig, dag, left_multiply, stability_ratio
from .pulses import TemporalMode, TimeGrid

log = logging.getLogger(__name__)


@dataclass
class CorrelationKernel:
    """``values[j, k] = g1(t_j, t_k)`` on ``grid`` with trapezoidal ``weights``.

    With a nonzero ``carrier`` the stored values are demodulated,
    ``g1(t_j, t_k) exp(-i carrier (t_j - t_k))``, so a coarse kernel grid
    only has to resolve the envelope; decomposed modes carry the carrier
    as their detuning.
    """

    grid: TimeGrid
    values: np.ndarray
    channel: str = "L0"
    carrier: float = 0.0
    meta: dict = field(default_factory=dict)

    def full_values(self):
        """Kernel including the carrier phase."""
        if not self.carrier:
            return self.values
        ph = np.exp(1j * self.carrier * self.times)
        return ph[:, None] * self.values * ph.conj()[None, :]

    @property
    def weights(self):
        return self.grid.weights()

    @property
    def times(self):
        return self.grid.times

    @property
    def intensity(self):
        return np.real(np.diagonal(self.values))

    def hermiticity_error(self):
        return float(np.max(np.abs(self.values - self.values.conj().T), initial=0.0))

    def total(self):
        """int g1(t, t) dt with the kernel quadrature."""
        return float(self.weights @ self.intensity)


@dataclass
class ModeSpectrum:
    occupations: np.ndarray
    modes: list
    residual: float

    def __len__(self):
        return len(self.occupations)


class _Ops:
    """Per-sample H_eff and jump operators with a small cache."""

    def __init__(self, generator, channel):
        self.gen = generator
        self.ch = generator.channel_names.index(channel)
        self.cache = {}

    def __call__(self, k):
        if k not in self.cache:
            if len(self.cache) > 4:
                self.cache.clear()
            Ls = self.gen.jump_operators(k)
            H = self.gen.effective_hamiltonian(k)
            self.cache[k] = (H, Ls)
        return self.cache[k]

    def channel(self, k):
        L = self(k)[1][self.ch]
        return L.toarray() if hasattr(L, "toarray") else L


def _flow(X, ops):
    """Master-equation flow applied to a stack of (not necessarily Hermitian) operators."""
    H, Ls = ops
    # X H^dag = (H X^dag)^dag and L X L^dag = L (L X^dag)^dag
    Xd = dag(X)
    out = -1j * (left_multiply(H, X) - dag(left_multiply(H, Xd)))
    for L in Ls:
        out += left_multiply(L, dag(left_multiply(L, Xd)))
    return out


def _rk4(X, ops, k, dt):
    o0, o1, o2 = ops(k), ops(k + 1), ops(k + 2)
    k1 = _flow(X, o0)
    k2 = _flow(X + dt / 2 * k1, o1)
    k3 = _flow(X + dt / 2 * k2, o1)
    k4 = _flow(X + dt * k3, o2)
    return X + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _kernel_samples(generator, kernel_stride):
    n = generator.grid.n_steps
    step = 2 * int(kernel_stride)
    if kernel_stride < 1 or n % step:
        raise ModeError(f"{n} samples cannot be split into kernel steps of {step} samples")
    return np.arange(0, n + 1, step)


def _demodulate(values, times, carrier):
    if not carrier:
        return values
    ph = np.exp(-1j * carrier * times)
    return ph[:, None] * values * ph.conj()[None, :]


def g1_kernel(generator, rho0, kernel_stride=4, channel=None, carrier=0.0):
    """Coherence kernel of ``channel`` on every ``kernel_stride``-th integration step.

    Parameters
    ----------
    generator : cascade.Generator
    rho0 : ndarray
        Density matrix at the first grid time.
    kernel_stride : int
        Integration steps (each two samples) between kernel times.
    channel : str, optional
        Channel name; the first (reflection) channel by default.
    carrier : float
        Detuning removed from the stored kernel (see :class:`CorrelationKernel`).
    """
    channel = channel or generator.channel_names[0]
    ratio = stability_ratio(generator)
    if ratio > IntegratorConfig.stability_limit:
        warnings.warn(f"dt*rate = {ratio:.2f} exceeds {IntegratorConfig.stability_limit}; "
                      "the kernel sweep may diverge, refine the grid", stacklevel=2)
    ops = _Ops(generator, channel)
    samples = _kernel_samples(generator, kernel_stride)
    K = len(samples)
    dt = 2 * generator.grid.dt
    D = generator.space.total_dim
    stack = np.empty((K + 1, D, D), complex)      # slot 0 holds rho, slot j+1 column j
    stack[0] = rho0
    g1 = np.zeros((K, K), complex)
    active = 1
    s = 0
    for j, target in enumerate(samples):
        while s < target:
            stack[:active] = _rk4(stack[:active], ops, s, dt)
            s += 2
        if not np.isfinite(stack[:active]).all():
            t = float(generator.grid.times[s])
            raise NumericalInstabilityError(f"non-finite kernel column at t = {t:.6g}", time=t)
        L = ops.channel(s)
        stack[active] = L @ stack[0]
        active += 1
        # Tr(L^dag X) = sum(conj(L) * X)
        g1[j, :j + 1] = np.einsum("ij,kij->k", L.conj(), stack[1:active])
    g1 = np.tril(g1) + np.tril(g1, -1).conj().T
    grid = TimeGrid(generator.grid.times[0], generator.grid.times[-1], K - 1, check=False)
    return CorrelationKernel(grid, _demodulate(g1, grid.times, carrier), channel, carrier,
                             {"kernel_stride": int(kernel_stride)})


def kernel_column(generator, rho_t2, start, kernel_stride=4, channel=None):
    """Column ``g1(t, t2)`` for kernel times ``t >= t2`` from a state restarted at sample ``start``."""
    channel = channel or generator.channel_names[0]
    ops = _Ops(generator, channel)
    samples = _kernel_samples(generator, kernel_stride)
    if start not in samples:
        raise ModeError(f"sample {start} is not a kernel time")
    dt = 2 * generator.grid.dt
    X = ops.channel(start) @ rho_t2
    out = []
    s = start
    for target in samples[samples >= start]:
        while s < target:
            X = _rk4(X, ops, s, dt)
            s += 2
        out.append(np.sum(ops.channel(s).conj() * X))
    return np.array(out)


def decompose(kernel, n_keep=None):
    """Eigenmodes of the kernel, most occupied first.

    Diagonalizes ``sqrt(w) g1 sqrt(w)``; the modes are the eigenvectors
    divided by ``sqrt(w)`` with the largest-magnitude sample made real positive.
    """
    values = np.asarray(kernel.values)
    n = values.shape[0]
    n_keep = n if n_keep is None else int(n_keep)
    if not 1 <= n_keep <= n:
        raise ValueError(f"n_keep = {n_keep} outside 1..{n}")
    sw = np.sqrt(kernel.weights)
    M = sw[:, None] * values * sw[None, :]
    M = (M + M.conj().T) / 2
    w, vecs = np.linalg.eigh(M)
    order = np.argsort(w)[::-1][:n_keep]
    modes = []
    for i in order:
        v = vecs[:, i] / sw
        p = v[np.argmax(np.abs(v))]
        v = v * (np.abs(p) / p)
        modes.append(TemporalMode(kernel.grid, v, kernel.carrier, name=f"mode{len(modes) + 1}"))
    occ = w[order]
    residual = float(np.trace(M).real - occ.sum())
    return ModeSpectrum(occ, modes, residual)


def filtered_mode_empty_cavity(u, omega_c, gamma, edge_tol=1e-6):
    """Pulse shape after reflection of ``u`` from a lossless one-sided cavity.

    Applies a unit-modulus all-pass factor in the frequency domain. ``omega_c``
    is the cavity detuning in the same convention as :func:`cascade.empty_cavity`.
    """
    f = u.field
    n = len(f)
    edge = max(1, n // 50)
    w = u.grid.weights()
    if (w[:edge] @ np.abs(f[:edge]) ** 2 + w[-edge:] @ np.abs(f[-edge:]) ** 2) > edge_tol:
        warnings.warn("mode has energy near the grid edges; the FFT filter will alias",
                      stacklevel=2)
    # creation amplitudes carry exp(+i w t), so frequency w sits in FFT bin +w
    omega = 2 * np.pi * np.fft.fftfreq(n, u.grid.dt)
    d = omega - omega_c
    H = (-1j * d + gamma / 2) / (-1j * d - gamma / 2)
    out = np.fft.ifft(H * np.fft.fft(f))
    return TemporalMode(u.grid, out, name=f"{u.name}_filtered")


# -- export -------------------------------------------------------------------

KERNEL_HEADER = "# pulsecascade-kernel"


def save_kernel_csv(kernel, path):
    """Metadata comment lines, then the real block (N rows) and imaginary block (N rows)."""
    g = kernel.grid
    with open(path, "w", newline="") as fh:
        fh.write(f"{KERNEL_HEADER} v1\n")
        fh.write(f"# t0={float(g.t0)!r} t1={float(g.t1)!r} n={len(g)} channel={kernel.channel} "
                 f"carrier={float(kernel.carrier)!r}\n")
        w = csv.writer(fh)
        for block in (kernel.values.real, kernel.values.imag):
            for row in block:
                w.writerow([repr(float(x)) for x in row])


def load_kernel_csv(path):
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith(KERNEL_HEADER):
            raise ValueError(f"{path}: missing kernel header")
        for line in fh:
            if line.startswith("#"):
                for item in line[1:].split():
                    key, _, val = item.partition("=")
                    meta[key] = val
            elif line.strip():
                rows.append([float(x) for x in line.split(",")])
    try:
        n = int(meta["n"])
        t0, t1 = float(meta["t0"]), float(meta["t1"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing metadata {exc}") from None
    data = np.array(rows)
    if data.shape != (2 * n, n):
        raise ValueError(f"{path}: expected {2 * n} rows of {n} values, got {data.shape}")
    grid = TimeGrid(t0, t1, n - 1, check=False)
    return CorrelationKernel(grid, data[:n] + 1j * data[n:], meta.get("channel", "L0"),
                             float(meta.get("carrier", 0.0)))


def save_spectrum(spectrum, occupations_path, modes_path):
    """Occupations as ``index,occupation``; modes as ``t`` plus re/im columns per mode."""
    with open(occupations_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "occupation"])
        for i, n in enumerate(spectrum.occupations):
            w.writerow([i + 1, repr(float(n))])
    if not spectrum.modes:
        return
    t = spectrum.modes[0].grid.times
    with open(modes_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{m.name}_{p}" for m in spectrum.modes for p in ("re", "im")])
        for i, ti in enumerate(t):
            row = [repr(float(ti))]
            for m in spectrum.modes:
                row += [repr(float(m.samples[i].real)), repr(float(m.samples[i].imag))]
            w.writerow(row)
