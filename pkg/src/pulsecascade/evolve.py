"""Fixed-step RK4 integration of the time-dependent Lindblad master equation."""
from dataclasses import dataclass, field
import csv
import logging
import struct
import warnings

import numpy as np
from scipy import sparse as sp
from scipy.integrate import cumulative_trapezoid

from .errors import NumericalInstabilityError, SpaceMismatchError
from .hilbert import NLevel
from .pulses import TimeGrid

log = logging.getLogger(__name__)


def lindblad_rhs(rho, gen):
    """-i[H, rho] + sum_k (L rho L^dag - 1/2 {L^dag L, rho}) for a :class:`GeneratorAt`."""
    rho = np.asarray(rho)
    H = gen.H
    if rho.shape != H.shape:
        raise SpaceMismatchError(f"state {rho.shape} vs generator {H.shape}")
    out = -1j * (H @ rho - rho @ H)
    for L in gen.lindblads:
        Ld = L.conj().T
        LdL = Ld @ L
        out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


@dataclass
class IntegratorConfig:
    """Settings for :func:`propagate`.

    The time step is twice the generator's sample spacing; refine the
    network grid to shrink it.
    """

    store_stride: int = 10
    trace_tol: float = 1e-6
    positivity_tol: float = 1e-6
    positivity_checks: int = 10
    leakage_tol: float = 1e-4
    leakage_skip: tuple = ()
    stability_limit: float = 2.5
    strict: bool = False


@dataclass
class Trajectory:
    """Result of a propagation.

    ``rates[name]`` is <L^dag L>(t) for every jump operator and
    ``losses[name]`` its running time integral.
    """

    grid: TimeGrid
    space: object
    states: dict
    observables: dict
    rates: dict
    losses: dict
    final_state: np.ndarray
    store_stride: int
    max_trace_error: float = 0.0
    min_eigenvalue: float = 0.0
    leakage: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def times(self):
        return self.grid.times

    def state_at(self, t):
        k = self.grid.index(t)
        if k not in self.states:
            raise KeyError(f"state at step {k} was not stored (stride {self.store_stride})")
        return self.states[k]

    def total_loss(self, name):
        return float(self.losses[name][-1])


def left_multiply(op, X):
    """``op @ X`` for a dense or sparse ``op`` and a matrix or stack of matrices."""
    if X.ndim == 2 or not sp.issparse(op):
        return op @ X
    m, D, _ = X.shape
    Y = op @ X.transpose(1, 0, 2).reshape(D, m * D)
    return Y.reshape(D, m, D).transpose(1, 0, 2)


def dag(X):
    return X.conj().swapaxes(-1, -2)


def _oscillator_tops(space):
    """(factor index, levels) monitored for truncation leakage."""
    out = []
    for i, f in enumerate(space.factors):
        if isinstance(f, NLevel) or f.dim <= 2:
            continue
        out.append((i, list(range(max(2, f.dim - 2), f.dim))))
    return out


def _stability_rate(gen, k):
    H = gen.hamiltonian(k)
    ev = np.linalg.eigvalsh(H)
    rate = ev[-1] - ev[0]
    for L in gen.jump_operators(k):
        L = L.toarray() if sp.issparse(L) else L
        rate += np.linalg.norm(L, 2) ** 2
    return rate


def stability_ratio(generator, start=0, stop=None, transient=8):
    """Step size times the fastest rate that persists for ``transient`` samples.

    Capture couplings diverge like ``1/sqrt(t)`` at the mode onset; such a
    spike lasts a few samples and cannot amplify errors, so each probe takes
    the smallest rate over the next ``transient`` samples. Probes are the
    window ends, its middle and the three samples with the largest cheap bound.
    """
    stop = generator.grid.n_steps if stop is None else stop
    bound = generator.rate_bound()[start:stop + 1]
    m = min(transient, len(bound))
    persistent = np.lib.stride_tricks.sliding_window_view(bound, m).min(axis=1)
    worst = start + np.argsort(persistent)[::-1][:3]
    last = stop + 1 - m
    probe = sorted({start, (start + last) // 2, last, *worst.tolist()})
    rate = [min(_stability_rate(generator, j) for j in range(k, k + m)) for k in probe]
    return 2 * generator.grid.dt * max(rate)


def _warn(traj_warnings, config, message):
    traj_warnings.append(message)
    if config.strict:
        raise NumericalInstabilityError(message)
    warnings.warn(message, stacklevel=3)


def propagate(rho0, generator, config=None, observables=None, start=0, stop=None):
    """Integrate the master equation from sample ``start`` to ``stop``.

    Parameters
    ----------
    rho0 : ndarray
        Initial density matrix on ``generator.space``.
    generator : cascade.Generator
    config : IntegratorConfig, optional
    observables : dict of name -> operator, optional
        Expectation values recorded at every step.
    start, stop : int
        Sample indices (even offsets apart); default is the whole grid.

    Returns
    -------
    Trajectory
    """
    config = config or IntegratorConfig()
    observables = observables or {}
    sgrid = generator.grid
    stop = sgrid.n_steps if stop is None else stop
    if (stop - start) % 2 or stop <= start:
        raise ValueError("propagation window must span an even, positive number of samples")
    n_steps = (stop - start) // 2
    step_grid = TimeGrid(sgrid.times[start], sgrid.times[stop], n_steps, check=False)
    dt = 2 * sgrid.dt
    rho = np.array(rho0, dtype=complex)
    D = generator.space.total_dim
    if rho.shape != (D, D):
        raise SpaceMismatchError(f"initial state {rho.shape} does not match {generator.space}")

    names = generator.lindblad_names
    obs_names = list(observables)
    obs_T = [np.asarray(observables[n]).T.copy() for n in obs_names]
    obs_vals = np.zeros((len(obs_names), n_steps + 1), complex)
    rates = np.zeros((len(names), n_steps + 1))
    traj_warnings = []

    checks = set(np.linspace(0, n_steps, min(config.positivity_checks, n_steps + 1)).astype(int))
    ratio = stability_ratio(generator, start, stop)
    if ratio > config.stability_limit:
        _warn(traj_warnings, config,
              f"dt*rate = {ratio:.2f} exceeds {config.stability_limit}; refine the grid")

    tops = [(i, lv) for i, lv in _oscillator_tops(generator.space)
            if generator.space.labels[i] not in config.leakage_skip]
    leak = {generator.space.labels[i]: 0.0 for i, _ in tops}
    base = {}
    dims = generator.space.dims
    states = {}
    max_trace_err = 0.0
    min_eig = np.inf

    cache = {}

    def ops(k):
        if k not in cache:
            if len(cache) > 4:
                cache.clear()
            Ls = generator.jump_operators(k)
            cache[k] = (generator.effective_hamiltonian(k), Ls, [L.conj().T for L in Ls])
        return cache[k]

    def rate(L, lr):
        # Tr(L^dag L rho) = sum_ij conj(L_ij) (L rho)_ij
        if sp.issparse(L):
            c = L.tocoo()
            return np.real(np.sum(np.conj(c.data) * lr[c.row, c.col]))
        return np.real(np.sum(lr * L.conj()))

    def rhs(r, k, want_rates=False):
        # r stays Hermitian, so r L^dag = (L r)^dag
        Heff, Ls, Lds = ops(k)
        a = -1j * (Heff @ r)
        out = a + a.conj().T
        rr = np.empty(len(Ls)) if want_rates else None
        for j, L in enumerate(Ls):
            lr = L @ r
            out += L @ lr.conj().T
            if want_rates:
                rr[j] = rate(L, lr)
        return out, rr

    def record(i, r, rr):
        nonlocal max_trace_err, min_eig
        tr = np.trace(r)
        if not np.isfinite(tr):
            raise NumericalInstabilityError(
                f"non-finite state at t = {sgrid.times[start + 2 * i]:.6g}",
                time=float(sgrid.times[start + 2 * i]))
        max_trace_err = max(max_trace_err, abs(tr - 1))
        rates[:, i] = rr
        for j, O in enumerate(obs_T):
            obs_vals[j, i] = np.sum(O * r)
        if tops:
            p = np.real(np.diagonal(r)).reshape(dims)
            for fi, levels in tops:
                top = p.take(levels, axis=fi).sum()
                lab = generator.space.labels[fi]
                # growth over the initial content, so prepared top states do not count
                top -= base.setdefault(lab, top)
                if top > leak[lab]:
                    leak[lab] = top
        if i % config.store_stride == 0 or i == n_steps:
            states[i] = r.copy()
        if i in checks:
            min_eig = min(min_eig, np.linalg.eigvalsh((r + r.conj().T) / 2)[0])

    k = start
    k1, rr = rhs(rho, k, True)
    for i in range(n_steps):
        record(i, rho, rr)
        k2, _ = rhs(rho + dt / 2 * k1, k + 1)
        k3, _ = rhs(rho + dt / 2 * k2, k + 1)
        k4, _ = rhs(rho + dt * k3, k + 2)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        # the Hermitian-only rhs lets rounding-level anti-Hermitian parts grow
        rho = (rho + rho.conj().T) / 2
        k += 2
        k1, rr = rhs(rho, k, True)
    record(n_steps, rho, rr)

    if max_trace_err > config.trace_tol:
        _warn(traj_warnings, config, f"trace drifted by {max_trace_err:.2e}")
    if min_eig < -config.positivity_tol:
        _warn(traj_warnings, config, f"minimum eigenvalue {min_eig:.2e} below tolerance")
    for lab, top in leak.items():
        if top > config.leakage_tol:
            _warn(traj_warnings, config,
                  f"factor {lab!r}: top Fock levels reached population {top:.2e}")

    grid = step_grid
    losses = {n: cumulative_trapezoid(rates[j], dx=dt, initial=0.0) for j, n in enumerate(names)}
    return Trajectory(grid=grid, space=generator.space, states=states,
                      observables={n: obs_vals[j] for j, n in enumerate(obs_names)},
                      rates={n: rates[j] for j, n in enumerate(names)}, losses=losses,
                      final_state=rho, store_stride=config.store_stride,
                      max_trace_error=float(max_trace_err), min_eigenvalue=float(min_eig),
                      leakage=leak, warnings=traj_warnings)


def channel_loss(trajectory, channel, t1=None, t2=None):
    """Quanta emitted through ``channel`` between ``t1`` and ``t2`` (trapezoidal)."""
    t = trajectory.times
    t1 = t[0] if t1 is None else t1
    t2 = t[-1] if t2 is None else t2
    eps = 1e-9 * (t[-1] - t[0])
    if not (t[0] - eps <= t1 < t2 <= t[-1] + eps):
        raise ValueError(f"window [{t1}, {t2}] outside the trajectory [{t[0]}, {t[-1]}]")
    cum = trajectory.losses[channel]
    return float(np.interp(t2, t, cum) - np.interp(t1, t, cum))


# -- export -------------------------------------------------------------------

def save_observables_csv(trajectory, path):
    """CSV with a ``t`` column, one column per observable, then rate/loss columns."""
    cols = {}
    for name, v in trajectory.observables.items():
        if np.max(np.abs(np.imag(v)), initial=0.0) > 1e-12:
            cols[f"{name}_re"] = np.real(v)
            cols[f"{name}_im"] = np.imag(v)
        else:
            cols[name] = np.real(v)
    for name, v in trajectory.rates.items():
        cols[f"rate_{name}"] = v
    for name, v in trajectory.losses.items():
        cols[f"loss_{name}"] = v
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + list(cols))
        for i, t in enumerate(trajectory.times):
            w.writerow([repr(float(t))] + [repr(float(c[i])) for c in cols.values()])


STATE_MAGIC = b"PCST"


def save_states(trajectory, path):
    """Binary dump of the stored density matrices (layout documented in the README)."""
    keys = sorted(trajectory.states)
    space = trajectory.space
    with open(path, "wb") as fh:
        fh.write(STATE_MAGIC)
        fh.write(struct.pack("<III", 1, len(space.dims), trajectory.store_stride))
        fh.write(struct.pack(f"<{len(space.dims)}I", *space.dims))
        for lab in space.labels:
            b = lab.encode()
            fh.write(struct.pack("<H", len(b)) + b)
        fh.write(struct.pack("<I", len(keys)))
        fh.write(np.asarray([trajectory.times[k] for k in keys], "<f8").tobytes())
        for k in keys:
            fh.write(np.ascontiguousarray(trajectory.states[k], "<c16").tobytes())


def load_states(path):
    """Inverse of :func:`save_states`: returns (dims, labels, stride, times, states)."""
    with open(path, "rb") as fh:
        if fh.read(4) != STATE_MAGIC:
            raise ValueError(f"{path} is not a state file")
        version, nf, stride = struct.unpack("<III", fh.read(12))
        dims = struct.unpack(f"<{nf}I", fh.read(4 * nf))
        labels = []
        for _ in range(nf):
            (n,) = struct.unpack("<H", fh.read(2))
            labels.append(fh.read(n).decode())
        (ns,) = struct.unpack("<I", fh.read(4))
        times = np.frombuffer(fh.read(8 * ns), "<f8")
        D = int(np.prod(dims))
        data = np.frombuffer(fh.read(16 * ns * D * D), "<c16").reshape(ns, D, D)
    return tuple(dims), labels, stride, times, data
