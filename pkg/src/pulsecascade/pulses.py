"""Temporal modes on a uniform time grid and virtual-cavity coupling functions.

Mode functions follow the creation-amplitude convention: a photon in mode
``u`` is created by ``int dt u(t) b^dagger(t)``. A virtual cavity with
coupling ``g(t)`` then releases the envelope ``conj(g) exp(-1/2 int |g|^2)``
and reflects an incident envelope ``s`` into ``s + conj(g) alpha`` where
``alpha' = -g s - |g|^2 alpha / 2``.
"""
from dataclasses import dataclass, field
import csv
import logging
import warnings

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline

from .errors import ModeError, NumericalInstabilityError

log = logging.getLogger(__name__)

EPSILON_CUT = 1e-6
ORTHOGONALITY_TOL = 1e-4
MAX_BUNDLE = 4


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0, t0 + dt, ..., t1`` with ``n_steps`` intervals."""

    t0: float
    t1: float
    n_steps: int
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if self.n_steps < (16 if self.check else 1):
            raise ModeError(f"a time grid needs at least 16 steps, got {self.n_steps}")
        if not self.t1 > self.t0:
            raise ModeError(f"empty time window [{self.t0}, {self.t1}]")

    @property
    def dt(self):
        return (self.t1 - self.t0) / self.n_steps

    @property
    def times(self):
        return np.linspace(self.t0, self.t1, self.n_steps + 1)

    def __len__(self):
        return self.n_steps + 1

    def refine(self, factor):
        return TimeGrid(self.t0, self.t1, self.n_steps * int(factor))

    def coarsen(self, stride):
        if self.n_steps % stride:
            raise ModeError(f"{self.n_steps} steps not divisible by stride {stride}")
        return TimeGrid(self.t0, self.t1, self.n_steps // stride)

    def index(self, t):
        """Nearest sample index of time ``t``."""
        k = int(round((t - self.t0) / self.dt))
        if not 0 <= k <= self.n_steps:
            raise ModeError(f"time {t} outside grid [{self.t0}, {self.t1}]")
        return k

    def weights(self):
        """Trapezoidal quadrature weights."""
        w = np.full(self.n_steps + 1, self.dt)
        w[0] = w[-1] = self.dt / 2
        return w


def _norm2(grid, samples):
    return float(trapezoid(np.abs(samples) ** 2, dx=grid.dt))


@dataclass(frozen=True, eq=False)
class TemporalMode:
    """Unit-normalized complex envelope sampled on ``grid``.

    ``samples`` holds the slowly varying envelope; ``detuning`` is an optional
    carrier offset applied as ``exp(i detuning t)`` by :attr:`field`. Since
    modes are creation amplitudes, this carrier is resonant with a scatterer
    transition at ``+detuning``.
    Construction rescales the samples to unit trapezoidal norm.
    """

    grid: TimeGrid
    samples: np.ndarray
    detuning: float = 0.0
    name: str = ""

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (len(self.grid),):
            raise ModeError(f"{s.shape[0] if s.ndim else 0} samples for a grid of {len(self.grid)} points")
        if not np.all(np.isfinite(s)):
            raise ModeError("mode samples are not finite")
        n2 = _norm2(self.grid, s)
        if n2 <= 0:
            raise ModeError("mode has zero norm")
        if abs(n2 - 1) > 1e-6:
            log.debug("renormalizing mode %r with norm %.6g", self.name, n2)
        object.__setattr__(self, "samples", s / np.sqrt(n2))

    @property
    def field(self):
        """Envelope including the carrier factor exp(i detuning t)."""
        if self.detuning == 0:
            return self.samples
        return self.samples * np.exp(1j * self.detuning * self.grid.times)

    def norm(self):
        return _norm2(self.grid, self.samples)

    def resample(self, grid):
        """Cubic-spline interpolation of the envelope onto another grid (carrier kept)."""
        t = self.grid.times
        new_t = grid.times
        if new_t[0] < t[0] - 1e-12 or new_t[-1] > t[-1] + 1e-12:
            raise ModeError("target grid extends beyond the mode's support")
        re = CubicSpline(t, self.samples.real)(new_t)
        im = CubicSpline(t, self.samples.imag)(new_t)
        return TemporalMode(grid, re + 1j * im, self.detuning, self.name)

    def with_phase(self, phase):
        return TemporalMode(self.grid, self.samples * np.exp(1j * phase), self.detuning, self.name)


def inner(u, v):
    """Overlap ``int conj(u) v dt`` of two modes on the same grid."""
    if u.grid != v.grid:
        raise ModeError("modes live on different grids")
    return complex(trapezoid(np.conj(u.field) * v.field, dx=u.grid.dt))


def gram_matrix(modes):
    return np.array([[inner(a, b) for b in modes] for a in modes])


def orthonormalize(modes):
    """Gram-Schmidt in the given order (the first mode keeps its shape)."""
    out = []
    for m in modes:
        f = m.field.copy()
        for q in out:
            f = f - inner(q, m) * q.field
        out.append(TemporalMode(m.grid, f, name=m.name))
    return out


def gaussian_mode(grid, tau, t_p, detuning=0.0):
    """Gaussian envelope exp(-(t - t_p)^2 / 2 tau^2) / (sqrt(tau) pi^(1/4))."""
    if tau <= 0:
        raise ModeError(f"tau must be positive, got {tau}")
    if t_p - grid.t0 < 4 * tau or grid.t1 - t_p < 4 * tau:
        warnings.warn(f"Gaussian (tau={tau}, t_p={t_p}) is truncated by the grid "
                      f"[{grid.t0}, {grid.t1}]", stacklevel=2)
    t = grid.times
    s = np.exp(-((t - t_p) ** 2) / (2 * tau ** 2)) / (np.sqrt(tau) * np.pi ** 0.25)
    return TemporalMode(grid, s, detuning, name="gaussian")


def exponential_mode(grid, gamma, t_start=None):
    """Decaying envelope sqrt(gamma) exp(-gamma (t - t_start) / 2), zero before t_start."""
    t_start = grid.t0 if t_start is None else t_start
    t = grid.times
    s = np.where(t >= t_start, np.sqrt(gamma) * np.exp(-gamma * (t - t_start) / 2), 0.0)
    return TemporalMode(grid, s, name="exponential")


@dataclass(frozen=True, eq=False)
class CouplingFunction:
    """Time-sampled virtual-cavity coupling g(t).

    Samples where the defining radicand fell below ``epsilon_cut`` are
    flagged invalid in ``valid_mask`` and carry g = 0.
    """

    grid: TimeGrid
    samples: np.ndarray
    valid_mask: np.ndarray
    epsilon_cut: float = EPSILON_CUT
    direction: str = "in"

    @property
    def rate(self):
        return np.abs(self.samples) ** 2

    @staticmethod
    def zero(grid, direction="out"):
        n = len(grid)
        return CouplingFunction(grid, np.zeros(n, complex), np.zeros(n, bool), direction=direction)


def _tail_integral(grid, p):
    """int_t^T p dt' for every sample."""
    rev = cumulative_trapezoid(p[::-1], dx=grid.dt, initial=0.0)
    return rev[::-1]


def coupling_in(u, epsilon_cut=EPSILON_CUT):
    """Coupling that makes a virtual cavity release its content into ``u``.

    ``g(t) = conj(u(t)) / sqrt(1 - int_0^t |u|^2)``; the remaining-norm
    radicand is accumulated backwards from the grid end for accuracy.
    """
    f = u.field
    radicand = _tail_integral(u.grid, np.abs(f) ** 2)
    valid = radicand >= epsilon_cut
    g = np.zeros_like(f)
    g[valid] = np.conj(f[valid]) / np.sqrt(radicand[valid])
    return CouplingFunction(u.grid, g, valid, epsilon_cut, "in")


def coupling_out(v, epsilon_cut=EPSILON_CUT):
    """Coupling that makes a virtual cavity absorb the incident mode ``v``.

    ``g(t) = -conj(v(t)) / sqrt(int_0^t |v|^2)``.
    """
    f = v.field
    radicand = cumulative_trapezoid(np.abs(f) ** 2, dx=v.grid.dt, initial=0.0)
    valid = radicand >= epsilon_cut
    g = np.zeros_like(f)
    g[valid] = -np.conj(f[valid]) / np.sqrt(radicand[valid])
    return CouplingFunction(v.grid, g, valid, epsilon_cut, "out")


def _rk4_on_samples(rhs, y0, n_samples):
    """Integrate y' = rhs(k, y) over sample indices with steps of two samples.

    The samples k, k+1, k+2 provide the RK4 stage times t, t+h/2, t+h, so no
    input function is ever interpolated. Odd samples are filled by cubic
    Hermite interpolation from the values and exact derivatives at the
    neighbouring even samples.
    """
    if (n_samples - 1) % 2:
        raise ModeError("amplitude integration needs an even number of grid steps")
    y = np.zeros((n_samples,) + np.shape(y0), dtype=complex)
    dy = np.zeros_like(y)
    y[0] = y0
    h = 2.0  # in units of the sample spacing; rhs returns d/dk
    for k in range(0, n_samples - 1, 2):
        k1 = rhs(k, y[k])
        k2 = rhs(k + 1, y[k] + h / 2 * k1)
        k3 = rhs(k + 1, y[k] + h / 2 * k2)
        k4 = rhs(k + 2, y[k] + h * k3)
        dy[k] = k1
        y[k + 2] = y[k] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y[k + 2])):
            raise NumericalInstabilityError("amplitude equations diverged", time=k + 2)
    dy[-1] = rhs(n_samples - 1, y[-1])
    # Hermite midpoint: (y0 + y1)/2 + h (dy0 - dy1)/8
    y[1:-1:2] = (y[0:-2:2] + y[2::2]) / 2 + h * (dy[0:-2:2] - dy[2::2]) / 8
    return y


def _check_bundle(modes):
    modes = list(modes)
    if not modes:
        raise ModeError("need at least one mode")
    if len(modes) > MAX_BUNDLE:
        raise ModeError(f"at most {MAX_BUNDLE} modes per side are supported, got {len(modes)}")
    grid = modes[0].grid
    if any(m.grid != grid for m in modes):
        raise ModeError("all modes in a bundle must share one grid")
    gram = gram_matrix(modes)
    off = np.abs(gram - np.diag(np.diag(gram)))
    if off.max(initial=0.0) >= ORTHOGONALITY_TOL:
        raise ModeError(f"modes are not orthogonal (max overlap {off.max():.2e})")
    return modes, grid


@dataclass
class ModeBundle:
    """Ordered modes with their virtual-cavity couplings.

    ``reshaped[i][j]`` is mode ``i`` after ``j`` reflections (``j = 0`` is
    the mode itself); ``reshaped[i][i]`` is the shape seen by cavity ``i``.
    """

    modes: list
    couplings: list
    reshaped: list = field(default_factory=list)
    direction: str = "out"

    def __len__(self):
        return len(self.modes)

    @property
    def grid(self):
        return self.modes[0].grid


def _renormalized(grid, samples, label):
    n2 = _norm2(grid, samples)
    if abs(n2 - 1) > 1e-3:
        log.warning("reshaped mode %s has norm %.5f before renormalization", label, n2)
    else:
        log.debug("reshaped mode %s norm %.8f", label, n2)
    return TemporalMode(grid, samples, name=label)


def multimode_output_couplings(modes, epsilon_cut=EPSILON_CUT):
    """Couplings of serially reflecting capture cavities for orthogonal modes.

    Cavity ``i`` sees mode ``i`` after its reflection on cavities
    ``1 .. i-1``; the reflected shapes follow from the classical amplitude
    equations integrated with RK4 on the mode grid.
    """
    modes, grid = _check_bundle(modes)
    n = len(grid)
    dt = grid.dt
    couplings = []
    reshaped = []
    for i, v in enumerate(modes):
        target = v.field
        if i == 0:
            shapes = [target]
        else:
            gs = [c.samples for c in couplings]

            def rhs(k, a, gs=gs, target=target):
                out = np.empty(i, dtype=complex)
                incident = target[k]
                for j in range(i):
                    out[j] = -gs[j][k] * incident - abs(gs[j][k]) ** 2 / 2 * a[j]
                    incident = incident + np.conj(gs[j][k]) * a[j]
                return out * dt

            alpha = _rk4_on_samples(rhs, np.zeros(i, complex), n)
            shapes = [target]
            for j in range(i):
                shapes.append(shapes[-1] + np.conj(gs[j]) * alpha[:, j])
        modes_i = [TemporalMode(grid, s, name=f"v{i + 1}^({j})") if j else v
                   for j, s in enumerate(shapes)]
        seen = _renormalized(grid, shapes[-1], f"v{i + 1}^({i})")
        modes_i[-1] = seen
        reshaped.append(modes_i)
        couplings.append(coupling_out(seen, epsilon_cut))
    return ModeBundle(modes, couplings, reshaped, "out")


def multimode_input_couplings(modes, epsilon_cut=EPSILON_CUT):
    """Couplings of cascaded release cavities delivering orthogonal modes.

    Cavity 1 sits next to the scatterer. Mode ``i`` is emitted from cavity
    ``i`` and reflected on cavities ``i-1 .. 1``; the emitted shape is found
    by integrating the backward-referenced amplitude equations (note the
    ``+|g|^2/2`` growth term) forward in time.
    """
    modes, grid = _check_bundle(modes)
    n = len(grid)
    dt = grid.dt
    couplings = []
    reshaped = []
    for i, u in enumerate(modes):
        target = u.field
        if i == 0:
            shapes = [target]
        else:
            gs = [c.samples for c in couplings]

            def rhs(k, a, gs=gs, target=target):
                out = np.empty(i, dtype=complex)
                incident = target[k]
                for j in range(i):
                    out[j] = -gs[j][k] * incident + abs(gs[j][k]) ** 2 / 2 * a[j]
                    incident = incident - np.conj(gs[j][k]) * a[j]
                return out * dt

            alpha = _rk4_on_samples(rhs, np.zeros(i, complex), n)
            shapes = [target]
            for j in range(i):
                shapes.append(shapes[-1] - np.conj(gs[j]) * alpha[:, j])
        modes_i = [TemporalMode(grid, s, name=f"u{i + 1}^({j})") if j else u
                   for j, s in enumerate(shapes)]
        emitted = _renormalized(grid, shapes[-1], f"u{i + 1}^({i})")
        modes_i[-1] = emitted
        reshaped.append(modes_i)
        couplings.append(coupling_in(emitted, epsilon_cut))
    return ModeBundle(modes, couplings, reshaped, "in")


def single_input(u, epsilon_cut=EPSILON_CUT):
    return ModeBundle([u], [coupling_in(u, epsilon_cut)], [[u]], "in")


def single_output(v, epsilon_cut=EPSILON_CUT):
    return ModeBundle([v], [coupling_out(v, epsilon_cut)], [[v]], "out")


# -- CSV exchange ---------------------------------------------------------

def _grid_from_times(t):
    t = np.asarray(t, dtype=float)
    if t.size < 17:
        raise ModeError("a mode file needs at least 17 samples")
    steps = np.diff(t)
    if np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, abs(t[-1])):
        raise ModeError("mode file times are not uniformly spaced")
    return TimeGrid(float(t[0]), float(t[-1]), t.size - 1)


def save_mode_csv(mode, path):
    """Write ``t, re, im`` columns of the full field (carrier included)."""
    f = mode.field
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im"])
        for t, z in zip(mode.grid.times, f):
            w.writerow([repr(float(t)), repr(float(z.real)), repr(float(z.imag))])


def load_mode_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 3:
        raise ModeError(f"{path}: expected columns t, re, im")
    grid = _grid_from_times(data[:, 0])
    return TemporalMode(grid, data[:, 1] + 1j * data[:, 2], name=str(path))


def save_coupling_csv(coupling, path):
    """Write ``t, re, im, valid`` columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im", "valid"])
        for t, z, ok in zip(coupling.grid.times, coupling.samples, coupling.valid_mask):
            w.writerow([repr(float(t)), repr(float(z.real)), repr(float(z.imag)), int(ok)])


def load_coupling_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    grid = _grid_from_times(data[:, 0])
    return CouplingFunction(grid, data[:, 1] + 1j * data[:, 2], data[:, 3].astype(bool))
