"""Truncated Fock / few-level spaces, ladder operators and states.

Operators and states are plain complex numpy arrays. A :class:`TensorSpace`
carries the factor structure (order and dimensions) needed to embed
single-factor operators and to take partial traces.
"""
from dataclasses import dataclass
import math
import warnings

import numpy as np

from .errors import InvalidDimensionError, SpaceMismatchError, TruncationError

TRUNCATION_DEFICIT = 1e-6


@dataclass(frozen=True)
class Oscillator:
    """Bosonic mode truncated to ``dim`` Fock levels (0 .. dim-1)."""

    dim: int
    label: str = "a"

    def __post_init__(self):
        if int(self.dim) < 2:
            raise InvalidDimensionError(f"oscillator cutoff must be >= 2, got {self.dim}")


@dataclass(frozen=True)
class NLevel:
    """Discrete few-level system (qubit for ``dim=2``)."""

    dim: int
    label: str = "s"

    def __post_init__(self):
        if int(self.dim) < 2:
            raise InvalidDimensionError(f"level count must be >= 2, got {self.dim}")


def Qubit(label="q"):
    return NLevel(2, label)


class TensorSpace:
    """Ordered tensor product of truncated factors.

    Parameters
    ----------
    factors : sequence of Oscillator / NLevel
        Factor order is fixed; index 0 is the most significant (leftmost)
        factor in ``np.kron`` ordering.
    """

    def __init__(self, factors):
        factors = tuple(factors)
        if not factors:
            raise InvalidDimensionError("a space needs at least one factor")
        labels = [f.label for f in factors]
        if len(set(labels)) != len(labels):
            raise InvalidDimensionError(f"duplicate factor labels: {labels}")
        self.factors = factors
        self.dims = tuple(int(f.dim) for f in factors)
        self.labels = tuple(labels)
        self.total_dim = int(np.prod(self.dims))

    def __repr__(self):
        inner = ", ".join(f"{l}:{d}" for l, d in zip(self.labels, self.dims))
        return f"TensorSpace({inner})"

    def __eq__(self, other):
        return isinstance(other, TensorSpace) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)

    def __len__(self):
        return len(self.factors)

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no factor labelled {label!r} in {self}") from None

    def _resolve(self, index):
        if isinstance(index, str):
            return self.index(index)
        index = int(index)
        if not 0 <= index < len(self.factors):
            raise IndexError(f"factor index {index} out of range for {self}")
        return index

    def identity(self):
        return np.eye(self.total_dim, dtype=complex)

    def embed(self, op, index):
        """Place ``op`` at factor ``index`` (int or label), identities elsewhere.

        ``index`` may also be a ``slice`` of contiguous factors, in which
        case ``op`` acts on their joint (kron-ordered) space.
        """
        if isinstance(index, slice):
            start, stop, step = index.indices(len(self.factors))
            if step != 1 or stop <= start:
                raise IndexError("embedding slice must be contiguous and non-empty")
        else:
            start = self._resolve(index)
            stop = start + 1
        op = np.asarray(op, dtype=complex)
        block = int(np.prod(self.dims[start:stop]))
        if op.shape != (block, block):
            raise InvalidDimensionError(
                f"operator shape {op.shape} does not match factor dimension {block}")
        left = int(np.prod(self.dims[:start]))
        right = int(np.prod(self.dims[stop:]))
        out = op
        if left > 1:
            out = np.kron(np.eye(left), out)
        if right > 1:
            out = np.kron(out, np.eye(right))
        return out

    def basis(self, *levels):
        """Product basis ket ``|levels[0], levels[1], ...>``."""
        if len(levels) != len(self.dims):
            raise InvalidDimensionError(f"need {len(self.dims)} levels, got {len(levels)}")
        ket = np.zeros(self.total_dim, dtype=complex)
        ket[np.ravel_multi_index(levels, self.dims)] = 1.0
        return ket

    def product_state(self, *states):
        """Tensor product of per-factor kets or density matrices.

        Returns a ket if every argument is a ket, else a density matrix.
        """
        if len(states) != len(self.dims):
            raise InvalidDimensionError(f"need {len(self.dims)} states, got {len(states)}")
        states = [np.asarray(s, dtype=complex) for s in states]
        for s, d in zip(states, self.dims):
            if s.shape[0] != d:
                raise InvalidDimensionError(f"state of size {s.shape[0]} on factor of dim {d}")
        if all(s.ndim == 1 for s in states):
            out = states[0]
            for s in states[1:]:
                out = np.kron(out, s)
            return out
        mats = [s if s.ndim == 2 else np.outer(s, s.conj()) for s in states]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    def partial_trace(self, rho, keep):
        """Reduced density matrix on the factors in ``keep`` (kept in space order)."""
        if isinstance(keep, (int, str, np.integer)):
            keep = [keep]
        keep = sorted({self._resolve(k) for k in keep})
        if not keep:
            raise IndexError("keep must name at least one factor")
        rho = np.asarray(rho)
        if rho.shape != (self.total_dim, self.total_dim):
            raise SpaceMismatchError(f"density matrix shape {rho.shape} does not match {self}")
        n = len(self.dims)
        drop = [i for i in range(n) if i not in keep]
        t = rho.reshape(self.dims + self.dims)
        perm = keep + drop + [n + i for i in keep] + [n + i for i in drop]
        t = t.transpose(perm)
        dk = int(np.prod([self.dims[i] for i in keep]))
        dr = int(np.prod([self.dims[i] for i in drop])) if drop else 1
        t = t.reshape(dk, dr, dk, dr)
        return np.trace(t, axis1=1, axis2=3)

    def populations(self, rho, index):
        """Diagonal populations of one factor, computed from diag(rho) only."""
        i = self._resolve(index)
        p = np.real(np.diagonal(rho)).reshape(self.dims)
        axes = tuple(j for j in range(len(self.dims)) if j != i)
        return p.sum(axis=axes)


def annihilation(dim):
    """Truncated lowering operator with sqrt(n) on the first superdiagonal."""
    dim = int(dim)
    if dim < 2:
        raise InvalidDimensionError(f"dim must be >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def creation(dim):
    return annihilation(dim).conj().T


def number(dim):
    return np.diag(np.arange(dim)).astype(complex)


def sigma_minus():
    """|g><e| with |g> = level 0 (same matrix as a 2-level ``annihilation``)."""
    return np.array([[0, 1], [0, 0]], dtype=complex)


def sigma_z():
    return np.diag([-1.0, 1.0]).astype(complex)


def projector(dim, i, j=None):
    """``|i><j|`` on a ``dim``-level factor (``j`` defaults to ``i``)."""
    out = np.zeros((dim, dim), dtype=complex)
    out[i, i if j is None else j] = 1.0
    return out


def fock(dim, n):
    if not 0 <= n < dim:
        raise TruncationError(f"Fock state {n} outside cutoff {dim}")
    ket = np.zeros(dim, dtype=complex)
    ket[n] = 1.0
    return ket


def _coherent_amplitudes(dim, alpha):
    """Untruncated-normalization amplitudes e^{-|a|^2/2} a^n/sqrt(n!), n < dim."""
    amps = np.empty(dim, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return amps


def _check_truncation(dim, alpha, norm2):
    deficit = 1.0 - norm2
    if deficit > TRUNCATION_DEFICIT:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} leaks {deficit:.2e} of the norm beyond cutoff {dim}")
    if abs(alpha) ** 2 > dim / 4:
        warnings.warn(f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds dim/4 for cutoff {dim}",
                      stacklevel=3)


def coherent_state(dim, alpha):
    """Coherent state ket on ``dim`` Fock levels, renormalized on the truncation."""
    amps = _coherent_amplitudes(int(dim), complex(alpha))
    norm2 = float(np.vdot(amps, amps).real)
    _check_truncation(dim, alpha, norm2)
    return amps / math.sqrt(norm2)


def cat_state(dim, beta):
    """Even cat (|beta> + |-beta>) with the exact norm 1/sqrt(2(1+exp(-2|beta|^2)))."""
    beta = complex(beta)
    amps = _coherent_amplitudes(int(dim), beta)
    amps[1::2] = 0.0
    # full (untruncated) cat has amplitude 2 N e^{-|b|^2/2} b^n/sqrt(n!) on even n
    amps *= 2.0 / math.sqrt(2.0 * (1.0 + math.exp(-2 * abs(beta) ** 2)))
    norm2 = float(np.vdot(amps, amps).real)
    _check_truncation(dim, beta, norm2)
    return amps / math.sqrt(norm2)


def ket2dm(ket):
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def expectation(rho, op):
    """Tr(rho op); ``rho`` may also be a ket."""
    rho = np.asarray(rho)
    op = np.asarray(op)
    if rho.ndim == 1:
        if op.shape != (rho.size, rho.size):
            raise SpaceMismatchError(f"operator {op.shape} vs state of size {rho.size}")
        return complex(np.vdot(rho, op @ rho))
    if rho.shape != op.shape:
        raise SpaceMismatchError(f"operator {op.shape} vs density matrix {rho.shape}")
    # Tr(A B) = sum_ij A_ij B_ji
    return complex(np.einsum("ij,ji->", rho, op))


def state_fidelity(rho, ket):
    """<psi| rho |psi> for a pure target ``ket``; ``rho`` may itself be a ket."""
    ket = np.asarray(ket, dtype=complex)
    if np.ndim(rho) == 1:
        return float(abs(np.vdot(ket, rho)) ** 2)
    return float(np.real(np.vdot(ket, np.asarray(rho) @ ket)))


def purity(rho):
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


def is_hermitian(op, tol=1e-10):
    op = np.asarray(op)
    return op.shape[0] == op.shape[1] and np.max(np.abs(op - op.conj().T), initial=0.0) <= tol


def is_unitary(op, tol=1e-10):
    op = np.asarray(op)
    return np.max(np.abs(op.conj().T @ op - np.eye(op.shape[0])), initial=0.0) <= tol


def check_density_matrix(rho, trace_tol=1e-8, herm_tol=1e-10, pos_tol=1e-8):
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix within tolerances."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDimensionError(f"density matrix must be square, got {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"trace {tr:.3g} differs from 1")
    if not is_hermitian(rho, herm_tol):
        raise ValueError("density matrix is not Hermitian")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lo < -pos_tol:
        raise ValueError(f"negative eigenvalue {lo:.3g}")
    return rho
