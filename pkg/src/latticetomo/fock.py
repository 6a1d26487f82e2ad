"""Truncated number-basis states and the operators that act on them.

Everything here is dimension-explicit: a state or matrix of dimension N lives
on the number states |0> .. |N-1>.  Displacements populate higher levels, so
routines that displace internally embed into a larger working dimension (see
``working_dimension``) and truncate afterwards; the guard band keeps the
unitarity defect of the truncated displacement below 1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .constants import HBAR
from .errors import InvalidParameterError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9
NORM_TOL = 1e-9


def working_dimension(dim: int, alpha: complex) -> int:
    """Embedding dimension for displacement computations at amplitude alpha.

    A displacement spreads population over ~|alpha|^2 levels (Poisson); the
    guard band 4|alpha|^2 + 8 keeps truncation error below 1e-8.
    """
    return dim + math.ceil(4.0 * abs(alpha) ** 2 + 8.0)


@dataclass(frozen=True)
class FockVector:
    """Pure state given by complex amplitudes over the truncated number basis.

    The squared norm may fall below one when the state was truncated; the
    missing weight is exposed as ``truncation_loss``.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 1:
            raise InvalidParameterError("amplitudes must be a non-empty 1-D array")
        norm_sq = float(np.sum(np.abs(amps) ** 2))
        if norm_sq > 1.0 + NORM_TOL:
            raise InvalidParameterError(f"squared norm {norm_sq!r} exceeds 1")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def truncation_loss(self) -> float:
        """Probability weight lost to basis truncation."""
        return max(0.0, 1.0 - self.norm_squared)

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive-semidefinite matrix over the truncated basis.

    The trace is 1 for proper states and may be below 1 after a lossy channel;
    ``trace_deficit`` exposes the missing weight.
    """

    elements: np.ndarray

    def __post_init__(self):
        rho = np.array(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise InvalidParameterError("density matrix must be square and non-empty")
        herm_defect = float(np.max(np.abs(rho - rho.conj().T)))
        if herm_defect > HERMITICITY_TOL:
            raise InvalidParameterError(
                f"density matrix not Hermitian: max |rho - rho^dag| = {herm_defect:.3e}"
            )
        trace = rho.trace()
        if abs(trace.imag) > TRACE_TOL or trace.real > 1.0 + TRACE_TOL or trace.real <= 0.0:
            raise InvalidParameterError(f"trace {trace!r} outside (0, 1]")
        smallest = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        if smallest < -POSITIVITY_TOL:
            raise InvalidParameterError(f"smallest eigenvalue {smallest:.3e} below -{POSITIVITY_TOL}")
        object.__setattr__(self, "elements", rho)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def trace(self) -> float:
        return float(self.elements.trace().real)

    @property
    def trace_deficit(self) -> float:
        """Population lost to channels that do not preserve the trace."""
        return max(0.0, 1.0 - self.trace)

    def populations(self) -> np.ndarray:
        return self.elements.diagonal().real.copy()

    @classmethod
    def number_state(cls, n: int, dim: int) -> "DensityMatrix":
        if not 0 <= n < dim:
            raise InvalidParameterError(f"number state {n} outside dimension {dim}")
        rho = np.zeros((dim, dim), dtype=complex)
        rho[n, n] = 1.0
        return cls(rho)

    @classmethod
    def from_populations(cls, populations, dim: int | None = None) -> "DensityMatrix":
        pops = np.asarray(populations, dtype=float)
        if dim is None:
            dim = pops.size
        rho = np.zeros((dim, dim), dtype=complex)
        rho[: pops.size, : pops.size] = np.diag(pops)
        return cls(rho)


@dataclass(frozen=True)
class OscillatorSpec:
    """Harmonic well parameters and the dimensionless<->physical unit bridge."""

    mass: float
    omega: float

    def __post_init__(self):
        if self.mass <= 0.0 or self.omega <= 0.0:
            raise InvalidParameterError("mass and omega must be positive")

    @property
    def x0(self) -> float:
        """Ground-state position width sqrt(hbar / 2 m omega), m."""
        return math.sqrt(HBAR / (2.0 * self.mass * self.omega))

    @property
    def p0(self) -> float:
        """Ground-state momentum width sqrt(m hbar omega / 2), kg m/s."""
        return math.sqrt(self.mass * HBAR * self.omega / 2.0)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @classmethod
    def from_ground_width(cls, mass: float, x0: float) -> "OscillatorSpec":
        """Spec of the oscillator whose ground width equals ``x0``."""
        if x0 <= 0.0:
            raise InvalidParameterError("ground width must be positive")
        return cls(mass=mass, omega=HBAR / (2.0 * mass * x0 * x0))


def alpha_from_phase_space(x: float, p: float, spec: OscillatorSpec) -> complex:
    """Dimensionless phase point for physical (x, p): x = 2 x0 Re, p = 2 p0 Im."""
    return complex(x / (2.0 * spec.x0), p / (2.0 * spec.p0))


def position_of(alpha: complex, spec: OscillatorSpec) -> float:
    return 2.0 * spec.x0 * alpha.real


def momentum_of(alpha: complex, spec: OscillatorSpec) -> float:
    return 2.0 * spec.p0 * alpha.imag


def lowering_operator(dim: int) -> np.ndarray:
    _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def raising_operator(dim: int) -> np.ndarray:
    return lowering_operator(dim).conj().T


def number_operator(dim: int) -> np.ndarray:
    _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def make_coherent(beta: complex, dim: int) -> FockVector:
    """Coherent state amplitudes exp(-|beta|^2/2) beta^n / sqrt(n!), truncated.

    ``truncation_loss`` on the returned vector reports the weight beyond the
    basis.
    """
    _check_dim(dim)
    amps = np.empty(dim, dtype=complex)
    amps[0] = math.exp(-0.5 * abs(beta) ** 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * beta / math.sqrt(n)
    return FockVector(amps)


def displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    """Matrix exponential of alpha a^dag - alpha* a over the truncated basis.

    Unitary up to a truncation defect confined to the high-n corner; column 0
    reproduces ``make_coherent(alpha, dim)`` up to that defect.
    """
    _check_dim(dim)
    alpha = complex(alpha)
    if alpha == 0.0:
        return np.eye(dim, dtype=complex)
    if alpha.imag == 0.0:
        # Real generator: expm stays in real arithmetic, ~2x faster.
        ladder = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
        return expm(alpha.real * (ladder.T - ladder)).astype(complex)
    a = lowering_operator(dim)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def rotation_matrix(theta: float, dim: int) -> np.ndarray:
    """Phase-space rotation exp(-i n theta), diagonal in the number basis."""
    _check_dim(dim)
    return np.diag(np.exp(-1j * theta * np.arange(dim)))


def embed_matrix(matrix: np.ndarray, dim: int) -> np.ndarray:
    """Zero-pad a square matrix into a larger dimension."""
    small = matrix.shape[0]
    if dim < small:
        raise InvalidParameterError(f"cannot embed dimension {small} into {dim}")
    out = np.zeros((dim, dim), dtype=complex)
    out[:small, :small] = matrix
    return out


def _check_dim(dim: int) -> None:
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidParameterError(f"invalid basis dimension {dim!r}")
