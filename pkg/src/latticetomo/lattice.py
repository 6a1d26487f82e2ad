"""Physical parameters and bound states of the 1-D optical lattice.

A single well is modeled on one lattice period with hard walls at the
neighboring barrier tops: potential U0 sin^2(kL x) on x in [-a/2, a/2], which
is the standing-wave light shift written with the well minimum at the origin.
Tunneling between wells is irrelevant at the depths in scope (10-40 recoil
energies) on experimental timescales, so the isolated-well model is adequate
and testable against the harmonic limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.interpolate import CubicSpline

from .constants import HBAR
from .errors import InvalidParameterError, NumericalError

DEFAULT_GRID_SIZE = 1024
_STORED_STATES = 16


def lattice_vector(wavelength: float, angle: float) -> float:
    """Lattice wave vector (2 pi / wavelength) sin(angle / 2), 1/m.

    ``angle`` is the intersection angle of the two beams; angle = pi is the
    counter-propagating limit.
    """
    if wavelength <= 0.0:
        raise InvalidParameterError(f"wavelength must be positive, got {wavelength!r}")
    if not 0.0 < angle <= math.pi:
        raise InvalidParameterError(f"intersection angle must be in (0, pi], got {angle!r}")
    return (2.0 * math.pi / wavelength) * math.sin(angle / 2.0)


def recoil_energy(k_lattice: float, mass: float) -> float:
    """Recoil energy hbar^2 k^2 / 2m along the lattice direction, J."""
    if k_lattice <= 0.0 or mass <= 0.0:
        raise InvalidParameterError("k_lattice and mass must be positive")
    return HBAR**2 * k_lattice**2 / (2.0 * mass)


def well_frequency(depth: float, mass: float, k_lattice: float) -> float:
    """Small-oscillation frequency (4 kL / pi) sqrt(depth / mass), rad/s.

    This is an effective single-well frequency; the exact level spacing of
    the sinusoidal well differs from it by a few percent (anharmonicity).
    """
    if depth <= 0.0 or mass <= 0.0 or k_lattice <= 0.0:
        raise InvalidParameterError("depth, mass and k_lattice must be positive")
    return (4.0 * k_lattice / math.pi) * math.sqrt(depth / mass)


def depth_from_intensity(
    intensity: float, detuning: float, linewidth: float, saturation_intensity: float
) -> float:
    """Light-shift depth I0 hbar Gamma^2 / (4 Delta I_sat), J; sign follows Delta."""
    if detuning == 0.0:
        raise InvalidParameterError("detuning must be nonzero")
    if saturation_intensity <= 0.0 or linewidth <= 0.0:
        raise InvalidParameterError("linewidth and saturation intensity must be positive")
    return intensity * HBAR * linewidth**2 / (4.0 * detuning * saturation_intensity)


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice geometry and depth; the wave vector and period are derived."""

    wavelength: float
    intersection_angle: float
    depth: float
    mass: float

    def __post_init__(self):
        lattice_vector(self.wavelength, self.intersection_angle)  # validates
        if self.depth <= 0.0:
            raise InvalidParameterError(f"depth must be positive, got {self.depth!r}")
        if self.mass <= 0.0:
            raise InvalidParameterError(f"mass must be positive, got {self.mass!r}")

    @property
    def k_lattice(self) -> float:
        return lattice_vector(self.wavelength, self.intersection_angle)

    @property
    def period(self) -> float:
        return math.pi / self.k_lattice

    @property
    def recoil(self) -> float:
        return recoil_energy(self.k_lattice, self.mass)

    @property
    def depth_in_recoils(self) -> float:
        return self.depth / self.recoil

    @property
    def frequency(self) -> float:
        return well_frequency(self.depth, self.mass, self.k_lattice)

    @classmethod
    def from_recoil_units(
        cls, wavelength: float, intersection_angle: float, depth_recoils: float, mass: float
    ) -> "LatticeSpec":
        k = lattice_vector(wavelength, intersection_angle)
        return cls(
            wavelength=wavelength,
            intersection_angle=intersection_angle,
            depth=depth_recoils * recoil_energy(k, mass),
            mass=mass,
        )


@dataclass(frozen=True)
class PotentialShift:
    """Spatial shift of the lattice expressed as a beam phase shift.

    displacement = period * phase / 2 pi, exactly.
    """

    phase: float
    period: float

    def __post_init__(self):
        if self.period <= 0.0:
            raise InvalidParameterError("period must be positive")

    @property
    def displacement(self) -> float:
        return self.period * self.phase / (2.0 * math.pi)

    @classmethod
    def from_displacement(cls, displacement: float, period: float) -> "PotentialShift":
        return cls(phase=2.0 * math.pi * displacement / period, period=period)


@dataclass(frozen=True)
class BoundStateBasis:
    """Eigenpairs of the single-well Hamiltonian on a position grid.

    Wavefunctions are grid-orthonormal with 1/sqrt(m) normalization
    (sum psi_i psi_j dx = delta_ij).  ``bound_count`` counts energies strictly
    below the barrier top (the depth above the well minimum).
    """

    energies: np.ndarray
    wavefunctions: np.ndarray
    grid: np.ndarray
    bound_count: int
    spec: LatticeSpec

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])


def solve_bound_states(
    spec: LatticeSpec, grid_size: int = DEFAULT_GRID_SIZE, shift: float = 0.0
) -> BoundStateBasis:
    """Diagonalize the single-well Hamiltonian with hard walls at +-a/2.

    Second-order central finite differences on ``grid_size`` interior points;
    energies converge to better than 1e-4 relative at the default resolution
    for depths of 10-100 recoil energies.  ``shift`` displaces the potential
    minimum (used by the shifted-well machinery).
    """
    if grid_size < 256:
        raise InvalidParameterError(f"grid_size must be >= 256, got {grid_size}")
    half = spec.period / 2.0
    grid = np.linspace(-half, half, grid_size + 2)[1:-1]
    dx = grid[1] - grid[0]
    potential = spec.depth * np.sin(spec.k_lattice * (grid - shift)) ** 2
    kinetic_scale = HBAR**2 / (2.0 * spec.mass * dx**2)
    diagonal = 2.0 * kinetic_scale + potential
    off_diagonal = np.full(grid_size - 1, -kinetic_scale)
    n_store = min(_STORED_STATES, grid_size)
    try:
        energies, vectors = eigh_tridiagonal(
            diagonal, off_diagonal, select="i", select_range=(0, n_store - 1)
        )
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"bound-state eigensolver failed: {exc}") from exc
    vectors = vectors / math.sqrt(dx)
    # Fix the sign convention: largest-magnitude sample positive.
    for column in range(vectors.shape[1]):
        peak = np.argmax(np.abs(vectors[:, column]))
        if vectors[peak, column] < 0.0:
            vectors[:, column] = -vectors[:, column]
    barrier = float(np.min(potential)) + spec.depth
    bound_count = int(np.count_nonzero(energies < barrier))
    return BoundStateBasis(
        energies=energies,
        wavefunctions=vectors.T.copy(),
        grid=grid,
        bound_count=bound_count,
        spec=spec,
    )


def evolve_in_well(coefficients: np.ndarray, basis: BoundStateBasis, t: float) -> np.ndarray:
    """Phase evolution exp(-i E_n t / hbar) of well-basis coefficients."""
    if t < 0.0:
        raise InvalidParameterError(f"evolution time must be >= 0, got {t!r}")
    coeffs = np.asarray(coefficients, dtype=complex)
    if coeffs.size > basis.energies.size:
        raise InvalidParameterError(
            f"{coeffs.size} coefficients exceed the {basis.energies.size} stored states"
        )
    return coeffs * np.exp(-1j * basis.energies[: coeffs.size] * t / HBAR)


def translated_wavefunctions(basis: BoundStateBasis, displacement: float) -> np.ndarray:
    """Bound wavefunctions of the well translated by ``displacement``.

    The shifted lattice carries its walls along, so the shifted eigenstates
    are exact translations psi_n(x - d), resampled on the original grid by
    cubic splines and zero outside the translated domain.
    """
    shifted = np.zeros((basis.bound_count, basis.grid.size))
    for n in range(basis.bound_count):
        spline = CubicSpline(basis.grid, basis.wavefunctions[n], bc_type="natural")
        source = basis.grid - displacement
        inside = (source >= basis.grid[0]) & (source <= basis.grid[-1])
        shifted[n, inside] = spline(source[inside])
    return shifted


def shifted_hamiltonian_matrix(
    spec: LatticeSpec, basis: BoundStateBasis, shift: PotentialShift
) -> tuple[np.ndarray, float]:
    """Shifted-well Hamiltonian projected onto the unshifted bound basis.

    Returns (matrix, leakage).  The matrix is <psi_i| p^2/2m + V(x - d) |psi_j>
    over the bound states; since the basis diagonalizes the unshifted
    Hamiltonian, it equals diag(E) plus the potential-difference matrix.
    ``leakage`` is the weight of the unshifted ground state outside the
    shifted well's bound subspace: the population that the shift exposes to
    unbound states.
    """
    d = shift.displacement
    if abs(d) >= spec.period:
        raise InvalidParameterError(
            f"shift displacement {d!r} must be smaller than the period {spec.period!r}"
        )
    k = basis.bound_count
    psi = basis.wavefunctions[:k]
    delta_v = spec.depth * (
        np.sin(spec.k_lattice * (basis.grid - d)) ** 2
        - np.sin(spec.k_lattice * basis.grid) ** 2
    )
    matrix = np.diag(basis.energies[:k]) + (psi * delta_v) @ psi.T * basis.dx
    matrix = 0.5 * (matrix + matrix.T)
    shifted = translated_wavefunctions(basis, d)
    overlaps = shifted @ psi[0] * basis.dx
    leakage = max(0.0, 1.0 - float(np.sum(overlaps**2)))
    return matrix.astype(complex), leakage
