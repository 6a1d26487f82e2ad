"""State-preparation pipelines and the well-to-well dephasing channel.

Three preparations feed the tomography runs: a filtered ground state with a
small first-excited contamination, a displaced (near-coherent) state, and an
inverted mixture produced by a shift / hold / shift-back sequence in a
two-bound-state well.  All pipelines are deterministic; ensemble averaging
over the well-frequency distribution uses fixed quadrature nodes, never
random draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .constants import HBAR
from .errors import InvalidParameterError, NumericalError
from .fock import DensityMatrix, OscillatorSpec, displacement_matrix, working_dimension
from .lattice import BoundStateBasis, LatticeSpec, PotentialShift, solve_bound_states

DEFAULT_CONTAMINATION = 0.10
DEFAULT_DIMENSION = 8
DEFAULT_FILTER_DEPTH_RECOILS = 5.0
OFFDIAGONAL_FLOOR = 1e-3


@dataclass(frozen=True)
class PreparationConfig:
    """Parameters of the preparation pipelines.

    ``contamination`` is the first-excited-state fraction surviving the
    ground-state filter (default the midpoint of the observed 5-15% range).
    ``shift`` is the lattice displacement used both for the coherent
    preparation and the inversion sequence; ``hold_time`` is the dwell in the
    shifted well; ``evolve_time`` is free evolution applied after preparation,
    before any scan.  ``realistic_filter`` routes the ground preparation
    through the lower-hold-raise filter model instead of returning the
    mixture directly.
    """

    kind: str = "ground"
    contamination: float = DEFAULT_CONTAMINATION
    shift: float = 0.0
    hold_time: float = 80e-6
    evolve_time: float = 0.0
    probabilities: tuple[float, float] | None = None
    realistic_filter: bool = False
    filter_depth_recoils: float = DEFAULT_FILTER_DEPTH_RECOILS
    dimension: int = DEFAULT_DIMENSION

    def __post_init__(self):
        if self.kind not in ("ground", "coherent", "inverted", "explicit"):
            raise InvalidParameterError(f"unknown preparation kind {self.kind!r}")
        if not 0.0 <= self.contamination <= 0.2:
            raise InvalidParameterError(
                f"contamination must be in [0, 0.2], got {self.contamination!r}"
            )
        if self.hold_time < 0.0:
            raise InvalidParameterError(f"hold_time must be >= 0, got {self.hold_time!r}")
        if self.evolve_time < 0.0:
            raise InvalidParameterError(f"evolve_time must be >= 0, got {self.evolve_time!r}")
        if self.dimension < 2:
            raise InvalidParameterError(f"dimension must be >= 2, got {self.dimension!r}")


@dataclass(frozen=True)
class DephasingModel:
    """Discrete ensemble of well frequencies for inhomogeneous dephasing.

    A Gaussian in omega truncated at +-``truncation_sigmas`` standard
    deviations and renormalized, represented by Gauss-Legendre nodes and
    weights.  The truncation must keep every frequency positive, which bounds
    the admissible relative spread by 1/truncation_sigmas.
    """

    mean_omega: float
    relative_spread: float
    sample_count: int = 33
    truncation_sigmas: float = 2.0

    def __post_init__(self):
        if self.mean_omega <= 0.0:
            raise InvalidParameterError("mean_omega must be positive")
        if self.relative_spread < 0.0:
            raise InvalidParameterError("relative_spread must be >= 0")
        if self.sample_count < 1:
            raise InvalidParameterError("sample_count must be >= 1")
        if self.truncation_sigmas <= 0.0:
            raise InvalidParameterError("truncation_sigmas must be positive")
        if self.relative_spread * self.truncation_sigmas >= 1.0:
            raise InvalidParameterError(
                "frequency distribution reaches omega <= 0: "
                f"spread {self.relative_spread!r} x {self.truncation_sigmas!r} sigma >= 1"
            )

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Frequency nodes and normalized weights of the truncated Gaussian."""
        if self.relative_spread == 0.0 or self.sample_count == 1:
            return np.array([self.mean_omega]), np.array([1.0])
        sigma = self.relative_spread * self.mean_omega
        half = self.truncation_sigmas * sigma
        x, w = np.polynomial.legendre.leggauss(self.sample_count)
        omegas = self.mean_omega + half * x
        weights = w * np.exp(-((omegas - self.mean_omega) ** 2) / (2.0 * sigma**2))
        return omegas, weights / weights.sum()


class PreparationOutput(NamedTuple):
    rho: DensityMatrix
    loss: float


class WidthRatio(NamedTuple):
    value: float
    series_estimate: float


def prepare_ground(config: PreparationConfig, lattice: LatticeSpec | None = None) -> PreparationOutput:
    """Filtered ground state (1 - eps)|0><0| + eps|1><1|.

    In the default (ideal) mode the mixture is returned directly.  With
    ``realistic_filter`` the ground component is run through the filter
    model: project onto the single bound state of the shallow lattice, raise
    back, and re-expand in the deep well basis; the contamination is then
    injected on top, since by symmetry the filter itself would remove the
    odd-parity admixture that the real process leaves behind.
    """
    eps = config.contamination
    dim = config.dimension
    if not config.realistic_filter:
        pops = np.zeros(dim)
        pops[0] = 1.0 - eps
        pops[1] = eps
        return PreparationOutput(DensityMatrix.from_populations(pops), 0.0)
    if lattice is None:
        raise InvalidParameterError("realistic filter mode requires a lattice spec")
    deep = solve_bound_states(lattice)
    shallow_spec = LatticeSpec(
        wavelength=lattice.wavelength,
        intersection_angle=lattice.intersection_angle,
        depth=config.filter_depth_recoils * lattice.recoil,
        mass=lattice.mass,
    )
    shallow = solve_bound_states(shallow_spec)
    if shallow.bound_count != 1:
        raise InvalidParameterError(
            f"filter depth {config.filter_depth_recoils!r} recoils supports "
            f"{shallow.bound_count} bound states, expected exactly 1"
        )
    dx = deep.dx
    filtered = shallow.wavefunctions[0]
    coeffs = deep.wavefunctions[: min(dim, deep.energies.size)] @ filtered * dx
    weight = float(np.sum(coeffs**2))
    # Atoms lost in the filter: the deep ground's weight outside the single
    # surviving shallow state (they become unbound during the hold).
    survival = float(coeffs[0] ** 2)
    ground = np.zeros((dim, dim), dtype=complex)
    k = coeffs.size
    ground[:k, :k] = np.outer(coeffs, coeffs) / weight
    rho = (1.0 - eps) * ground
    rho[1, 1] += eps
    return PreparationOutput(DensityMatrix(rho), (1.0 - eps) * (1.0 - survival))


def prepare_coherent(
    delta_x: float,
    spec: OscillatorSpec,
    config: PreparationConfig,
    bound_dim: int | None = None,
) -> PreparationOutput:
    """Displace the filtered ground state by ``delta_x``.

    The displacement amplitude is beta = delta_x sqrt(m omega / 2 hbar)
    = delta_x / 2 x0.  With ``bound_dim`` set, the state is truncated to that
    many levels (finite well depth) and the lost population reported.
    """
    ground, filter_loss = prepare_ground(config)
    beta = delta_x / (2.0 * spec.x0)
    dim = ground.dim
    n_work = working_dimension(dim, beta)
    disp = displacement_matrix(beta, n_work)
    block = disp[:, :dim]
    displaced = block @ ground.elements @ block.conj().T
    keep = dim if bound_dim is None else min(bound_dim, dim)
    truncated = displaced[:dim, :dim].copy()
    if keep < dim:
        truncated[keep:, :] = 0.0
        truncated[:, keep:] = 0.0
    truncated = 0.5 * (truncated + truncated.conj().T)
    retained = float(truncated.trace().real)
    loss = max(0.0, 1.0 - retained)
    rho = DensityMatrix(truncated / retained)
    return PreparationOutput(rho, filter_loss + loss)


def make_inverted_reference(p0: float, p1: float, dim: int = DEFAULT_DIMENSION) -> DensityMatrix:
    """Incoherent two-level mixture diag(p0, p1, 0, ...)."""
    if p0 < 0.0 or p1 < 0.0 or abs(p0 + p1 - 1.0) > 1e-9:
        raise InvalidParameterError(
            f"probabilities must be nonnegative and sum to 1, got ({p0!r}, {p1!r})"
        )
    pops = np.zeros(dim)
    pops[0] = p0
    pops[1] = p1
    return DensityMatrix.from_populations(pops)


def prepare_inverted(
    lattice: LatticeSpec,
    config: PreparationConfig,
    model: DephasingModel | None = None,
    grid_size: int | None = None,
) -> PreparationOutput:
    """Shift / hold / shift-back sequence producing a population inversion.

    Pipeline: filtered ground state in the two-bound-state well -> sudden
    shift of the potential by ``config.shift`` -> exact hold evolution on the
    position grid under the shifted potential -> sudden shift back ->
    projection onto the two-state bound subspace (population outside it is
    the reported loss; in the experiment those atoms leave the trap) ->
    dephasing until coherences fall below 1e-3 of the diagonal.
    """
    basis = solve_bound_states(lattice, grid_size or 1024)
    if basis.bound_count < 2:
        raise InvalidParameterError(
            f"inverted preparation needs >= 2 bound states, well supports {basis.bound_count}"
        )
    eps = config.contamination
    dim = config.dimension
    dx = basis.dx
    shift = PotentialShift.from_displacement(config.shift, basis.spec.period)
    evolved = _evolve_on_grid_shifted(basis, shift.displacement, config.hold_time, grid_size or 1024)
    # Project the two initial pure components onto the bound pair.
    bound_pair = basis.wavefunctions[:2]
    rho2 = np.zeros((2, 2), dtype=complex)
    for weight, column in ((1.0 - eps, 0), (eps, 1)):
        if weight == 0.0:
            continue
        amplitudes = bound_pair @ evolved[:, column] * dx
        rho2 += weight * np.outer(amplitudes, amplitudes.conj())
    retained = float(rho2.trace().real)
    loss = max(0.0, 1.0 - retained)
    rho2 /= retained
    full = np.zeros((dim, dim), dtype=complex)
    full[:2, :2] = rho2
    rho = DensityMatrix(0.5 * (full + full.conj().T))
    omega = well_frequency_of(lattice)
    if model is None:
        model = DephasingModel(mean_omega=omega, relative_spread=0.4)
    rho = _dephase_until_diagonal(rho, model)
    return PreparationOutput(rho, loss)


def well_frequency_of(lattice: LatticeSpec) -> float:
    return lattice.frequency


def _evolve_on_grid_shifted(
    basis: BoundStateBasis, displacement: float, hold_time: float, grid_size: int
) -> np.ndarray:
    """Evolve the two lowest unshifted eigenstates under the shifted potential.

    Returns the evolved grid wavefunctions as columns.  The shifted-well
    Hamiltonian is diagonalized once on the full grid (tridiagonal), so the
    hold evolution is exact within the hard-wall box.
    """
    if hold_time == 0.0:
        return basis.wavefunctions[:2].T.astype(complex)
    spec = basis.spec
    grid = basis.grid
    dx = basis.dx
    potential = spec.depth * np.sin(spec.k_lattice * (grid - displacement)) ** 2
    kinetic_scale = HBAR**2 / (2.0 * spec.mass * dx**2)
    try:
        energies, vectors = eigh_tridiagonal(
            2.0 * kinetic_scale + potential, np.full(grid.size - 1, -kinetic_scale)
        )
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"shifted-well eigensolver failed: {exc}") from exc
    initial = basis.wavefunctions[:2].T
    coefficients = vectors.T @ initial * dx  # grid-orthonormal up to the 1/sqrt(dx) scale
    phases = np.exp(-1j * energies * hold_time / HBAR)
    return vectors @ (coefficients * phases[:, None]) / dx


def dephase(rho: DensityMatrix, model: DephasingModel, t: float) -> DensityMatrix:
    """Ensemble average of harmonic evolution over the frequency distribution.

    Off-diagonal element (m, n) is multiplied by the characteristic function
    of the distribution evaluated at (m - n) t; diagonals are untouched.  The
    channel is an explicit mixture of unitaries, hence trace-preserving and
    completely positive.
    """
    if t < 0.0:
        raise InvalidParameterError(f"dephasing time must be >= 0, got {t!r}")
    omegas, weights = model.nodes()
    levels = np.arange(rho.dim)
    # factor matrix F = sum_k w_k v_k v_k^dag with v_k = exp(-i omega_k t n):
    # a Gram matrix, so the Schur product with rho stays positive semidefinite.
    phases = np.exp(-1j * np.outer(omegas * t, levels))
    factors = (weights[:, None, None] * phases[:, :, None] * phases[:, None, :].conj()).sum(axis=0)
    np.fill_diagonal(factors, 1.0)
    mixed = rho.elements * factors
    return DensityMatrix(0.5 * (mixed + mixed.conj().T))


def _dephase_until_diagonal(rho: DensityMatrix, model: DephasingModel) -> DensityMatrix:
    period = 2.0 * math.pi / model.mean_omega
    t = period
    for _ in range(24):
        candidate = dephase(rho, model, t)
        off = np.abs(candidate.elements - np.diag(candidate.elements.diagonal()))
        scale = float(np.max(candidate.elements.diagonal().real))
        if float(np.max(off)) < OFFDIAGONAL_FLOOR * scale:
            return candidate
        t *= 2.0
    raise NumericalError("dephasing did not suppress coherences below the floor")


def inhomogeneous_width_ratio(model: DephasingModel) -> WidthRatio:
    """Apparent-to-nominal ground width ratio x_rms / x0 of the ensemble.

    The measured squared width averages hbar / (2 m omega) over wells, so
    x_rms / x0 = sqrt(<1/omega> * mean_omega), evaluated numerically on the
    model's quadrature nodes.  ``series_estimate`` is the geometric-series
    shorthand sqrt(1 + s^2 + s^4) for relative spread s, for comparison.
    """
    if model.relative_spread >= 1.0:
        raise InvalidParameterError("relative spread must be < 1 for the width series")
    omegas, weights = model.nodes()
    if np.any(omegas <= 0.0):
        raise InvalidParameterError("frequency distribution has support at omega <= 0")
    mean_inverse = float(np.sum(weights / omegas))
    s = model.relative_spread
    series = math.sqrt(1.0 + s**2 + s**4)
    return WidthRatio(math.sqrt(mean_inverse * model.mean_omega), series)
