"""Simulated measurement protocol and quasi-distribution reconstruction.

A scan visits a polar grid of phase points (displacement magnitude, angle).
For each point the protocol applies the inverse of "rotate then displace" to
the state and reads number populations, exactly as the physical sequence
wait / shift / filter / image does.  Angle convention: the angle label of a
grid point is the phase-plane polar angle of the probed point, oriented so
that free evolution for time t advances a state's angle label by omega t.
Internally that makes the probed complex point alpha = |alpha| exp(-i theta).

Exact mode computes populations from the density matrix; shot-noise mode
resamples each record from a seeded multinomial.  Reconstruction estimators
carry the ambiguity of lumped high-level populations as explicit upper and
lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import least_squares

from .constants import HBAR
from .errors import FitError, InvalidParameterError
from .fock import DensityMatrix, OscillatorSpec, displacement_matrix, working_dimension

DEFAULT_ANGLE_STEP_HUSIMI = 0.24
DEFAULT_ANGLE_COUNT_HUSIMI = 27
# 41 angles on the full circle; the uniform step 2 pi / 41 = 0.1532 rad keeps
# the sweep inside one turn (41 x 0.16 rad would wrap past 2 pi).
DEFAULT_ANGLE_COUNT_WIGNER = 41
DEFAULT_ANGLE_STEP_WIGNER = 2.0 * math.pi / DEFAULT_ANGLE_COUNT_WIGNER
DEFAULT_DISPLACEMENT_STEP = 25.8e-9
DEFAULT_DISPLACEMENT_COUNT = 19

RotationPhases = Callable[[float, int], np.ndarray]


@dataclass(frozen=True)
class ScanGrid:
    """Polar measurement grid: rotation angles x displacement magnitudes.

    ``displacements`` are physical shifts in meters; the dimensionless radius
    of a grid point is displacement / (2 x0) for the oscillator under test.
    Records are ordered displacement-major: index = i_disp * n_angles + i_angle.
    """

    angles: np.ndarray
    displacements: np.ndarray
    mode: str

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        displacements = np.asarray(self.displacements, dtype=float)
        if self.mode not in ("husimi", "wigner"):
            raise InvalidParameterError(f"unknown scan mode {self.mode!r}")
        if angles.ndim != 1 or angles.size < 1 or np.any(np.diff(angles) <= 0.0):
            raise InvalidParameterError("angles must be strictly increasing")
        if angles[0] < 0.0 or angles[-1] > 2.0 * math.pi:
            raise InvalidParameterError("angles must lie within [0, 2 pi]")
        if (
            displacements.ndim != 1
            or displacements.size < 1
            or displacements[0] < 0.0
            or np.any(np.diff(displacements) <= 0.0)
        ):
            raise InvalidParameterError("displacements must be nonnegative and strictly increasing")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "displacements", displacements)

    @property
    def n_points(self) -> int:
        return self.angles.size * self.displacements.size

    @classmethod
    def husimi_default(cls) -> "ScanGrid":
        return cls(
            angles=DEFAULT_ANGLE_STEP_HUSIMI * np.arange(DEFAULT_ANGLE_COUNT_HUSIMI),
            displacements=DEFAULT_DISPLACEMENT_STEP * np.arange(DEFAULT_DISPLACEMENT_COUNT),
            mode="husimi",
        )

    @classmethod
    def wigner_default(cls) -> "ScanGrid":
        return cls(
            angles=DEFAULT_ANGLE_STEP_WIGNER * np.arange(DEFAULT_ANGLE_COUNT_WIGNER),
            displacements=DEFAULT_DISPLACEMENT_STEP * np.arange(DEFAULT_DISPLACEMENT_COUNT),
            mode="wigner",
        )


@dataclass(frozen=True)
class PopulationRecord:
    """Measured level fractions at one grid point."""

    index: int
    alpha_abs: float
    theta: float
    displacement: float
    p0: float
    p1: float
    p_lost: float
    sampled: bool = False
    atom_count: int | None = None


@dataclass(frozen=True)
class QuasiDistributionSample:
    """Reconstructed quasi-distribution value with its two bounds."""

    index: int
    alpha_abs: float
    theta: float
    value: float
    upper: float
    lower: float


@dataclass(frozen=True)
class GaussianFit:
    """Least-squares Gaussian parameters of a cross-section."""

    amplitude: float
    center: float
    rms_width: float
    residual_norm: float
    cut_angle: float = 0.0

    @property
    def center_xy(self) -> tuple[float, float]:
        return (self.center * math.cos(self.cut_angle), self.center * math.sin(self.cut_angle))


class NoiseSpec(NamedTuple):
    atom_count: int
    seed: int
    repetitions: int = 1


def harmonic_rotation_phases(theta: float, count: int) -> np.ndarray:
    """Column phases of the inverse rotation for the harmonic spectrum."""
    return np.exp(1j * theta * np.arange(count))


def spectrum_rotation_phases(energies: np.ndarray, omega: float) -> RotationPhases:
    """Inverse-rotation phases from an exact well spectrum.

    The label angle theta corresponds to waiting (2 pi - theta) / omega in the
    well; levels beyond the supplied spectrum extend harmonically.
    """
    relative = (np.asarray(energies, dtype=float) - energies[0]) / HBAR

    def phases(theta: float, count: int) -> np.ndarray:
        t = ((2.0 * math.pi - theta) % (2.0 * math.pi)) / omega
        ladder = np.empty(count)
        k = min(count, relative.size)
        ladder[:k] = relative[:k]
        if count > k:
            ladder[k:] = relative[k - 1] + omega * np.arange(1, count - k + 1)
        return np.exp(-1j * ladder * t)

    return phases


def scan_populations(
    rho: DensityMatrix,
    spec: OscillatorSpec,
    grid: ScanGrid,
    keep: int,
    rotation_phases: RotationPhases | None = None,
    indices: Sequence[int] | None = None,
) -> np.ndarray:
    """Exact level populations for grid points, factored rotate-then-displace.

    Returns an array of shape (n_points, keep + 1): populations of levels
    0..keep-1 and, in the last column, the lumped weight of everything above.
    ``indices`` restricts evaluation to a subset of grid points (used by the
    threaded runner); rows for other points are zero.

    The transform per point is U = D(-|alpha|) R(-theta): the adjoint of a
    rotation followed by a displacement, so the record at (|alpha|, theta)
    holds <n| D^dag(alpha) rho D(alpha) |n> with alpha = |alpha| e^{-i theta}.
    """
    rotation = rotation_phases or harmonic_rotation_phases
    n_angles = grid.angles.size
    out = np.zeros((grid.n_points, keep + 1))
    wanted = None if indices is None else set(int(i) for i in indices)
    for i_disp, displacement in enumerate(grid.displacements):
        block_rows = range(i_disp * n_angles, (i_disp + 1) * n_angles)
        if wanted is not None and not any(r in wanted for r in block_rows):
            continue
        alpha_abs = displacement / (2.0 * spec.x0)
        n_work = working_dimension(rho.dim, alpha_abs)
        disp = displacement_matrix(-alpha_abs, n_work)
        base = disp[:, : rho.dim]
        for i_angle, theta in enumerate(grid.angles):
            index = i_disp * n_angles + i_angle
            if wanted is not None and index not in wanted:
                continue
            columns = base * rotation(theta, rho.dim)[None, :]
            populations = np.einsum(
                "nj,jk,nk->n", columns, rho.elements, columns.conj()
            ).real
            kept = populations[:keep]  # may be shorter when keep > working dim
            out[index, : kept.size] = kept
            out[index, keep] = max(0.0, 1.0 - float(kept.sum()) - rho.trace_deficit)
    return out


def run_husimi_scan(
    rho: DensityMatrix,
    spec: OscillatorSpec,
    grid: ScanGrid,
    noise: NoiseSpec | None = None,
    rotation_phases: RotationPhases | None = None,
    indices: Sequence[int] | None = None,
) -> tuple[list[PopulationRecord], list[QuasiDistributionSample]]:
    """Ground-projection scan: emits Q = p0 / pi at every grid point.

    The ground population is a direct measurement, so the sample bounds
    coincide with the value.
    """
    if grid.mode != "husimi":
        raise InvalidParameterError(f"husimi scan requires a husimi grid, got {grid.mode!r}")
    records = _records_from_populations(rho, spec, grid, keep=2, noise=noise,
                                        rotation_phases=rotation_phases, indices=indices)
    samples = [
        QuasiDistributionSample(
            index=r.index,
            alpha_abs=r.alpha_abs,
            theta=r.theta,
            value=r.p0 / math.pi,
            upper=r.p0 / math.pi,
            lower=r.p0 / math.pi,
        )
        for r in records
    ]
    return records, samples


def run_wigner_scan(
    rho: DensityMatrix,
    spec: OscillatorSpec,
    grid: ScanGrid,
    bound_dim: int = 2,
    noise: NoiseSpec | None = None,
    rotation_phases: RotationPhases | None = None,
    indices: Sequence[int] | None = None,
) -> list[PopulationRecord]:
    """Population scan with levels >= bound_dim lumped into the lost fraction.

    Mimics the two-bound-state well: displaced population above the barrier
    leaves the trap and only its total weight is known.
    """
    if grid.mode != "wigner":
        raise InvalidParameterError(f"wigner scan requires a wigner grid, got {grid.mode!r}")
    if bound_dim < 2:
        raise InvalidParameterError(f"bound_dim must be >= 2, got {bound_dim}")
    return _records_from_populations(rho, spec, grid, keep=bound_dim, noise=noise,
                                     rotation_phases=rotation_phases, indices=indices)


def _records_from_populations(rho, spec, grid, keep, noise, rotation_phases, indices):
    populations = scan_populations(rho, spec, grid, keep=keep,
                                   rotation_phases=rotation_phases, indices=indices)
    n_angles = grid.angles.size
    records = []
    rows = range(grid.n_points) if indices is None else indices
    for index in rows:
        i_disp, i_angle = divmod(index, n_angles)
        row = populations[index]
        record = PopulationRecord(
            index=index,
            alpha_abs=grid.displacements[i_disp] / (2.0 * spec.x0),
            theta=float(grid.angles[i_angle]),
            displacement=float(grid.displacements[i_disp]),
            p0=float(row[0]),
            p1=float(row[1]),
            p_lost=float(row[2:].sum()),
        )
        if noise is not None:
            record = sample_shot_noise(record, noise.atom_count, noise.seed,
                                       repetitions=noise.repetitions)
        records.append(record)
    return records


def scan_parity_values(
    rho: DensityMatrix,
    spec: OscillatorSpec,
    grid: ScanGrid,
    rotation_phases: RotationPhases | None = None,
) -> np.ndarray:
    """Full parity sum (1/pi) sum_n (-1)^n p_n at every grid point.

    Protocol-side evaluation with no lumping: every level of the working
    dimension is measured.  Used to validate the scan against the direct
    parity evaluation of the distribution.
    """
    rotation = rotation_phases or harmonic_rotation_phases
    n_angles = grid.angles.size
    out = np.empty(grid.n_points)
    for i_disp, displacement in enumerate(grid.displacements):
        alpha_abs = displacement / (2.0 * spec.x0)
        n_work = working_dimension(rho.dim, alpha_abs)
        disp = displacement_matrix(-alpha_abs, n_work)
        base = disp[:, : rho.dim]
        signs = 1.0 - 2.0 * (np.arange(n_work) % 2)
        for i_angle, theta in enumerate(grid.angles):
            columns = base * rotation(theta, rho.dim)[None, :]
            populations = np.einsum(
                "nj,jk,nk->n", columns, rho.elements, columns.conj()
            ).real
            out[i_disp * n_angles + i_angle] = float(np.dot(signs, populations)) / math.pi
    return out


def estimate_wigner(record: PopulationRecord) -> QuasiDistributionSample:
    """Two-level Wigner estimator with loss-ambiguity bounds.

    value = (p0 - p1) / pi.  The upper bound assigns every lost atom to an
    even level, the lower bound to an odd one, so lower <= value <= upper
    with equality exactly where nothing was lost.
    """
    value = (record.p0 - record.p1) / math.pi
    spread = record.p_lost / math.pi
    return QuasiDistributionSample(
        index=record.index,
        alpha_abs=record.alpha_abs,
        theta=record.theta,
        value=value,
        upper=value + spread,
        lower=value - spread,
    )


def sample_shot_noise(
    record: PopulationRecord, atom_count: int, seed: int, repetitions: int = 1
) -> PopulationRecord:
    """Multinomial resampling of one record with a per-point substream.

    The stream depends only on (seed, grid index, repetition), so results are
    identical however the grid is chunked or parallelized.  With repetitions
    the sampled fractions are averaged over independent shots.
    """
    if atom_count < 1:
        raise InvalidParameterError(f"atom_count must be >= 1, got {atom_count}")
    if repetitions < 1:
        raise InvalidParameterError(f"repetitions must be >= 1, got {repetitions}")
    probabilities = np.array([record.p0, record.p1, record.p_lost], dtype=float)
    probabilities = np.clip(probabilities, 0.0, None)
    probabilities /= probabilities.sum()
    totals = np.zeros(3)
    for repetition in range(repetitions):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(record.index, repetition))
        )
        totals += rng.multinomial(atom_count, probabilities)
    fractions = totals / (atom_count * repetitions)
    return replace(
        record,
        p0=float(fractions[0]),
        p1=float(fractions[1]),
        p_lost=float(fractions[2]),
        sampled=True,
        atom_count=atom_count,
    )


def average_records(record_sets: Sequence[Sequence[PopulationRecord]], weights) -> list[PopulationRecord]:
    """Convex combination of aligned record sets (ensemble averaging)."""
    weights = np.asarray(weights, dtype=float)
    if len(record_sets) != weights.size or abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidParameterError("need one weight per record set, summing to 1")
    first = record_sets[0]
    out = []
    for i, base in enumerate(first):
        p0 = sum(w * rs[i].p0 for w, rs in zip(weights, record_sets))
        p1 = sum(w * rs[i].p1 for w, rs in zip(weights, record_sets))
        lost = sum(w * rs[i].p_lost for w, rs in zip(weights, record_sets))
        out.append(replace(base, p0=float(p0), p1=float(p1), p_lost=float(lost)))
    return out


class XrmsEstimate(NamedTuple):
    x_rms: float
    integral: float
    tail_fraction: float
    warning: bool


def infer_xrms_from_normalization(
    samples: Sequence[QuasiDistributionSample], grid: ScanGrid
) -> XrmsEstimate:
    """Ground width that normalizes the measured Husimi distribution to one.

    Unit normalization of Q in the scaled polar coordinates r / 2 x_rms means
    the raw polar integral S = integral Q(r, theta) r dr dtheta equals
    4 x_rms^2, so x_rms = sqrt(S) / 2.  Radial integration is Simpson on the
    grid radii plus a Gaussian tail fit through the outermost two rings; the
    warning flag trips when the edge value has not decayed below 1e-3 of the
    peak (normalization then relies on the extrapolated tail).
    """
    values = _polar_value_table(samples, grid)
    radii = grid.displacements
    if radii.size < 3:
        raise InvalidParameterError("need at least 3 displacement rings")
    angle_weights = _periodic_angle_weights(grid.angles)
    ring_means = values @ angle_weights / (2.0 * math.pi)
    radial = simpson(ring_means * radii, x=radii)
    tail = _gaussian_tail(radii, ring_means)
    integral = 2.0 * math.pi * (radial + tail)
    peak = float(np.max(values))
    decayed = peak <= 0.0 or float(np.max(values[-1])) <= 1e-3 * peak
    tail_fraction = 2.0 * math.pi * tail / integral if integral > 0.0 else 0.0
    if integral <= 0.0:
        raise InvalidParameterError("Husimi samples integrate to a non-positive value")
    return XrmsEstimate(
        x_rms=math.sqrt(integral) / 2.0,
        integral=integral,
        tail_fraction=tail_fraction,
        warning=not decayed,
    )


class NormalizationReport(NamedTuple):
    value: float
    upper: float
    lower: float
    ordered: bool


def normalization_report(
    samples: Sequence[QuasiDistributionSample], grid: ScanGrid
) -> NormalizationReport:
    """Polar-grid normalization integrals of the estimator and its bounds.

    Computed in the dimensionless convention in which a trace-1 state with no
    lost population integrates to 1 (twice the plane integral over the
    complex phase point).  The bound surfaces do not decay at large radius,
    so no tail extrapolation is attempted: the integrals cover the scanned
    disc only, which is what makes the bound integrals diverge from the value
    integral as losses grow.
    """
    angle_weights = _periodic_angle_weights(grid.angles)
    outputs = []
    for field in ("value", "upper", "lower"):
        table = _polar_value_table(samples, grid, field=field)
        # alpha-space radial coordinate: records carry |alpha| directly.
        radii = np.array([s.alpha_abs for s in sorted(samples, key=lambda s: s.index)])
        radii = radii.reshape(grid.displacements.size, grid.angles.size)[:, 0]
        ring = table @ angle_weights
        outputs.append(2.0 * float(simpson(ring * radii, x=radii)))
    value, upper, lower = outputs
    return NormalizationReport(
        value=value, upper=upper, lower=lower, ordered=lower <= value <= upper
    )


def fit_gaussian_cross_section(
    positions: np.ndarray,
    values: np.ndarray,
    cut_angle: float = 0.0,
    max_iterations: int = 200,
) -> GaussianFit:
    """Least-squares fit of amplitude * exp(-(r - c)^2 / 2 w^2) to a cut.

    Deterministic initialization from the sample moments.  Raises FitError
    with the final residual norm if the optimizer does not converge within
    the iteration budget.
    """
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)
    if positions.size < 6:
        raise InvalidParameterError("need at least 6 points spanning the peak")
    if positions.size != values.size:
        raise InvalidParameterError("positions and values must have equal length")
    weight = np.clip(values, 0.0, None)
    total = float(weight.sum())
    if total <= 0.0:
        raise FitError("cross-section has no positive weight", residual_norm=float("inf"))
    center0 = float((weight * positions).sum() / total)
    width0 = math.sqrt(max((weight * (positions - center0) ** 2).sum() / total, 1e-30))
    amplitude0 = float(values.max())

    def residuals(params):
        amplitude, center, width = params
        return amplitude * np.exp(-((positions - center) ** 2) / (2.0 * width**2)) - values

    scale = np.array([max(amplitude0, 1e-12), max(abs(center0), width0), width0])
    result = least_squares(
        residuals,
        x0=[amplitude0, center0, width0],
        x_scale=scale,
        max_nfev=max_iterations,
    )
    residual_norm = float(np.linalg.norm(result.fun))
    if not result.success:
        raise FitError(
            f"Gaussian fit did not converge: {result.message}", residual_norm=residual_norm
        )
    amplitude, center, width = result.x
    return GaussianFit(
        amplitude=float(amplitude),
        center=float(center),
        rms_width=abs(float(width)),
        residual_norm=residual_norm,
        cut_angle=cut_angle,
    )


def _polar_value_table(samples, grid, field="value"):
    ordered = sorted(samples, key=lambda s: s.index)
    if len(ordered) != grid.n_points:
        raise InvalidParameterError(
            f"expected {grid.n_points} samples for the grid, got {len(ordered)}"
        )
    flat = np.array([getattr(s, field) for s in ordered])
    return flat.reshape(grid.displacements.size, grid.angles.size)


def _periodic_angle_weights(angles: np.ndarray) -> np.ndarray:
    """Trapezoid weights on the circle, closing the wrap-around segment."""
    extended = np.concatenate([angles, [angles[0] + 2.0 * math.pi]])
    gaps = np.diff(extended)
    weights = np.empty(angles.size)
    weights[0] = 0.5 * (gaps[0] + gaps[-1])
    weights[1:] = 0.5 * (gaps[:-1] + gaps[1:])
    return weights


def _gaussian_tail(radii: np.ndarray, ring_means: np.ndarray) -> float:
    """Tail integral of Q r dr beyond the last ring, from a local Gaussian fit."""
    q_last, q_prev = float(ring_means[-1]), float(ring_means[-2])
    if q_last <= 0.0 or q_prev <= q_last:
        return 0.0
    decay = (radii[-1] ** 2 - radii[-2] ** 2) / math.log(q_prev / q_last)
    if decay <= 0.0:
        return 0.0
    return 0.5 * decay * q_last
