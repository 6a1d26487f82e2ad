"""Direct evaluation of quasi-probability distributions from a density matrix.

These are the reference ("oracle") evaluations used to validate the simulated
measurement protocol.  Dimensionless convention: both distributions are
functions of the complex phase point alpha with prefactor 1/pi, so that
integrating the Husimi density over the plane gives 1 and integrating the
parity-form distribution gives 1/2.  Physical-unit densities follow by the
substitution x = 2 x0 Re(alpha), p = 2 p0 Im(alpha) and division by hbar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import HBAR
from .errors import InvalidParameterError, QuadratureError
from .fock import (
    DensityMatrix,
    OscillatorSpec,
    alpha_from_phase_space,
    displacement_matrix,
    make_coherent,
    working_dimension,
)

WIGNER_QUADRATURE_TOL = 1e-6
MARGINAL_TRUNCATION_TOL = 1e-3


def husimi_point(rho: DensityMatrix, alpha: complex) -> float:
    """Husimi density (1/pi) <alpha|rho|alpha> at one phase point.

    Exact for the truncated state: amplitudes of |alpha> beyond the state's
    dimension never touch rho.  Always in [0, 1/pi].
    """
    coh = make_coherent(alpha, rho.dim).amplitudes
    value = coh.conj() @ rho.elements @ coh
    return float(value.real) / math.pi


def wigner_point_parity(rho: DensityMatrix, alpha: complex) -> float:
    """Wigner value (1/pi) sum_n (-1)^n <n| D^dag(alpha) rho D(alpha) |n>.

    The rotation of a polar phase point is folded into the complex alpha.
    The displacement is built in an enlarged working dimension so that the
    truncated populations carry the full parity sum.
    """
    populations = displaced_number_populations(rho, alpha)
    signs = 1.0 - 2.0 * (np.arange(populations.size) % 2)
    return float(np.dot(signs, populations)) / math.pi


def displaced_number_populations(rho: DensityMatrix, alpha: complex) -> np.ndarray:
    """Populations <n| D^dag(alpha) rho D(alpha) |n> in the working dimension.

    Uses the exact polar identity D(r e^{i phi}) = R(-phi) D(r) R(phi), which
    turns the rotation into diagonal phases on rho and lets the real-radius
    displacement be cached across phase points sharing a radius.
    """
    alpha = complex(alpha)
    n_work = working_dimension(rho.dim, alpha)
    radius, phi = abs(alpha), np.angle(alpha)
    disp = _real_displacement_cached(radius, n_work)
    # Only rows below the state's dimension reach rho.
    block = disp[: rho.dim, :]
    if phi == 0.0:
        rotated = rho.elements
    else:
        phases = np.exp(-1j * phi * np.arange(rho.dim))
        rotated = rho.elements * np.outer(phases, phases.conj())
    return np.einsum("jn,jk,kn->n", block, rotated, block).real


@lru_cache(maxsize=512)
def _real_displacement_cached(radius: float, dim: int) -> np.ndarray:
    matrix = displacement_matrix(radius, dim).real
    matrix.flags.writeable = False
    return matrix


@lru_cache(maxsize=8)
def _leggauss_cached(nodes: int):
    q, w = np.polynomial.legendre.leggauss(nodes)
    q.flags.writeable = False
    w.flags.writeable = False
    return q, w


def hermite_functions(count: int, xi: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions psi_0..psi_{count-1} on the points ``xi``.

    Generated by the stable three-term recurrence
    psi_{n+1} = sqrt(2/(n+1)) xi psi_n - sqrt(n/(n+1)) psi_{n-1},
    which stays finite far beyond the n ~ 85 overflow limit of the
    factorial-normalized polynomial form.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty((count, xi.size), dtype=float)
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * xi * xi)
    if count > 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for n in range(1, count - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def wigner_point_integral(
    rho: DensityMatrix,
    x: float,
    p: float,
    spec: OscillatorSpec,
    nodes: int = 256,
) -> float:
    """Wigner value at physical (x, p) by quadrature of the defining integral.

    Evaluates (1/pi) * integral of <X+q| rho |X-q> exp(-2iPq) dq in the
    dimensionless quadratures X = x / (sqrt(2) x0), P = p / (sqrt(2) p0),
    which coincides pointwise with the parity form.  Gauss-Legendre nodes on
    a Gaussian-damped interval; one refinement step checks convergence.

    Raises QuadratureError when refinements disagree by more than 1e-6.
    """
    big_x = x / (math.sqrt(2.0) * spec.x0)
    big_p = p / (math.sqrt(2.0) * spec.p0)
    coarse = _wigner_quadrature(rho, big_x, big_p, nodes)
    fine = _wigner_quadrature(rho, big_x, big_p, 2 * nodes)
    if abs(fine - coarse) > WIGNER_QUADRATURE_TOL:
        raise QuadratureError(
            f"Wigner quadrature did not converge at (x={x!r}, p={p!r}): "
            f"|{fine!r} - {coarse!r}| > {WIGNER_QUADRATURE_TOL}"
        )
    return fine


def _wigner_quadrature(rho: DensityMatrix, big_x: float, big_p: float, nodes: int) -> float:
    # Integrand ~ exp(-X^2 - q^2) times polynomials; the half-width covers the
    # classical support of the highest basis state plus a Gaussian tail.
    half_width = 8.0 * max(1.0, math.sqrt(2.0 * rho.dim - 1.0))
    q, w = _leggauss_cached(nodes)
    q = q * half_width
    w = w * half_width
    left = hermite_functions(rho.dim, big_x + q)
    right = hermite_functions(rho.dim, big_x - q)
    phase = np.exp(-2j * big_p * q) * w
    kernel = left @ (right * phase).T  # kernel[m, n] = sum_q psi_m(X+q) psi_n(X-q) e^{-2iPq} w
    value = np.einsum("mn,mn->", rho.elements, kernel)
    return float(value.real) / math.pi


@dataclass(frozen=True)
class WignerGrid:
    """Wigner samples on a rectangular (x, p) grid in physical normalization."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray
    spec: OscillatorSpec

    def __post_init__(self):
        if self.values.shape != (self.x.size, self.p.size):
            raise InvalidParameterError("values must have shape (len(x), len(p))")


@dataclass(frozen=True)
class MarginalDensity:
    """Position density from integrating a Wigner grid over momentum."""

    x: np.ndarray
    density: np.ndarray
    truncation_estimate: float
    warning: bool


def wigner_cartesian_grid(
    rho: DensityMatrix, spec: OscillatorSpec, x: np.ndarray, p: np.ndarray
) -> WignerGrid:
    """Evaluate the physical-unit Wigner function W(x, p) on a product grid.

    Physical normalization: integral over dx dp equals the trace; obtained
    from the dimensionless convention by dividing by hbar.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    values = np.empty((x.size, p.size))
    for i, xi in enumerate(x):
        for j, pj in enumerate(p):
            alpha = alpha_from_phase_space(xi, pj, spec)
            values[i, j] = wigner_point_parity(rho, alpha) / HBAR
    return WignerGrid(x=x, p=p, values=values, spec=spec)


def marginal_x(grid: WignerGrid) -> MarginalDensity:
    """Trapezoid-integrate a Wigner grid over p to get the position density.

    The truncation estimate combines the Gaussian tail beyond the momentum
    edges with a step-halving coarseness check; the warning flag trips when
    the estimated normalization error exceeds 1e-3, including grids narrower
    than +-5 ground widths or coarser than 64 momentum points.
    """
    density = np.trapezoid(grid.values, grid.p, axis=1)
    # Tail estimate: Gaussian decay on the scale p0 beyond each edge.
    edge = np.abs(grid.values[:, 0]) + np.abs(grid.values[:, -1])
    tail_norm = float(np.trapezoid(edge, grid.x)) * grid.spec.p0
    # Coarseness estimate: compare with the every-other-point trapezoid.
    halved = np.trapezoid(grid.values[:, ::2], grid.p[::2], axis=1)
    coarse_norm = float(np.trapezoid(np.abs(density - halved), grid.x))
    estimate = tail_norm + coarse_norm
    span_ok = (
        grid.p.size >= 64
        and grid.p[0] <= -5.0 * grid.spec.p0
        and grid.p[-1] >= 5.0 * grid.spec.p0
    )
    warning = (not span_ok) or estimate > MARGINAL_TRUNCATION_TOL
    return MarginalDensity(
        x=grid.x.copy(), density=density, truncation_estimate=estimate, warning=warning
    )
