import math

import numpy as np
import pytest

from latticetomo.errors import InvalidParameterError
from latticetomo.fock import DensityMatrix, OscillatorSpec, position_of, momentum_of
from latticetomo.prepare import make_inverted_reference
from latticetomo.quasiprob import (
    hermite_functions,
    husimi_point,
    marginal_x,
    wigner_cartesian_grid,
    wigner_point_integral,
    wigner_point_parity,
)

from conftest import random_density_matrix

INV_PI = 1.0 / math.pi


class TestHusimiPoint:
    def test_vacuum_peak(self):
        rho = DensityMatrix.number_state(0, 8)
        assert husimi_point(rho, 0.0) == pytest.approx(INV_PI, abs=1e-15)

    def test_contaminated_peak(self):
        rho = DensityMatrix.from_populations([0.84, 0.16], 8)
        assert husimi_point(rho, 0.0) == pytest.approx(0.84 * INV_PI, abs=1e-15)

    def test_vacuum_gaussian_falloff(self):
        # Oracle: closed-form Q of the vacuum, exp(-|alpha|^2) / pi.
        rho = DensityMatrix.number_state(0, 8)
        assert husimi_point(rho, 1.0) == pytest.approx(math.e**-1 * INV_PI, abs=1e-15)
        for alpha in (0.3 + 0.4j, -1.2 + 0.9j):
            expected = math.exp(-abs(alpha) ** 2) * INV_PI
            assert husimi_point(rho, alpha) == pytest.approx(expected, rel=1e-12)

    def test_bounds_over_random_pairs(self):
        rng = np.random.default_rng(5)
        states = [random_density_matrix(rng, rng.integers(2, 7)) for _ in range(100)]
        for _ in range(10_000):
            rho = states[rng.integers(len(states))]
            alpha = complex(rng.normal(scale=1.5), rng.normal(scale=1.5))
            value = husimi_point(rho, alpha)
            assert value >= -1e-15
            assert value <= INV_PI + 1e-12


class TestWignerParity:
    def test_vacuum_origin(self):
        rho = DensityMatrix.number_state(0, 8)
        assert wigner_point_parity(rho, 0.0) == pytest.approx(INV_PI, abs=1e-12)

    def test_inverted_mixture_origin(self):
        rho = make_inverted_reference(0.3, 0.7)
        value = wigner_point_parity(rho, 0.0)
        assert value == pytest.approx(-0.4 * INV_PI, abs=1e-12)
        # The reconstructed negativity sits within 0.01 of the observed -0.12.
        assert abs(value - (-0.12)) < 0.01

    def test_vacuum_gaussian(self):
        # Oracle: analytic vacuum distribution exp(-2 |alpha|^2) / pi.
        rho = DensityMatrix.number_state(0, 8)
        for alpha in (0.5, 0.5 + 0.3j, 1.2 - 0.7j, -0.4 + 1.1j):
            expected = math.exp(-2.0 * abs(alpha) ** 2) * INV_PI
            assert wigner_point_parity(rho, alpha) == pytest.approx(expected, abs=1e-10)

    def test_rotational_symmetry_for_diagonal_state(self):
        rho = make_inverted_reference(0.3, 0.7)
        values = [
            wigner_point_parity(rho, 0.8 * np.exp(1j * theta))
            for theta in np.linspace(0.0, 2.0 * math.pi, 17)
        ]
        assert max(values) - min(values) < 1e-10


class TestWignerIntegral:
    def test_vacuum_origin(self, deep_spec):
        rho = DensityMatrix.number_state(0, 6)
        assert wigner_point_integral(rho, 0.0, 0.0, deep_spec) == pytest.approx(INV_PI, abs=1e-6)

    def test_first_excited_origin(self, deep_spec):
        # Oracle: the parity identity gives -1/pi for the first excited state.
        rho = DensityMatrix.number_state(1, 4)
        assert wigner_point_integral(rho, 0.0, 0.0, deep_spec) == pytest.approx(-INV_PI, abs=1e-6)

    def test_agrees_with_parity_on_random_states(self, deep_spec):
        # The module's central cross-oracle: two independent evaluations of
        # the same distribution.
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(25):
            rho = random_density_matrix(rng, 4)
            for _ in range(25):
                alpha = complex(rng.normal(scale=0.9), rng.normal(scale=0.9))
                x = position_of(alpha, deep_spec)
                p = momentum_of(alpha, deep_spec)
                diff = abs(
                    wigner_point_parity(rho, alpha)
                    - wigner_point_integral(rho, x, p, deep_spec)
                )
                worst = max(worst, diff)
        assert worst < 1e-6


class TestNormalization:
    @staticmethod
    def _polar_quadrature(evaluate, r_max, n_r=96, n_theta=64):
        nodes, weights = np.polynomial.legendre.leggauss(n_r)
        radii = 0.5 * r_max * (nodes + 1.0)
        radial_weights = 0.5 * r_max * weights
        thetas = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
        total = 0.0
        for r, w in zip(radii, radial_weights):
            ring = sum(evaluate(r * np.exp(1j * t)) for t in thetas) / n_theta
            total += 2.0 * math.pi * ring * r * w
        return total

    def test_husimi_integrates_to_one(self):
        rng = np.random.default_rng(21)
        rho = random_density_matrix(rng, 4)
        integral = self._polar_quadrature(lambda a: husimi_point(rho, a), 6.0)
        assert integral == pytest.approx(1.0, abs=1e-4)

    def test_wigner_integrates_to_half(self):
        rng = np.random.default_rng(22)
        rho = random_density_matrix(rng, 3)
        integral = self._polar_quadrature(lambda a: wigner_point_parity(rho, a), 4.5, n_r=72)
        assert 2.0 * integral == pytest.approx(1.0, abs=1e-3)


def _hermite_oracle(n, xi):
    """Independent orthonormal Hermite functions for the marginal oracle."""
    psi_prev = math.pi**-0.25 * np.exp(-0.5 * xi * xi)
    if n == 0:
        return psi_prev
    psi = math.sqrt(2.0) * xi * psi_prev
    for k in range(1, n):
        psi, psi_prev = (
            math.sqrt(2.0 / (k + 1)) * xi * psi - math.sqrt(k / (k + 1)) * psi_prev,
            psi,
        )
    return psi


class TestMarginal:
    def test_vacuum_width_and_normalization(self, deep_spec):
        rho = DensityMatrix.number_state(0, 6)
        x = np.linspace(-6 * deep_spec.x0, 6 * deep_spec.x0, 81)
        p = np.linspace(-6 * deep_spec.p0, 6 * deep_spec.p0, 81)
        marginal = marginal_x(wigner_cartesian_grid(rho, deep_spec, x, p))
        norm = np.trapezoid(marginal.density, marginal.x)
        assert norm == pytest.approx(1.0, abs=1e-3)
        rms = math.sqrt(np.trapezoid(marginal.density * marginal.x**2, marginal.x) / norm)
        assert rms == pytest.approx(deep_spec.x0, rel=0.01)
        assert not marginal.warning

    def test_mixture_matches_hermite_density(self, deep_spec):
        # Oracle: diagonal position density from orthonormal Hermite
        # functions, independent of the Wigner-grid route.
        rho = make_inverted_reference(0.3, 0.7, dim=6)
        x = np.linspace(-7 * deep_spec.x0, 7 * deep_spec.x0, 113)
        p = np.linspace(-7 * deep_spec.p0, 7 * deep_spec.p0, 113)
        marginal = marginal_x(wigner_cartesian_grid(rho, deep_spec, x, p))
        xi = x / (math.sqrt(2.0) * deep_spec.x0)
        scale = math.sqrt(2.0) * deep_spec.x0
        oracle = (0.3 * _hermite_oracle(0, xi) ** 2 + 0.7 * _hermite_oracle(1, xi) ** 2) / scale
        # Compare in the dimensionless normalization (density times width scale).
        np.testing.assert_allclose(marginal.density * scale, oracle * scale, atol=1e-4)

    def test_narrow_grid_sets_warning(self, deep_spec):
        rho = DensityMatrix.number_state(0, 4)
        x = np.linspace(-4 * deep_spec.x0, 4 * deep_spec.x0, 65)
        p = np.linspace(-2 * deep_spec.p0, 2 * deep_spec.p0, 65)
        marginal = marginal_x(wigner_cartesian_grid(rho, deep_spec, x, p))
        assert marginal.warning


class TestHermiteFunctions:
    def test_orthonormal_on_dense_grid(self):
        xi = np.linspace(-20.0, 20.0, 4001)
        psi = hermite_functions(12, xi)
        gram = psi @ psi.T * (xi[1] - xi[0])
        np.testing.assert_allclose(gram, np.eye(12), atol=1e-8)

    def test_stable_at_high_order(self):
        xi = np.linspace(-25.0, 25.0, 2001)
        psi = hermite_functions(150, xi)
        assert np.all(np.isfinite(psi))
        norm = np.sum(psi[-1] ** 2) * (xi[1] - xi[0])
        assert norm == pytest.approx(1.0, abs=1e-6)
