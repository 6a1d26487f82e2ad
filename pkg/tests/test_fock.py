import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latticetomo.constants import HBAR
from latticetomo.errors import InvalidParameterError
from latticetomo.fock import (
    DensityMatrix,
    FockVector,
    OscillatorSpec,
    alpha_from_phase_space,
    displacement_matrix,
    make_coherent,
    momentum_of,
    position_of,
    rotation_matrix,
    working_dimension,
)

from conftest import RB85_APPROX_MASS, random_density_matrix


class TestMakeCoherent:
    def test_vacuum(self):
        state = make_coherent(0.0, 8)
        expected = np.zeros(8)
        expected[0] = 1.0
        np.testing.assert_allclose(state.amplitudes, expected)

    def test_amplitude_ratio_restores_beta(self):
        state = make_coherent(0.88, 8)
        assert state.amplitudes[1] / state.amplitudes[0] == pytest.approx(0.88, abs=1e-12)

    def test_truncation_loss_matches_poisson_tail(self):
        # Oracle: direct summation of the Poisson tail for |beta|^2 = 0.7744.
        lam = 0.88**2
        tail = 1.0 - sum(math.exp(-lam) * lam**n / math.factorial(n) for n in range(4))
        state = make_coherent(0.88, 4)
        assert tail < 0.01
        assert state.truncation_loss == pytest.approx(tail, abs=1e-12)

    def test_invalid_dimension(self):
        with pytest.raises(InvalidParameterError):
            make_coherent(0.5, 0)


class TestDisplacement:
    def test_zero_is_identity(self):
        np.testing.assert_array_equal(displacement_matrix(0.0, 6), np.eye(6))

    def test_column_zero_is_coherent_state(self):
        disp = displacement_matrix(0.88, 32)
        coherent = make_coherent(0.88, 32).amplitudes
        assert np.max(np.abs(disp[:, 0] - coherent)) < 1e-8

    def test_unitary_on_leading_block(self):
        disp = displacement_matrix(2.0, 64)
        defect = disp.conj().T @ disp - np.eye(64)
        assert np.max(np.abs(defect[:16, :16])) < 1e-8

    def test_inverse_on_guarded_block(self):
        alpha = 1.3 + 0.4j
        guard = working_dimension(0, alpha)
        dim = guard + 24
        product = displacement_matrix(alpha, dim) @ displacement_matrix(-alpha, dim)
        block = dim - guard
        assert np.max(np.abs(product[:block, :block] - np.eye(dim)[:block, :block])) < 1e-8

    def test_complex_matches_polar_factorization(self):
        alpha = 0.7 * np.exp(1j * 1.1)
        direct = displacement_matrix(alpha, 24)
        rot = rotation_matrix(-1.1, 24)
        factored = rot @ displacement_matrix(0.7, 24) @ rot.conj().T
        assert np.max(np.abs(direct - factored)) < 1e-10


class TestRotation:
    def test_zero_and_full_turn_are_identity(self):
        np.testing.assert_allclose(rotation_matrix(0.0, 5), np.eye(5))
        np.testing.assert_allclose(rotation_matrix(2.0 * math.pi, 5), np.eye(5), atol=1e-12)

    def test_rotates_coherent_state(self):
        beta, theta = 0.9 - 0.2j, 0.77
        rotated = rotation_matrix(theta, 24) @ make_coherent(beta, 24).amplitudes
        expected = make_coherent(beta * np.exp(-1j * theta), 24).amplitudes
        assert np.max(np.abs(rotated - expected)) < 1e-10

    @given(
        st.floats(min_value=-10.0, max_value=10.0),
        st.floats(min_value=-10.0, max_value=10.0),
    )
    def test_composition(self, theta1, theta2):
        combined = rotation_matrix(theta1, 6) @ rotation_matrix(theta2, 6)
        np.testing.assert_allclose(combined, rotation_matrix(theta1 + theta2, 6), atol=1e-12)


class TestFockVector:
    def test_rejects_unnormalizable(self):
        with pytest.raises(InvalidParameterError):
            FockVector(np.array([1.0, 1.0]))

    def test_density_matrix_roundtrip(self):
        state = make_coherent(0.5, 6)
        rho = state.density_matrix()
        assert rho.trace == pytest.approx(state.norm_squared, abs=1e-12)


class TestDensityMatrix:
    def test_rejects_non_hermitian(self):
        bad = np.array([[0.5, 0.1], [0.3, 0.5]], dtype=complex)
        with pytest.raises(InvalidParameterError):
            DensityMatrix(bad)

    def test_rejects_negative_eigenvalue(self):
        bad = np.diag([1.2, -0.2]).astype(complex)
        with pytest.raises(InvalidParameterError):
            DensityMatrix(bad)

    def test_trace_deficit_for_lossy_state(self):
        lossy = DensityMatrix(np.diag([0.6, 0.3]).astype(complex))
        assert lossy.trace_deficit == pytest.approx(0.1)

    def test_random_states_are_valid(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            rho = random_density_matrix(rng, 5)
            assert rho.trace == pytest.approx(1.0, abs=1e-9)


class TestOscillatorSpec:
    def test_width_product_is_half_hbar(self):
        spec = OscillatorSpec(mass=RB85_APPROX_MASS, omega=48.33e3)
        assert spec.x0 * spec.p0 == pytest.approx(HBAR / 2.0, rel=1e-12)

    def test_ground_width_matches_reported_value(self):
        # x0 = sqrt(hbar / 2 m omega) = 88.0 nm for the deep lattice.
        spec = OscillatorSpec(mass=RB85_APPROX_MASS, omega=48.33e3)
        assert spec.x0 == pytest.approx(88.0e-9, rel=2e-3)

    def test_from_ground_width_inverts(self):
        spec = OscillatorSpec.from_ground_width(RB85_APPROX_MASS, 96.3e-9)
        assert spec.x0 == pytest.approx(96.3e-9, rel=1e-12)

    @given(
        st.floats(min_value=-5e-7, max_value=5e-7),
        st.floats(min_value=-1e-27, max_value=1e-27),
    )
    def test_phase_point_roundtrip(self, x, p):
        spec = OscillatorSpec(mass=RB85_APPROX_MASS, omega=48.33e3)
        alpha = alpha_from_phase_space(x, p, spec)
        assert position_of(alpha, spec) == pytest.approx(x, rel=1e-12, abs=1e-22)
        assert momentum_of(alpha, spec) == pytest.approx(p, rel=1e-12, abs=1e-40)
