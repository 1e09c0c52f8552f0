import numpy as np
import pytest

from app.exceptions import DimensionMismatchError, NonHermitianError, NotPSDError, TraceError
from app.models.linalg import (
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    eig_hermitian,
    fidelity,
    kron,
    matrix_sqrt,
    maximally_coherent_state,
    partial_trace,
    purify,
    random_density_matrix,
    random_isometry,
    random_pure_state,
    trace_norm,
)


def _random_hermitian(dim, rng):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


class TestEigHermitian:
    """Eigendecomposition of Hermitian matrices"""

    def test_identity(self):
        values, _ = eig_hermitian(np.eye(2))
        np.testing.assert_allclose(values, [1.0, 1.0], atol=1e-12)

    def test_pauli_z(self):
        values, _ = eig_hermitian(PAULI_Z)
        np.testing.assert_allclose(values, [1.0, -1.0], atol=1e-12)

    def test_plus_state(self, plus):
        values, vectors = eig_hermitian(plus.matrix)
        np.testing.assert_allclose(values, [1.0, 0.0], atol=1e-12)
        assert abs(np.vdot(vectors[:, 0], np.ones(2) / np.sqrt(2))) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("dim", [1, 2, 3, 5, 8])
    def test_reconstruction(self, dim, rng):
        for _ in range(10):
            h = _random_hermitian(dim, rng)
            values, vectors = eig_hermitian(h)
            assert np.all(np.diff(values) <= 1e-12)
            np.testing.assert_allclose(vectors.conj().T @ vectors, np.eye(dim), atol=1e-10)
            np.testing.assert_allclose(vectors @ np.diag(values) @ vectors.conj().T, h, atol=1e-10)

    @pytest.mark.slow
    def test_reconstruction_many(self, rng):
        for _ in range(1000):
            dim = int(rng.integers(1, 9))
            h = _random_hermitian(dim, rng)
            values, vectors = eig_hermitian(h)
            assert np.abs(vectors @ np.diag(values) @ vectors.conj().T - h).max() <= 1e-10

    def test_non_hermitian_reports_entry(self):
        with pytest.raises(NonHermitianError) as excinfo:
            eig_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))
        assert excinfo.value.indices == (0, 1)
        assert excinfo.value.deviation == pytest.approx(2.0)


class TestDensityMatrix:
    """Validation on construction"""

    def test_trace_error(self):
        with pytest.raises(TraceError):
            DensityMatrix(np.diag([0.5, 0.6]))

    def test_negative_eigenvalue(self):
        with pytest.raises(NotPSDError) as excinfo:
            DensityMatrix(np.diag([1.1, -0.1]))
        assert excinfo.value.min_eigenvalue == pytest.approx(-0.1)

    def test_non_hermitian(self):
        with pytest.raises(NonHermitianError):
            DensityMatrix(np.array([[0.5, 0.3], [0.1, 0.5]]))

    def test_matrix_is_read_only(self, plus):
        with pytest.raises(ValueError):
            plus.matrix[0, 0] = 1.0

    def test_incoherence(self, plus):
        assert DensityMatrix.from_diagonal([0.2, 0.3, 0.5]).is_incoherent()
        assert not plus.is_incoherent()
        assert plus.off_diagonal_mass() == pytest.approx(1.0)


class TestMatrixSqrt:
    """Square roots of PSD matrices"""

    def test_diagonal(self):
        np.testing.assert_allclose(matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12)

    def test_projector_is_fixed(self, plus):
        np.testing.assert_allclose(matrix_sqrt(plus.matrix), plus.matrix, atol=1e-12)

    def test_square_recovers_input(self, rng):
        rho = random_density_matrix(4, rng)
        root = matrix_sqrt(rho.matrix)
        np.testing.assert_allclose(root @ root, rho.matrix, atol=1e-12)

    def test_rejects_negative_spectrum(self):
        with pytest.raises(NotPSDError):
            matrix_sqrt(np.diag([1.0, -0.1]))


class TestFidelity:
    """Uhlmann fidelity"""

    def test_identical_states(self, rng):
        rho = random_density_matrix(3, rng)
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_states(self):
        assert fidelity(DensityMatrix.from_pure([1, 0]), DensityMatrix.from_pure([0, 1])) == pytest.approx(0.0, abs=1e-12)

    def test_plus_against_mixed(self, plus):
        assert fidelity(plus, DensityMatrix.maximally_mixed(2)) == pytest.approx(0.5, abs=1e-12)

    def test_pure_overlap(self, rng):
        psi, phi = random_pure_state(3, rng), random_pure_state(3, rng)
        expected = abs(np.vdot(psi, phi)) ** 2
        assert fidelity(DensityMatrix.from_pure(psi), DensityMatrix.from_pure(phi)) == pytest.approx(expected, abs=1e-10)

    def test_symmetric_and_bounded(self, rng):
        for _ in range(20):
            rho, sigma = random_density_matrix(3, rng), random_density_matrix(3, rng, rank=2)
            f = fidelity(rho, sigma)
            assert 0.0 <= f <= 1.0
            assert f == pytest.approx(fidelity(sigma, rho), abs=1e-9)

    def test_symmetric_against_pure_states(self, rng):
        worst = 0.0
        for _ in range(200):
            rho, sigma = random_density_matrix(4, rng), random_density_matrix(4, rng, rank=1)
            worst = max(worst, abs(fidelity(rho, sigma) - fidelity(sigma, rho)))
        assert worst <= 1e-9

    def test_isometry_invariance(self, rng):
        rho, sigma = random_density_matrix(3, rng), random_density_matrix(3, rng)
        v = random_isometry(5, 3, rng)
        assert fidelity(rho.conjugate_by(v), sigma.conjugate_by(v)) == pytest.approx(fidelity(rho, sigma), abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            fidelity(DensityMatrix.maximally_mixed(2), DensityMatrix.maximally_mixed(3))


def test_trace_norm():
    assert trace_norm(PAULI_Z) == pytest.approx(2.0)
    assert trace_norm(PAULI_Y) == pytest.approx(2.0)
    assert trace_norm(np.zeros((3, 3))) == 0.0
    assert trace_norm(np.diag([0.5, -0.25])) == pytest.approx(0.75)


class TestPartialTrace:
    """Partial traces over tensor factors"""

    def test_product_state(self, rng):
        a, b = random_density_matrix(2, rng), random_density_matrix(3, rng)
        joint = a.tensor(b)
        np.testing.assert_allclose(partial_trace(joint, 0, (2, 3)).matrix, a.matrix, atol=1e-12)
        np.testing.assert_allclose(partial_trace(joint, 1, (2, 3)).matrix, b.matrix, atol=1e-12)

    def test_bell_state_marginal(self):
        bell = DensityMatrix.from_pure(np.array([1, 0, 0, 1]) / np.sqrt(2))
        np.testing.assert_allclose(partial_trace(bell, 0, (2, 2)).matrix, np.eye(2) / 2, atol=1e-12)

    def test_three_parties(self, rng):
        a, b, c = (random_density_matrix(d, rng) for d in (2, 3, 2))
        joint = a.tensor(b).tensor(c)
        np.testing.assert_allclose(partial_trace(joint, (0, 2), (2, 3, 2)).matrix, kron(a.matrix, c.matrix), atol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            partial_trace(random_density_matrix(4, rng), 0, (2, 3))


class TestPurify:
    """Canonical purifications"""

    def test_pure_state(self):
        psi = purify(DensityMatrix.from_pure([1, 0]))
        np.testing.assert_allclose(np.abs(psi.amplitudes), [1, 0, 0, 0], atol=1e-12)

    def test_maximally_mixed_schmidt_coefficients(self):
        psi = purify(DensityMatrix.maximally_mixed(2))
        np.testing.assert_allclose(np.linalg.svd(psi.coefficients(), compute_uv=False), [np.sqrt(0.5)] * 2, atol=1e-12)

    def test_diagonal_schmidt_coefficients(self):
        psi = purify(DensityMatrix.from_diagonal([0.75, 0.25]))
        np.testing.assert_allclose(
            np.linalg.svd(psi.coefficients(), compute_uv=False), [np.sqrt(0.75), np.sqrt(0.25)], atol=1e-12
        )

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_marginal_recovers_state(self, dim, rng):
        rho = random_density_matrix(dim, rng)
        psi = purify(rho)
        np.testing.assert_allclose(partial_trace(psi.density_matrix(), 0, (dim, psi.dim_e)).matrix, rho.matrix, atol=1e-10)

    def test_trim_drops_null_space(self, rng):
        rho = random_density_matrix(4, rng, rank=2)
        psi = purify(rho, trim=True)
        assert psi.dim_e == 2
        np.testing.assert_allclose(psi.reduced_state(0).matrix, rho.matrix, atol=1e-10)

    def test_environment_isometry_keeps_marginal(self, rng):
        rho = random_density_matrix(3, rng)
        psi = purify(rho).apply_environment_isometry(random_isometry(5, 3, rng))
        assert psi.dim_e == 5
        np.testing.assert_allclose(psi.reduced_state(0).matrix, rho.matrix, atol=1e-10)


def test_maximally_coherent_state_is_pure():
    rho = maximally_coherent_state(3)
    np.testing.assert_allclose(rho.matrix @ rho.matrix, rho.matrix, atol=1e-12)
    np.testing.assert_allclose(np.diag(rho.matrix).real, [1 / 3] * 3, atol=1e-12)
