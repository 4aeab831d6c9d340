import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qpmp.errors import DomainError, NumericalError, UnsupportedCaseError
from qpmp.quantum import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    check_density,
    commutator,
    density_from_ensemble,
    fidelity,
    fidelity_gradient,
    finite_difference_gradient,
    from_bloch,
    matrix_exp,
    projector,
    purity,
    qubit_from_angles,
    random_density_matrix,
    random_unitary,
    sqrt_psd,
    sqrt_psd_2x2,
    to_bloch,
)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
P0 = projector(KET0)
P1 = projector(KET1)


def reference_fidelity(rho, sigma):
    """Textbook route through principal square roots, independent of the eigenvalue shortcut."""
    r = scipy.linalg.sqrtm(rho)
    return float(np.real(np.trace(scipy.linalg.sqrtm(r @ sigma @ r))) ** 2)


def taylor_exp(a, terms=60):
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


class TestQubitStates:
    @pytest.mark.parametrize("theta, phi, expected", [
        (0.0, 0.0, [1, 0]),
        (math.pi, 0.0, [0, 1]),
        (math.pi / 2, 0.0, [1 / math.sqrt(2), 1 / math.sqrt(2)]),
    ])
    def test_qubit_from_angles(self, theta, phi, expected):
        np.testing.assert_allclose(qubit_from_angles(theta, phi), expected, atol=1e-15)

    @pytest.mark.parametrize("theta, phi", [(-0.1, 0), (3.2, 0), (1.0, -0.5), (1.0, 6.3)])
    def test_qubit_from_angles_rejects_out_of_range(self, theta, phi):
        with pytest.raises(DomainError):
            qubit_from_angles(theta, phi)

    @given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
    def test_qubit_has_unit_norm(self, theta, phi):
        assert abs(np.linalg.norm(qubit_from_angles(theta, phi)) - 1) <= 1e-12


class TestDensityFromEnsemble:
    def test_single_pure_state(self):
        np.testing.assert_allclose(density_from_ensemble([1], [KET0]), [[1, 0], [0, 0]])

    def test_maximally_mixed(self):
        np.testing.assert_allclose(density_from_ensemble([0.5, 0.5], [KET0, KET1]), np.eye(2) / 2)

    def test_mixture_with_superposition(self):
        plus = (KET0 + KET1) / math.sqrt(2)
        rho = density_from_ensemble([0.5, 0.5], [KET0, plus])
        # 0.5 |0><0| + 0.5 |+><+|, entry by entry
        np.testing.assert_allclose(rho, [[0.75, 0.25], [0.25, 0.25]], atol=1e-15)

    def test_weight_sum_violation(self):
        with pytest.raises(DomainError, match="sum"):
            density_from_ensemble([0.5, 0.6], [KET0, KET1])

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            density_from_ensemble([0.5, 0.5], [KET0, np.array([1, 0, 0])])

    def test_check_density_lists_violations(self):
        with pytest.raises(DomainError, match="trace"):
            check_density(np.eye(2))
        with pytest.raises(DomainError, match="Hermitian"):
            check_density([[0.5, 1], [0, 0.5]])
        with pytest.raises(DomainError, match="semidefinite"):
            check_density([[1.5, 0], [0, -0.5]])


class TestBloch:
    def test_examples(self):
        np.testing.assert_allclose(to_bloch(np.eye(2) / 2), [0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(to_bloch(P0), [0, 0, 1], atol=1e-15)
        np.testing.assert_allclose(from_bloch([1, 0, 0]), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_errors(self):
        with pytest.raises(DomainError):
            to_bloch(np.eye(3) / 3)
        with pytest.raises(DomainError):
            from_bloch([1, 1, 0])

    @settings(max_examples=200)
    @given(st.floats(0, 1), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
    def test_roundtrip_and_purity(self, r, theta, phi):
        vec = r * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
        rho = from_bloch(vec)
        check_density(rho)
        np.testing.assert_allclose(from_bloch(to_bloch(rho)), rho, atol=1e-12)
        assert abs(purity(rho) - (1 + np.dot(vec, vec)) / 2) <= 1e-10


class TestCommutator:
    def test_pauli_algebra(self):
        np.testing.assert_allclose(commutator(SIGMA_X, SIGMA_Y), 2j * SIGMA_Z)
        np.testing.assert_allclose(commutator(SIGMA_Z, SIGMA_X), 2j * SIGMA_Y)

    def test_self_commutation(self, rng):
        h = random_density_matrix(3, rng)
        np.testing.assert_allclose(commutator(h, h), 0, atol=1e-15)

    def test_traceless(self, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert abs(np.trace(commutator(a, b))) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            commutator(np.eye(2), np.eye(3))


class TestMatrixExp:
    def test_zero(self):
        np.testing.assert_allclose(matrix_exp(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        theta = 0.7
        np.testing.assert_allclose(matrix_exp(1j * theta * SIGMA_Z),
                                   np.diag([np.exp(1j * theta), np.exp(-1j * theta)]), atol=1e-15)

    def test_rotation_against_taylor_series(self):
        a = 1j * (math.pi / 2) * SIGMA_X
        series = taylor_exp(a)
        # cos(theta) I + i sin(theta) sigma_x at theta = pi/2
        np.testing.assert_allclose(series, 1j * SIGMA_X, atol=1e-14)
        np.testing.assert_allclose(matrix_exp(a), series, atol=1e-14)

    def test_skew_hermitian_gives_unitary(self, rng):
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        u = matrix_exp(-1j * h)
        assert np.linalg.norm(u @ u.conj().T - np.eye(4)) <= 1e-10


class TestSqrtPsd:
    @pytest.mark.parametrize("a, root", [
        (np.eye(2), np.eye(2)),
        (np.diag([4.0, 9.0]), np.diag([2.0, 3.0])),
        (np.full((2, 2), 0.5), np.full((2, 2), 0.5)),
    ])
    def test_examples(self, a, root):
        np.testing.assert_allclose(sqrt_psd(a), root, atol=1e-14)
        np.testing.assert_allclose(sqrt_psd_2x2(a), root, atol=1e-14)

    def test_rejects_non_hermitian(self):
        with pytest.raises(DomainError):
            sqrt_psd([[1, 1], [0, 1]])

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            sqrt_psd(np.diag([1.0, -1e-6]))

    def test_clips_roundoff_negatives(self):
        root = sqrt_psd(np.diag([1.0, -1e-12]))
        np.testing.assert_allclose(root, np.diag([1.0, 0.0]))

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_square_recovers_input(self, rng, dim):
        for _ in range(50):
            a = random_density_matrix(dim, rng) * rng.uniform(0.1, 5)
            s = sqrt_psd(a)
            assert np.linalg.norm(s @ s - a) <= 1e-10
            assert np.linalg.eigvalsh(s)[0] >= -1e-12

    def test_cayley_hamilton_matches_eigendecomposition(self, rng):
        for _ in range(100):
            a = random_density_matrix(2, rng, rank=int(rng.integers(1, 3)))
            np.testing.assert_allclose(sqrt_psd_2x2(a), sqrt_psd(a), atol=1e-7)
            assert np.linalg.norm(sqrt_psd_2x2(a) @ sqrt_psd_2x2(a) - a) <= 1e-10


class TestFidelity:
    def test_examples(self):
        assert fidelity(P0, P0) == pytest.approx(1, abs=1e-15)
        assert fidelity(P0, P1) == pytest.approx(0, abs=1e-15)
        assert fidelity(np.eye(2) / 2, P0) == pytest.approx(0.5, abs=1e-15)

    def test_commuting_closed_form(self):
        rho = np.diag([0.75, 0.25])
        sigma = np.diag([0.25, 0.75])
        closed = (math.sqrt(0.75 * 0.25) + math.sqrt(0.25 * 0.75)) ** 2
        assert closed == pytest.approx(0.75, abs=1e-15)
        assert reference_fidelity(rho, sigma) == pytest.approx(closed, abs=1e-12)
        assert fidelity(rho, sigma) == pytest.approx(closed, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            fidelity(P0, np.eye(3) / 3)

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_matches_square_root_route(self, rng, dim):
        for _ in range(50):
            rho = random_density_matrix(dim, rng)
            sigma = random_density_matrix(dim, rng)
            assert fidelity(rho, sigma) == pytest.approx(reference_fidelity(rho, sigma), abs=1e-9)

    @pytest.mark.parametrize("dim", [2, 4])
    def test_properties(self, random_pairs, dim):
        gen = np.random.default_rng(dim)
        for rho, sigma in random_pairs(dim):
            f = fidelity(rho, sigma)
            assert abs(f - fidelity(sigma, rho)) <= 1e-9
            assert 0 <= f <= 1 + 1e-12
            assert fidelity(rho, rho) >= 1 - 1e-9
            u = random_unitary(dim, gen)
            assert abs(fidelity(u @ rho @ u.conj().T, u @ sigma @ u.conj().T) - f) <= 1e-9
            pure = projector(qubit_like(dim, gen))
            assert abs(fidelity(rho, pure) - np.real(np.trace(rho @ pure))) <= 1e-9


def qubit_like(dim, gen):
    v = gen.normal(size=dim) + 1j * gen.normal(size=dim)
    return v / np.linalg.norm(v)


class TestFidelityGradient:
    def test_pure_target_returns_target(self, rng):
        rho = random_density_matrix(2, rng)
        np.testing.assert_array_equal(fidelity_gradient(rho, P1), P1)
        np.testing.assert_array_equal(fidelity_gradient(P0, P0), P0)

    def test_pure_target_any_dimension(self, rng):
        psi = qubit_like(4, rng)
        sigma = projector(psi)
        g = fidelity_gradient(random_density_matrix(4, rng), sigma)
        np.testing.assert_allclose(g, sigma)

    def test_mixed_diagonal_instance(self):
        rho = np.diag([0.6, 0.4]).astype(complex)
        sigma = np.diag([0.3, 0.7]).astype(complex)
        fd = finite_difference_gradient(lambda r: reference_fidelity(r, sigma), rho, 1e-6)
        g = fidelity_gradient(rho, sigma)
        np.testing.assert_allclose(g, fd, atol=1e-6)
        # closed form: d/dp of (sqrt(p q) + sqrt((1-p)(1-q)))^2 along the diagonal
        np.testing.assert_allclose(np.diag(g).real,
                                   [0.3 + math.sqrt(0.3 * 0.7 / (0.6 * 0.4)) * 0.4,
                                    0.7 + math.sqrt(0.3 * 0.7 / (0.6 * 0.4)) * 0.6], atol=1e-12)

    def test_mixed_random_pairs(self, random_pairs):
        for rho, sigma in random_pairs(2, 50):
            g = fidelity_gradient(rho, sigma)
            fd = finite_difference_gradient(lambda r: reference_fidelity(r, sigma), rho, 1e-6)
            assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)
            assert np.linalg.norm(g - g.conj().T) <= 1e-12

    def test_unsupported_dimension(self, rng):
        with pytest.raises(UnsupportedCaseError):
            fidelity_gradient(random_density_matrix(3, rng), random_density_matrix(3, rng))

    def test_singular_rho_with_mixed_target(self):
        with pytest.raises(NumericalError):
            fidelity_gradient(P0, np.eye(2) / 2)
