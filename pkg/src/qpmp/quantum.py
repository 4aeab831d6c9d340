"""Quantum states, matrix functions and the Uhlmann-Jozsa fidelity.

Matrices are plain complex ``numpy`` arrays. Functions never modify their
arguments and always return fresh arrays. Units follow hbar = 1.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalError, UnsupportedCaseError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
PURITY_TOL = 1e-10

# eigenvalues of rho @ sigma at or below this (relative) level are round-off
_ZERO_EIG = 1e-14

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite square complex array."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DomainError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} has non-finite entries")
    return m


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a, tol=HERMITIAN_TOL):
    return bool(np.linalg.norm(a - dagger(a)) <= tol)


def purity(rho):
    """tr(rho^2), real."""
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


def density_violations(rho):
    """List the density-matrix invariants that ``rho`` violates."""
    problems = []
    herm = np.linalg.norm(rho - dagger(rho))
    if herm > HERMITIAN_TOL:
        problems.append(f"not Hermitian (|rho - rho^dag|_F = {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        problems.append(f"trace is {tr.real:.12g}{tr.imag:+.3g}j, not 1")
    if herm <= 1e-8:
        lam_min = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0]
        if lam_min < -PSD_TOL:
            problems.append(f"not positive semidefinite (min eigenvalue {lam_min:.3g})")
    p = purity(rho)
    if p > 1 + PURITY_TOL:
        problems.append(f"purity tr(rho^2) = {p:.12g} exceeds 1")
    return problems


def check_density(rho, name="rho"):
    """Validate and return ``rho`` as a density matrix.

    Raises:
        DomainError: listing every violated invariant.
    """
    m = as_matrix(rho, name)
    problems = density_violations(m)
    if problems:
        raise DomainError(f"{name} is not a density matrix: " + "; ".join(problems))
    return m


def qubit_from_angles(theta, phi):
    """Pure qubit state cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
    if not 0.0 <= theta <= np.pi:
        raise DomainError(f"theta must lie in [0, pi], got {theta}")
    if not 0.0 <= phi <= 2 * np.pi:
        raise DomainError(f"phi must lie in [0, 2pi], got {phi}")
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)


def density_from_ensemble(weights, states):
    """Mixture sum_j p_j |psi_j><psi_j| of pure states."""
    weights = np.asarray(weights, dtype=float)
    vecs = [np.asarray(s, dtype=complex) for s in states]
    if weights.ndim != 1 or len(vecs) != weights.size or weights.size == 0:
        raise DomainError("need one weight per state and at least one state")
    if np.any(weights < 0):
        raise DomainError("weights must be nonnegative")
    if abs(weights.sum() - 1) > 1e-12:
        raise DomainError(f"weights sum to {weights.sum():.15g}, not 1")
    dim = vecs[0].shape
    for v in vecs:
        if v.ndim != 1 or v.shape != dim:
            raise DomainError("all states must be vectors of the same dimension")
        if abs(np.linalg.norm(v) - 1) > 1e-12:
            raise DomainError("states must have unit norm")
    rho = sum(p * np.outer(v, v.conj()) for p, v in zip(weights, vecs))
    return check_density(rho)


def projector(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def to_bloch(rho):
    """Bloch vector (tr(rho sx), tr(rho sy), tr(rho sz)) of a qubit density matrix."""
    rho = as_matrix(rho, "rho")
    if rho.shape != (2, 2):
        raise DomainError(f"Bloch coordinates need a 2x2 matrix, got {rho.shape}")
    return np.array([np.real(np.trace(rho @ s)) for s in PAULI])


def from_bloch(r):
    """Density matrix (I + r.sigma)/2."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise DomainError("Bloch vector must have three components")
    if np.linalg.norm(r) > 1 + 1e-12:
        raise DomainError(f"Bloch vector norm {np.linalg.norm(r):.15g} exceeds 1")
    return 0.5 * (np.eye(2, dtype=complex) + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z)


def commutator(a, b):
    """[A, B] = AB - BA (broadcasts over leading axes)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise DomainError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def matrix_exp(a):
    """Matrix exponential (scaling and squaring Pade)."""
    return scipy.linalg.expm(as_matrix(a, "a"))


def hermitian_exp(h, scale):
    """exp(scale * H) for Hermitian ``h``, batched over leading axes.

    ``scale`` is typically ``-1j * dt``; the eigendecomposition keeps the
    result unitary to round-off when ``scale`` is imaginary.
    """
    lam, vec = np.linalg.eigh(h)
    return (vec * np.exp(scale * lam)[..., None, :]) @ dagger(vec)


def sqrt_psd(a):
    """Principal square root of a Hermitian positive semidefinite matrix.

    Eigenvalues in [-1e-10, 0) are treated as round-off and set to zero.
    """
    a = as_matrix(a, "a")
    if not is_hermitian(a, 1e-10):
        raise DomainError("sqrt_psd needs a Hermitian matrix")
    lam, vec = np.linalg.eigh(0.5 * (a + dagger(a)))
    if lam[0] < -PSD_TOL:
        raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {lam[0]:.3g})")
    root = (vec * np.sqrt(np.clip(lam, 0.0, None))) @ dagger(vec)
    return 0.5 * (root + dagger(root))


def sqrt_psd_2x2(a):
    """Closed-form square root of a 2x2 PSD matrix via Cayley-Hamilton.

    For 2x2 ``A`` with ``s = sqrt(det A)``, ``sqrt(A) = (A + s I) / sqrt(tr A + 2 s)``.
    """
    a = as_matrix(a, "a")
    if a.shape != (2, 2):
        raise DomainError("sqrt_psd_2x2 needs a 2x2 matrix")
    if not is_hermitian(a, 1e-10):
        raise DomainError("sqrt_psd_2x2 needs a Hermitian matrix")
    det = np.real(np.linalg.det(a))
    s = np.sqrt(max(det, 0.0))
    t = np.real(np.trace(a)) + 2 * s
    if t < -PSD_TOL or det < -PSD_TOL:
        raise DomainError("matrix is not positive semidefinite")
    if t <= 0:
        return np.zeros((2, 2), dtype=complex)
    return (a + s * np.eye(2)) / np.sqrt(t)


def _fidelity(rho, sigma):
    lam = np.real(np.linalg.eigvals(rho @ sigma))
    if lam.min() < -PSD_TOL:
        raise NumericalError(f"rho @ sigma has eigenvalue {lam.min():.3g} < 0")
    scale = max(1.0, float(np.abs(lam).max()))
    lam = np.where(lam <= _ZERO_EIG * scale, 0.0, lam)
    return float(np.sum(np.sqrt(lam)) ** 2)


def fidelity(rho, sigma, *, check=True):
    """Uhlmann-Jozsa fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Evaluated as ``(sum_i sqrt(lambda_i))**2`` over the eigenvalues of
    ``rho @ sigma``, which coincide with those of ``sqrt(rho) sigma sqrt(rho)``.

    With ``check=False`` the arguments only need to be PSD, which lets
    finite-difference probes step off the unit-trace surface.
    """
    if check:
        rho = check_density(rho, "rho")
        sigma = check_density(sigma, "sigma")
    else:
        rho = as_matrix(rho, "rho")
        sigma = as_matrix(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise DomainError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    return _fidelity(rho, sigma)


def is_pure(rho, tol=PURITY_TOL):
    return abs(purity(rho) - 1.0) <= tol


def fidelity_gradient(rho, sigma):
    """Gradient G of rho -> F(rho, sigma), in the sense dF = tr(G drho).

    For a pure target F = tr(rho sigma) and G = sigma exactly. For a mixed
    2x2 target, ``F = tr(rho sigma) + 2 sqrt(det rho det sigma)`` and

        G = sigma + sqrt(det sigma / det rho) (tr(rho) I - rho).

    Raises:
        UnsupportedCaseError: mixed target with dimension above 2.
        NumericalError: mixed target with a singular ``rho``, where the
            gradient does not exist.
    """
    rho = as_matrix(rho, "rho")
    sigma = as_matrix(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise DomainError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    if is_pure(sigma):
        return sigma.copy()
    if rho.shape != (2, 2):
        raise UnsupportedCaseError(
            f"fidelity gradient for a mixed target is only available for 2x2 matrices, got {rho.shape}"
        )
    det_rho = np.real(np.linalg.det(rho))
    det_sigma = np.real(np.linalg.det(sigma))
    if det_rho <= 1e-14:
        raise NumericalError("fidelity gradient is unbounded: rho is singular and the target is mixed")
    adj = np.real(np.trace(rho)) * np.eye(2) - rho
    g = sigma + np.sqrt(max(det_sigma, 0.0) / det_rho) * adj
    return 0.5 * (g + dagger(g))


def hermitian_basis(dim):
    """Orthogonal basis of the real vector space of dim x dim Hermitian matrices."""
    basis = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1
        basis.append(e)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = e[j, i] = 1
            basis.append(e)
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = -1j
            e[j, i] = 1j
            basis.append(e)
    return basis


def finite_difference_gradient(func, rho, step=1e-6):
    """Central-difference gradient of a real function of a Hermitian matrix.

    Returns the Hermitian ``G`` with ``func(rho + t E) ~ func(rho) + t tr(G E)``
    for every Hermitian direction ``E``.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    g = np.zeros((dim, dim), dtype=complex)
    for e in hermitian_basis(dim):
        d = (func(rho + step * e) - func(rho - step * e)) / (2 * step)
        # tr(G E) = d and <E, E> = tr(E E) give the coefficient of E
        g += d * e / np.real(np.trace(e @ e))
    return g


def random_pure_state(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim, rng, rank=None):
    """Mixture of ``rank`` (default ``dim``) random pure states with uniform simplex weights."""
    k = dim if rank is None else rank
    weights = rng.dirichlet(np.ones(k))
    rho = sum(p * projector(random_pure_state(dim, rng)) for p in weights)
    rho = 0.5 * (rho + dagger(rho))
    return rho / np.real(np.trace(rho))


def random_unitary(dim, rng):
    """Haar-random unitary from the QR decomposition of a complex Gaussian matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
