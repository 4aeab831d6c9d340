"""Liouville-von Neumann propagation of states and costates on a uniform grid.

The horizon is fixed to [0, 1]. A step on [t_k, t_{k+1}] uses the
Hamiltonian sampled at the left endpoint t_k. Trajectories are returned as
arrays of shape ``(N + 1, n, n)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .quantum import as_matrix, check_density, commutator, dagger, hermitian_exp, is_hermitian


class PropagatorKind(str, enum.Enum):
    EULER = "euler"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k/N, k = 0..N-1, with step 1/N."""

    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self):
        return 1.0 / self.n_steps

    @property
    def points(self):
        """Left endpoints t_0..t_{N-1}."""
        return np.arange(self.n_steps) / self.n_steps

    @property
    def nodes(self):
        """All N + 1 nodes including t_N = 1."""
        return np.arange(self.n_steps + 1) / self.n_steps


def liouville_rhs(h, rho):
    """-i [H, rho]."""
    h = np.asarray(h, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if h.shape[-2:] != rho.shape[-2:]:
        raise DomainError(f"dimension mismatch: {h.shape} vs {rho.shape}")
    return -1j * commutator(h, rho)


def step_euler(x, rhs, dt):
    return np.asarray(x) + dt * np.asarray(rhs)


def euler_step_size(k, n_steps, literal=False):
    """Step length for update k.

    ``literal=True`` uses the factor 1/k, which is undefined
    at k = 0; the default is the grid step 1/N.
    """
    if not literal:
        return 1.0 / n_steps
    if k < 1:
        raise DomainError("the literal 1/k step factor is undefined at k = 0")
    return 1.0 / k


def step_unitaries(hs, dt):
    """exp(-i H_k dt) for a stack of Hermitian H_k."""
    return hermitian_exp(np.asarray(hs, dtype=complex), -1j * dt)


def step_exponential(h, rho, dt):
    """U rho U^dag with U = exp(-i H dt)."""
    h = as_matrix(h, "h")
    if not is_hermitian(h, 1e-10):
        raise DomainError("step_exponential needs a Hermitian Hamiltonian")
    rho = as_matrix(rho, "rho")
    u = step_unitaries(h, dt)
    return u @ rho @ dagger(u)


def sample_hamiltonians(hamiltonian, grid):
    """Hamiltonians at the left endpoints, shape ``(N, n, n)``.

    ``hamiltonian`` is either a callable t -> H(t) or an already sampled stack.
    """
    if callable(hamiltonian):
        hs = np.array([hamiltonian(t) for t in grid.points], dtype=complex)
    else:
        hs = np.asarray(hamiltonian, dtype=complex)
    if hs.ndim != 3 or hs.shape[0] != grid.n_steps:
        raise DomainError(f"expected {grid.n_steps} sampled Hamiltonians, got shape {hs.shape}")
    return hs


def _check_finite(traj, stage):
    bad = ~np.all(np.isfinite(traj), axis=(1, 2))
    if bad.any():
        raise NumericalError("trajectory became non-finite", stage=stage, step=int(np.argmax(bad)))


def _forward(hs, x0, dt, kind):
    kind = PropagatorKind(kind)
    traj = np.empty((hs.shape[0] + 1,) + x0.shape, dtype=complex)
    traj[0] = x0
    # non-finite values are reported by _check_finite with their step index
    with np.errstate(invalid="ignore", over="ignore"):
        if kind is PropagatorKind.EXPONENTIAL:
            us = step_unitaries(hs, dt)
            for k, u in enumerate(us):
                traj[k + 1] = u @ traj[k] @ dagger(u)
        else:
            for k, h in enumerate(hs):
                traj[k + 1] = traj[k] + dt * liouville_rhs(h, traj[k])
    return traj


def propagate(hamiltonian, rho0, grid, kind=PropagatorKind.EXPONENTIAL):
    """State trajectory rho_0..rho_N under drho/dt = -i[H(t), rho]."""
    rho0 = check_density(rho0, "rho0")
    hs = sample_hamiltonians(hamiltonian, grid)
    traj = _forward(hs, rho0, grid.dt, kind)
    _check_finite(traj, "state")
    return traj


def propagate_costate(hamiltonian, pi_final, grid, kind=PropagatorKind.EXPONENTIAL,
                      scheme="backward", ordered=True):
    """Costate trajectory pi_0..pi_N for dpi/dt = -i[H(t), pi], pi_N = ``pi_final``.

    ``scheme="backward"`` integrates from t = 1 down to t = 0. ``scheme="forward"``
    first maps ``pi_final`` to t = 0 with the discretized formal solution
    pi_0 = W^dag pi_N W and then steps forward with the chosen stepper. ``W``
    is the time-ordered product of step propagators, or with
    ``ordered=False`` the single exponential exp(-i sum_k H_k dt) that
    ignores time ordering.
    """
    pi_final = as_matrix(pi_final, "pi_final")
    if not is_hermitian(pi_final, 1e-10):
        raise DomainError("terminal costate must be Hermitian")
    hs = sample_hamiltonians(hamiltonian, grid)
    dt = grid.dt
    kind = PropagatorKind(kind)
    if scheme == "forward":
        if ordered:
            w = np.eye(pi_final.shape[0], dtype=complex)
            for u in step_unitaries(hs, dt):
                w = u @ w
        else:
            w = step_unitaries(hs.sum(axis=0), dt)
        pi0 = dagger(w) @ pi_final @ w
        traj = _forward(hs, pi0, dt, kind)
    elif scheme == "backward":
        n = hs.shape[0]
        traj = np.empty((n + 1,) + pi_final.shape, dtype=complex)
        traj[n] = pi_final
        if kind is PropagatorKind.EXPONENTIAL:
            us = step_unitaries(hs, dt)
            for k in range(n - 1, -1, -1):
                traj[k] = dagger(us[k]) @ traj[k + 1] @ us[k]
        else:
            for k in range(n - 1, -1, -1):
                traj[k] = traj[k + 1] - dt * liouville_rhs(hs[k], traj[k + 1])
    else:
        raise DomainError(f"unknown costate scheme {scheme!r}")
    _check_finite(traj, "costate")
    return traj
