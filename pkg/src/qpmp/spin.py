"""Spin-1/2 particle in a static z-field driven by a rotating transverse field.

Solver units: Larmor frequency omega0 = 1 and horizon T = 1, so the Rabi
amplitude ``u`` is measured in multiples of omega0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .quantum import SIGMA_X, SIGMA_Y, SIGMA_Z

_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def pauli(axis):
    """Pauli matrix for ``axis`` in {'x', 'y', 'z'}."""
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise DomainError(f"unknown Pauli axis {axis!r}") from None


@dataclass(frozen=True)
class SpinParams:
    """Larmor frequency ``omega0`` (rad/time) and gyromagnetic ratio.

    ``gyromag`` only converts field strengths into frequencies; the
    dynamics use ``omega0`` directly.
    """

    omega0: float = 1.0
    gyromag: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.omega0) or not np.isfinite(self.gyromag):
            raise DomainError("spin parameters must be finite")

    @classmethod
    def from_field(cls, b0, gyromag):
        return cls(omega0=gyromag * b0, gyromag=gyromag)


def spin_hamiltonian(u, omega, phi, t, params=SpinParams()):
    """H = -1/2 [[omega0, u e^{i(wt+phi)}], [u e^{-i(wt+phi)}, -omega0]].

    All scalar arguments broadcast; the result has shape ``(..., 2, 2)``.
    """
    u, omega, phi, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (u, omega, phi, t)))
    phase = np.exp(1j * (omega * t + phi))
    h = np.empty(u.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = -0.5 * params.omega0
    h[..., 1, 1] = 0.5 * params.omega0
    h[..., 0, 1] = -0.5 * u * phase
    h[..., 1, 0] = -0.5 * u * np.conj(phase)
    return h


def transverse_field(u, omega, phi, t):
    """(gamma B_x, gamma B_y) of the rotating drive."""
    theta = np.asarray(omega) * np.asarray(t) + np.asarray(phi)
    return u * np.cos(theta), -u * np.sin(theta)


@dataclass(frozen=True)
class SpinModel:
    """Control model H(u, omega, phi, t) for the driven spin.

    Any object with the same ``hamiltonian`` and ``dh_du`` methods can be
    handed to the solvers in place of this one.
    """

    params: SpinParams = SpinParams()

    @property
    def dim(self):
        return 2

    def hamiltonian(self, u, omega, phi, t):
        return spin_hamiltonian(u, omega, phi, t, self.params)

    def dh_du(self, omega, phi, t):
        """Derivative of H with respect to the amplitude ``u``."""
        return spin_hamiltonian(1.0, omega, phi, t, SpinParams(0.0, self.params.gyromag))

    def drift(self):
        return -0.5 * self.params.omega0 * SIGMA_Z


class TransferProblem(NamedTuple):
    rho0: np.ndarray
    sigma: np.ndarray


def transfer_problem():
    """|0> -> |1> population transfer as density matrices."""
    rho0 = np.array([[1, 0], [0, 0]], dtype=complex)
    sigma = np.array([[0, 0], [0, 1]], dtype=complex)
    return TransferProblem(rho0, sigma)
