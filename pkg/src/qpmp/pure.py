"""Pure-state reference solver based on the Lagrangian optimality system.

Minimizes

    J = 1/2 |psi(T) - psi_f|^2 + gamma/2 |u|^2_{L2} + 1/2 sum_j alpha_j |psi_j|^2_{L2}

subject to i dpsi/dt = (H_d + u H_c) psi with a real control ``u``. The
costate satisfies dp/dt = -i H p + i q with q_j = alpha_j psi_j and
p(T) = -i (psi(T) - psi_f), and a stationary control obeys

    u = Re[p . (H_c psi)^*] / gamma.

The sweep relaxes ``u`` toward the right-hand side; a relaxation that
raises the cost is rejected and the factor halved.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TimeGrid, step_unitaries
from .errors import DomainError, NumericalError
from .quantum import as_matrix, dagger, is_hermitian

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostWeights:
    """``gamma_reg`` weighs control effort; ``alpha`` penalizes level populations."""

    gamma_reg: float = 1e-3
    alpha: tuple | None = None

    def __post_init__(self):
        if not self.gamma_reg > 0:
            raise DomainError("gamma_reg must be positive")
        if self.alpha is not None:
            alpha = tuple(float(a) for a in self.alpha)
            if any(a < 0 for a in alpha):
                raise DomainError("alpha weights must be nonnegative")
            object.__setattr__(self, "alpha", alpha)

    def alpha_array(self, dim):
        if self.alpha is None:
            return np.zeros(dim)
        if len(self.alpha) != dim:
            raise DomainError(f"need {dim} alpha weights, got {len(self.alpha)}")
        return np.asarray(self.alpha)


@dataclass(frozen=True)
class PureProblem:
    """Steer ``psi0`` to ``psi_target`` with H(t) = ``drift`` + u(t) ``control``.

    ``control`` is a fixed matrix or a callable t -> matrix.
    """

    drift: np.ndarray
    control: object
    psi0: np.ndarray
    psi_target: np.ndarray

    def __post_init__(self):
        drift = as_matrix(self.drift, "drift")
        if not is_hermitian(drift, 1e-10):
            raise DomainError("drift Hamiltonian must be Hermitian")
        psi0 = np.asarray(self.psi0, dtype=complex)
        target = np.asarray(self.psi_target, dtype=complex)
        for name, v in (("psi0", psi0), ("psi_target", target)):
            if v.shape != (drift.shape[0],):
                raise DomainError(f"{name} must be a vector of length {drift.shape[0]}")
            if abs(np.linalg.norm(v) - 1) > 1e-12:
                raise DomainError(f"{name} must have unit norm")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "psi0", psi0)
        object.__setattr__(self, "psi_target", target)

    def control_at(self, ts):
        """Control Hamiltonians at the times ``ts``, shape ``(len(ts), n, n)``."""
        if callable(self.control):
            return np.array([self.control(t) for t in ts], dtype=complex)
        c = as_matrix(self.control, "control")
        return np.broadcast_to(c, (len(ts),) + c.shape)


@dataclass(frozen=True)
class PureConfig:
    n_steps: int = 100
    eps_u: float = 1e-4
    max_iterations: int = 5000
    relaxation: float = 0.3
    init_u: object = 1.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError("n_steps must be a positive integer")
        if not self.eps_u > 0:
            raise DomainError("eps_u must be positive")
        if not 0 < self.relaxation <= 1:
            raise DomainError("relaxation must lie in (0, 1]")


@dataclass
class PureResult:
    u: np.ndarray
    states: np.ndarray
    costates: np.ndarray
    final_state: np.ndarray
    cost_history: list
    fidelity: float
    iterations: int
    converged: bool
    residual: float
    relaxation_history: list = field(default_factory=list)
    relaxation_halvings: int = 0


def schrodinger_rhs(h, psi):
    """-i H psi."""
    h = np.asarray(h, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if h.shape[-1] != psi.shape[-1]:
        raise DomainError(f"dimension mismatch: {h.shape} vs {psi.shape}")
    return -1j * (h @ psi)


def cost_functional(psi_trajectory, u, psi_target, weights, grid):
    """Discretized cost with rectangle-rule L2 norms on the grid.

    ``psi_trajectory`` holds psi_0..psi_N; the running terms use psi_0..psi_{N-1}.
    """
    psis = np.asarray(psi_trajectory, dtype=complex)
    u = np.asarray(u)
    if psis.shape[0] != grid.n_steps + 1 or u.shape[0] != grid.n_steps:
        raise DomainError("trajectory and control lengths do not match the grid")
    terminal = 0.5 * np.sum(np.abs(psis[-1] - np.asarray(psi_target)) ** 2)
    effort = 0.5 * weights.gamma_reg * np.sum(np.abs(u) ** 2) * grid.dt
    alpha = weights.alpha_array(psis.shape[1])
    population = 0.5 * np.sum(alpha * np.abs(psis[:-1]) ** 2) * grid.dt
    return float(terminal + effort + population)


def _hamiltonians(problem, u, grid):
    hc = problem.control_at(grid.points)
    return problem.drift[None] + np.asarray(u)[:, None, None] * hc, hc


def _forward(problem, u, grid):
    hs, hc = _hamiltonians(problem, u, grid)
    us = step_unitaries(hs, grid.dt)
    psis = np.empty((grid.n_steps + 1, problem.psi0.size), dtype=complex)
    psis[0] = problem.psi0
    for k in range(grid.n_steps):
        psis[k + 1] = us[k] @ psis[k]
    if not np.all(np.isfinite(psis)):
        raise NumericalError("pure-state trajectory became non-finite", stage="state")
    return psis, us, hc


def terminal_costate(psi_final, psi_target):
    """p(T) = -i (psi(T) - psi_target)."""
    return -1j * (np.asarray(psi_final) - np.asarray(psi_target))


def _backward(problem, psis, us, weights, grid):
    alpha = weights.alpha_array(psis.shape[1])
    ps = np.empty_like(psis)
    ps[-1] = terminal_costate(psis[-1], problem.psi_target)
    for k in range(grid.n_steps - 1, -1, -1):
        ps[k] = dagger(us[k]) @ ps[k + 1] - grid.dt * 1j * alpha * psis[k]
    return ps


def _midpoint_unitaries(problem, u, grid):
    hs, _ = _hamiltonians(problem, u, grid)
    return step_unitaries(hs, 0.5 * grid.dt)


def _control_law(psis, ps, hc, half, weights):
    """Re[p . (H_c psi)^*] / gamma per step, with psi and p carried to the step midpoint."""
    psi_mid = np.einsum("kab,kb->ka", half, psis[:-1])
    p_mid = np.einsum("kab,kb->ka", half, ps[:-1])
    overlap = np.einsum("ka,ka->k", p_mid, np.conj(np.einsum("kab,kb->ka", hc, psi_mid)))
    return np.real(overlap) / weights.gamma_reg


def evaluate(problem, u, weights, grid):
    """Trajectories, cost and control-law target for the control ``u``."""
    psis, us, hc = _forward(problem, u, grid)
    ps = _backward(problem, psis, us, weights, grid)
    if np.max(np.abs(ps[-1] - terminal_costate(psis[-1], problem.psi_target))) > 1e-12:
        raise NumericalError("terminal costate condition violated", stage="costate")
    half = _midpoint_unitaries(problem, u, grid)
    target = _control_law(psis, ps, hc, half, weights)
    cost = cost_functional(psis, u, problem.psi_target, weights, grid)
    return psis, ps, target, cost


def law_residual(problem, u, weights, n_steps=None):
    """max_k |u_k - Re[p . (H_c psi)^*]_k / gamma| recomputed from scratch."""
    grid = TimeGrid(len(u) if n_steps is None else n_steps)
    _, _, target, _ = evaluate(problem, np.asarray(u, dtype=float), weights, grid)
    return float(np.max(np.abs(target - u)))


def cost_gradient(problem, u, weights, n_steps=None):
    """Adjoint gradient dJ/du_k = dt (gamma u_k - Re[p . (H_c psi)^*]_k)."""
    grid = TimeGrid(len(u) if n_steps is None else n_steps)
    _, _, target, _ = evaluate(problem, np.asarray(u, dtype=float), weights, grid)
    return grid.dt * weights.gamma_reg * (np.asarray(u) - target)


def solve_pure(problem, weights=CostWeights(), config=PureConfig()):
    """Fixed-point sweep on the pure-state optimality system.

    Stops once max_k |u_k - law_k(u)| < ``eps_u``, which also bounds the
    relaxed control change, or at ``max_iterations``.
    """
    grid = TimeGrid(config.n_steps)
    u = np.broadcast_to(np.asarray(config.init_u, dtype=float), (grid.n_steps,)).copy()
    psis, ps, target, cost = evaluate(problem, u, weights, grid)
    eta = config.relaxation
    history = [cost]
    etas = [eta]
    halvings = 0
    converged = False
    iteration = 0
    residual = float(np.max(np.abs(target - u)))
    for iteration in range(1, config.max_iterations + 1):
        if residual < config.eps_u:
            converged = True
            iteration -= 1
            break
        trial = u + eta * (target - u)
        try:
            t_psis, t_ps, t_target, t_cost = evaluate(problem, trial, weights, grid)
        except NumericalError as exc:
            raise NumericalError(exc.detail, stage=exc.stage, iteration=iteration) from exc
        if t_cost <= cost + 1e-12:
            u, psis, ps, target, cost = trial, t_psis, t_ps, t_target, t_cost
            residual = float(np.max(np.abs(target - u)))
            history.append(cost)
            etas.append(eta)
        else:
            eta *= 0.5
            halvings += 1
            log.debug("iteration %d: cost rose to %.6g, relaxation halved to %.3g", iteration, t_cost, eta)
    else:
        converged = residual < config.eps_u
    fid = float(abs(np.vdot(problem.psi_target, psis[-1])) ** 2)
    return PureResult(u, psis, ps, psis[-1], history, fid, iteration, converged, residual, etas, halvings)


def from_model(model, omega, phi, psi0, psi_target):
    """Pure problem for a bilinear control model at fixed carrier ``omega`` and phase ``phi``."""
    return PureProblem(model.drift(), lambda t: model.dh_du(omega, phi, t), psi0, psi_target)


def align_target_phase(problem, u_ref, n_steps=None):
    """Copy of ``problem`` whose target carries the global phase reached by ``u_ref``.

    The density-matrix objective cannot see a global phase, while the
    quadratic terminal cost here can; aligning the phase poses the same
    physical transfer in the gauge a reference pulse naturally produces.
    """
    u_ref = np.asarray(u_ref, dtype=float)
    grid = TimeGrid(len(u_ref) if n_steps is None else n_steps)
    psis, _, _ = _forward(problem, u_ref, grid)
    overlap = np.vdot(problem.psi_target, psis[-1])
    phase = np.exp(1j * np.angle(overlap)) if abs(overlap) > 1e-12 else 1.0
    return PureProblem(problem.drift, problem.control, problem.psi0, phase * problem.psi_target)
