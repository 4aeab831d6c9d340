"""Fidelity maximization by the Pontryagin maximum principle.

The state obeys drho/dt = -i[H, rho] and the costate pi the same equation,
integrated backward from pi(1) = grad_rho F(rho(1), sigma). One sweep of
:func:`solve` runs the state forward, the costate backward, and replaces the
controls by maximizers of the Pontryagin-Hamilton function

    Hp_k(u, omega, phi) = tr(pi_k^dag (-i) [H(u, omega, phi, t_k), rho_k]).

Each amplitude ``u_k`` maximizes its own ``Hp_k``; the global carrier
frequency and phase maximize ``sum_k Hp_k``. The update is relaxed towards
the maximizer, and a relaxed trial that lowers the fidelity is rejected and
retried with half the relaxation factor.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .dynamics import PropagatorKind, TimeGrid, propagate, propagate_costate, step_unitaries
from .errors import DomainError, NumericalError
from .quantum import check_density, dagger, fidelity, fidelity_gradient, is_pure
from .spin import SpinModel

log = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5) - 1) / 2
_IMAG_TOL = 1e-8
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class ControlField:
    """Piecewise-constant amplitudes ``u`` plus carrier ``omega`` and phase ``phi``."""

    u: np.ndarray
    omega: float
    phi: float

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim != 1 or u.size < 1:
            raise DomainError("control amplitudes must be a non-empty 1-D array")
        if not (np.all(np.isfinite(u)) and np.isfinite(self.omega) and np.isfinite(self.phi)):
            raise DomainError("control values must be finite")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "phi", float(self.phi))

    @classmethod
    def constant(cls, n_steps, u, omega, phi=0.0):
        return cls(np.full(n_steps, float(u)), omega, phi)


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the forward-backward sweep.

    ``init_u`` is a constant, a sequence of N amplitudes, or ``"random"``
    (uniform in ``u_bounds``, drawn from the ``seed`` passed to :func:`solve`).
    ``init_omega=None`` starts on resonance.
    """

    n_steps: int = 100
    u_bounds: tuple = (0.0, 2 * math.pi)
    eps_u: float = 1e-4
    eps_omega: float = 1e-4
    eps_phi: float = 1e-4
    max_iterations: int = 500
    relaxation: float = 0.3
    relaxation_growth: float = 1.0
    propagator: PropagatorKind = PropagatorKind.EXPONENTIAL
    grid_points_u: int = 64
    init_u: object = 1.0
    init_omega: float | None = None
    init_phi: float = 0.0
    omega_bounds: tuple = (0.0, 2.0)
    grid_points_omega: int = 81
    grid_points_phi: int = 72
    optimize_omega: bool = True
    optimize_phi: bool = True
    adjoint_scheme: str = "backward"

    def __post_init__(self):
        lo, hi = (float(x) for x in self.u_bounds)
        object.__setattr__(self, "u_bounds", (lo, hi))
        object.__setattr__(self, "omega_bounds", tuple(float(x) for x in self.omega_bounds))
        object.__setattr__(self, "propagator", PropagatorKind(self.propagator))
        if not lo < hi:
            raise DomainError(f"u_bounds must satisfy u_min < u_max, got {self.u_bounds}")
        if not self.omega_bounds[0] < self.omega_bounds[1]:
            raise DomainError(f"omega_bounds must be increasing, got {self.omega_bounds}")
        for name in ("eps_u", "eps_omega", "eps_phi"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError("n_steps must be an integer >= 2")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be positive")
        if not 0 < self.relaxation <= 1:
            raise DomainError("relaxation must lie in (0, 1]")
        if self.relaxation_growth < 1:
            raise DomainError("relaxation_growth must be at least 1")
        if self.grid_points_u < 2 or self.grid_points_omega < 2 or self.grid_points_phi < 2:
            raise DomainError("search grids need at least two points")
        if self.adjoint_scheme not in ("backward", "forward"):
            raise DomainError(f"unknown adjoint_scheme {self.adjoint_scheme!r}")


@dataclass(frozen=True)
class ControlProblem:
    """Transfer ``rho0`` towards ``sigma`` under ``model``'s Hamiltonian."""

    rho0: np.ndarray
    sigma: np.ndarray
    model: object = SpinModel()

    def __post_init__(self):
        rho0 = check_density(self.rho0, "rho0")
        sigma = check_density(self.sigma, "sigma")
        if rho0.shape != sigma.shape:
            raise DomainError("rho0 and sigma must have the same dimension")
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "sigma", sigma)


@dataclass
class TrajectoryRecord:
    grid: TimeGrid
    states: np.ndarray
    costates: np.ndarray
    controls: ControlField
    hamiltonian_values: np.ndarray
    fidelity_history: list = field(default_factory=list)


@dataclass
class IterationRecord:
    """One trial update of the sweep."""

    iteration: int
    fidelity: float
    max_du: float
    d_omega: float
    d_phi: float
    omega: float
    phi: float
    relaxation: float
    accepted: bool


@dataclass
class SolveResult:
    control: ControlField
    trajectory: TrajectoryRecord
    final_fidelity: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    relaxation_halvings: int = 0


def pontryagin_hamiltonian(pi, rho, h):
    """tr(pi^dag (-i)[H, rho]) for Hermitian ``pi`` and ``rho``.

    Raises:
        NumericalError: if the trace has an imaginary part above 1e-8.
    """
    pi = np.asarray(pi, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if not (pi.shape == rho.shape == h.shape):
        raise DomainError(f"dimension mismatch: {pi.shape}, {rho.shape}, {h.shape}")
    val = -1j * np.trace(dagger(pi) @ (h @ rho - rho @ h))
    if abs(val.imag) > _IMAG_TOL:
        raise NumericalError(f"Pontryagin Hamiltonian has imaginary part {val.imag:.3g}")
    return float(val.real)


def _pairing_commutators(pis, rhos):
    """C_k = rho_k pi_k^dag - pi_k^dag rho_k, so that Hp_k(H) = -i tr(H C_k)."""
    pid = dagger(pis)
    return rhos @ pid - pid @ rhos


def _hamiltonian_values(hs, cs, step_axis=0):
    """-i tr(H C), broadcasting ``hs`` (..., n, n) against ``cs``.

    ``step_axis`` indexes the grid steps, for naming the step of a failure.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        vals = -1j * np.einsum("...ab,...ba->...", hs, cs)
    bad = ~np.isfinite(vals)
    if bad.any():
        step = int(np.nonzero(bad)[step_axis % bad.ndim][0]) if bad.ndim else None
        raise NumericalError("Pontryagin Hamiltonian is non-finite", stage="hamiltonian", step=step)
    resid = np.max(np.abs(vals.imag)) if vals.size else 0.0
    if resid > _IMAG_TOL:
        raise NumericalError(f"Pontryagin Hamiltonian has imaginary part {resid:.3g}")
    return vals.real


def _pick_first_max(vals, axis=-1):
    """Index of the first entry within tie tolerance of the maximum."""
    best = np.max(vals, axis=axis, keepdims=True)
    tol = _TIE_TOL * np.maximum(1.0, np.abs(best))
    return np.argmax(vals >= best - tol, axis=axis)


def _maximize_u(cs, ts, omega, phi, model, bounds, n_grid, u_prev=None, width=1e-8):
    """Per-step argmax of Hp_k over [u_min, u_max], batched over k.

    Coarse grid, then golden-section search on the bracket around the best
    grid point. The previous amplitude is also a candidate, so the result
    never scores below it.
    """
    lo, hi = bounds
    n = cs.shape[0]
    ts = np.asarray(ts, dtype=float)

    def score(u):
        # u has shape (n, m)
        hs = model.hamiltonian(u, omega, phi, ts[:, None])
        return _hamiltonian_values(hs, cs[:, None])

    grid = np.linspace(lo, hi, n_grid)
    vals = score(np.broadcast_to(grid, (n, n_grid)))
    idx = _pick_first_max(vals)
    rows = np.arange(n)
    best_u = grid[idx]
    best_v = vals[rows, idx]

    a = grid[np.maximum(idx - 1, 0)]
    b = grid[np.minimum(idx + 1, n_grid - 1)]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = score(c[:, None])[:, 0]
    fd = score(d[:, None])[:, 0]
    while np.max(b - a) > width:
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _GOLDEN * (b - a)
        new_d = a + _GOLDEN * (b - a)
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        fc_new = score(c[:, None])[:, 0]
        fd_new = score(d[:, None])[:, 0]
        fc, fd = np.where(left, fc_new, fd), np.where(left, fc, fd_new)
    ref_u = 0.5 * (a + b)
    ref_v = score(ref_u[:, None])[:, 0]

    cand_u = np.stack([best_u, ref_u], axis=1)
    cand_v = np.stack([best_v, ref_v], axis=1)
    if u_prev is not None:
        cand_u = np.concatenate([cand_u, np.asarray(u_prev, dtype=float)[:, None]], axis=1)
        cand_v = np.concatenate([cand_v, score(np.asarray(u_prev, dtype=float)[:, None])], axis=1)
    # ties go to the smallest amplitude
    order = np.argsort(cand_u, axis=1, kind="stable")
    cand_u = np.take_along_axis(cand_u, order, axis=1)
    cand_v = np.take_along_axis(cand_v, order, axis=1)
    pick = _pick_first_max(cand_v)
    return cand_u[rows, pick], cand_v[rows, pick]


def maximize_step_hamiltonian(pi_k, rho_k, t_k, omega, phi, config, model=SpinModel()):
    """Amplitude in ``config.u_bounds`` maximizing Hp_k at a single grid point."""
    cs = _pairing_commutators(np.asarray(pi_k, dtype=complex)[None], np.asarray(rho_k, dtype=complex)[None])
    u, _ = _maximize_u(cs, [t_k], omega, phi, model, config.u_bounds, config.grid_points_u)
    return float(u[0])


def _global_objective(cs, ts, u, model):
    def objective(omega, phi):
        hs = model.hamiltonian(u, omega, phi, ts)
        return float(np.sum(_hamiltonian_values(hs, cs)))
    return objective


def _maximize_global(cs, ts, u, model, config, current=None):
    """argmax over (omega, phi) of sum_k Hp_k(u_k, omega, phi)."""
    ts = np.asarray(ts, dtype=float)
    u = np.asarray(u, dtype=float)
    cur_omega, cur_phi = current if current is not None else (None, None)
    if config.optimize_omega:
        omegas = np.linspace(*config.omega_bounds, config.grid_points_omega)
    else:
        omegas = np.array([cur_omega])
    if config.optimize_phi:
        phis = np.arange(config.grid_points_phi) * (2 * math.pi / config.grid_points_phi)
    else:
        phis = np.array([cur_phi])

    hs = model.hamiltonian(u[None, None, :], omegas[:, None, None], phis[None, :, None], ts[None, None, :])
    grid_vals = np.sum(_hamiltonian_values(hs, cs[None, None], step_axis=-1), axis=-1)
    flat = grid_vals.ravel()
    i = int(_pick_first_max(flat[None, :])[0])
    best = (float(omegas[i // len(phis)]), float(phis[i % len(phis)]))
    best_val = float(flat[i])

    objective = _global_objective(cs, ts, u, model)
    d_omega = (omegas[1] - omegas[0]) if len(omegas) > 1 else 0.0
    d_phi = (phis[1] - phis[0]) if len(phis) > 1 else 0.0
    free = [config.optimize_omega, config.optimize_phi]
    if any(free):
        def neg(x):
            o = x[0] if free[0] else best[0]
            p = x[-1] if free[1] else best[1]
            if free[0]:
                o = min(max(o, config.omega_bounds[0]), config.omega_bounds[1])
            return -objective(o, p)

        x0 = [v for v, f in zip(best, free) if f]
        simplex = [x0]
        steps = [s for s, f in zip((d_omega, d_phi), free) if f]
        for j, s in enumerate(steps):
            vertex = list(x0)
            vertex[j] += 0.5 * s
            simplex.append(vertex)
        res = scipy.optimize.minimize(
            neg, x0, method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-15, "maxiter": 2000},
        )
        x = list(res.x)
        o = min(max(x[0], config.omega_bounds[0]), config.omega_bounds[1]) if free[0] else best[0]
        p = x[-1] if free[1] else best[1]
        val = objective(o, p)
        if val > best_val + _TIE_TOL * max(1.0, abs(best_val)):
            best, best_val = (o, p % (2 * math.pi) if free[1] else p), val
    if current is not None:
        # the incumbent wins ties, so a flat objective leaves (omega, phi) unchanged
        cur_val = objective(*current)
        if cur_val >= best_val - _TIE_TOL * max(1.0, abs(best_val)):
            best, best_val = (float(current[0]), float(current[1])), cur_val
    return best


def update_global_parameters(trajectory, config, model=SpinModel()):
    """Carrier frequency and phase maximizing the summed Pontryagin Hamiltonian.

    ``trajectory`` supplies states, costates and the amplitudes ``u_k``.
    """
    grid = trajectory.grid
    cs = _pairing_commutators(trajectory.costates[:-1], trajectory.states[:-1])
    return _maximize_global(cs, grid.points, trajectory.controls.u, model, config)


def terminal_costate(rho_final, sigma):
    """pi(1) = grad_rho F(rho(1), sigma).

    A pure ``rho_final`` with a mixed ``sigma`` has no full gradient. Unitary
    dynamics keep a pure state pure, and on pure states F = tr(rho sigma),
    so ``sigma`` is returned: the gradient of F along every reachable path.
    """
    if is_pure(rho_final) and not is_pure(sigma):
        return np.array(sigma, dtype=complex)
    return fidelity_gradient(rho_final, sigma)


def _hamiltonians(model, control, grid):
    return model.hamiltonian(control.u, control.omega, control.phi, grid.points)


def _forward_pass(problem, control, grid, kind):
    hs = _hamiltonians(problem.model, control, grid)
    states = propagate(hs, problem.rho0, grid, kind)
    return hs, states


def _backward_pass(problem, hs, states, grid, kind, scheme="backward"):
    try:
        pi_final = terminal_costate(states[-1], problem.sigma)
    except NumericalError as exc:
        raise NumericalError(exc.detail, stage="costate") from exc
    return propagate_costate(hs, pi_final, grid, kind, scheme=scheme)


def _final_fidelity(states, sigma):
    rho = states[-1]
    rho = 0.5 * (rho + dagger(rho))
    return fidelity(rho, sigma, check=False)


def control_gradient_check(problem, control, k, config=SolverConfig(), step=1e-6):
    """Adjoint and central-difference values of dF(rho_N, sigma)/du_k.

    The adjoint value is dt * dHp_k/du with the state and costate taken at
    the midpoint of step k (both are carried there by the step propagator,
    which keeps the rectangle rule second-order accurate).
    """
    grid = TimeGrid(len(control.u))
    if not 0 <= k < grid.n_steps:
        raise DomainError(f"step index {k} outside 0..{grid.n_steps - 1}")
    kind = PropagatorKind.EXPONENTIAL
    model = problem.model
    hs, states = _forward_pass(problem, control, grid, kind)
    pis = _backward_pass(problem, hs, states, grid, kind)
    half = step_unitaries(hs[k], 0.5 * grid.dt)
    rho_mid = half @ states[k] @ dagger(half)
    pi_mid = half @ pis[k] @ dagger(half)
    dh = model.dh_du(control.omega, control.phi, grid.points[k])
    adjoint = grid.dt * pontryagin_hamiltonian(pi_mid, rho_mid, dh)

    def objective(uk):
        u = np.array(control.u)
        u[k] = uk
        _, s = _forward_pass(problem, ControlField(u, control.omega, control.phi), grid, kind)
        return _final_fidelity(s, problem.sigma)

    fd = (objective(control.u[k] + step) - objective(control.u[k] - step)) / (2 * step)
    return adjoint, fd


def random_control(n_steps, bounds, rng):
    return rng.uniform(bounds[0], bounds[1], size=n_steps)


def initial_control(problem, config, seed=None):
    omega0 = getattr(getattr(problem.model, "params", None), "omega0", 1.0)
    omega = omega0 if config.init_omega is None else config.init_omega
    if isinstance(config.init_u, str):
        if config.init_u != "random":
            raise DomainError(f"unknown init_u {config.init_u!r}")
        u = random_control(config.n_steps, config.u_bounds, np.random.default_rng(seed))
    else:
        u = np.broadcast_to(np.asarray(config.init_u, dtype=float), (config.n_steps,)).copy()
    return ControlField(np.clip(u, *config.u_bounds), omega, config.init_phi)


def _wrap(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _record(problem, control, grid, kind, history, scheme="backward"):
    hs, states = _forward_pass(problem, control, grid, kind)
    pis = _backward_pass(problem, hs, states, grid, kind, scheme)
    cs = _pairing_commutators(pis[:-1], states[:-1])
    hvals = _hamiltonian_values(hs, cs)
    return TrajectoryRecord(grid, states, pis, control, hvals, list(history))


def solve(problem, config=SolverConfig(), seed=None, callback=None):
    """Maximize F(rho(1), sigma) over (u_k, omega, phi) by the forward-backward sweep.

    Every iteration evaluates one relaxed trial: the controls move a
    fraction ``eta`` of the way to the Hamiltonian maximizers. The stopping
    test compares the trial with the current controls. A trial that lowers
    the fidelity is rejected and ``eta`` is halved; the best control seen is
    returned.

    Raises:
        NumericalError: naming the iteration and grid step of a failure.
    """
    grid = TimeGrid(config.n_steps)
    kind = config.propagator
    model = problem.model
    ts = grid.points

    control = initial_control(problem, config, seed)
    try:
        hs, states = _forward_pass(problem, control, grid, kind)
    except NumericalError as exc:
        raise NumericalError(exc.detail, stage=exc.stage, iteration=0, step=exc.step) from exc
    current_f = _final_fidelity(states, problem.sigma)
    best_f, best_control = current_f, control
    history = [current_f]
    records = []
    eta = config.relaxation
    halvings = 0
    converged = False
    cs = None
    iteration = 0

    for iteration in range(1, config.max_iterations + 1):
        try:
            if cs is None:
                pis = _backward_pass(problem, hs, states, grid, kind, config.adjoint_scheme)
                cs = _pairing_commutators(pis[:-1], states[:-1])
                u_star, h_star = _maximize_u(
                    cs, ts, control.omega, control.phi, model,
                    config.u_bounds, config.grid_points_u, u_prev=control.u,
                )
                h_prev = _hamiltonian_values(hs, cs)
                worse = h_star < h_prev - 1e-9 * np.maximum(1.0, np.abs(h_prev))
                if worse.any():
                    raise NumericalError("maximizer scores below the current control",
                                         stage="maximize", step=int(np.argmax(worse)))
                omega_star, phi_star = _maximize_global(
                    cs, ts, control.u, model, config, current=(control.omega, control.phi)
                )

            u_new = control.u + eta * (u_star - control.u)
            omega_new = control.omega + eta * (omega_star - control.omega)
            phi_new = control.phi + eta * _wrap(phi_star - control.phi)
            trial = ControlField(u_new, omega_new, phi_new)
            max_du = float(np.max(np.abs(u_new - control.u)))
            d_omega = float(abs(omega_new - control.omega))
            d_phi = float(abs(_wrap(phi_new - control.phi)))

            hs_new, states_new = _forward_pass(problem, trial, grid, kind)
        except NumericalError as exc:
            raise NumericalError(exc.detail, stage=exc.stage, iteration=iteration, step=exc.step) from exc

        f_new = _final_fidelity(states_new, problem.sigma)
        history.append(f_new)
        if f_new > best_f:
            best_f, best_control = f_new, trial
        stop = max_du < config.eps_u and d_omega < config.eps_omega and d_phi < config.eps_phi
        accepted = f_new >= current_f - 1e-15
        records.append(IterationRecord(iteration, float(f_new), max_du, d_omega, d_phi,
                                       float(omega_new), float(phi_new), float(eta), bool(accepted)))
        if callback is not None:
            callback(records[-1])
        if stop:
            converged = True
            break
        if accepted:
            control, hs, states, current_f = trial, hs_new, states_new, f_new
            cs = None
            eta = min(config.relaxation, eta * config.relaxation_growth)
        else:
            eta *= 0.5
            halvings += 1
            log.debug("iteration %d: fidelity fell to %.6g, relaxation halved to %.3g",
                      iteration, f_new, eta)

    record = _record(problem, best_control, grid, kind, history)
    final = _final_fidelity(record.states, problem.sigma)
    return SolveResult(best_control, record, final, iteration, converged, records, halvings)
