"""Run configuration files (YAML) for the command-line front end.

Every solver setting has an explicit key; the effective values are echoed
back by :meth:`RunConfig.to_dict`, and ``RunConfig.from_dict`` of that echo
reproduces an equal configuration.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import DomainError
from .pmp import SolverConfig
from .pure import CostWeights, PureConfig
from .quantum import density_violations
from .spin import SpinParams

PROBLEMS = ("spin-transfer", "custom-matrices")
METHODS = ("pmp", "pure-baseline", "both")


class ConfigError(DomainError):
    """Invalid configuration; ``field`` and ``line`` locate the problem."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class PureSettings:
    """Pure-state baseline settings; ``target_phase="auto"`` aligns the
    target's global phase with a resonant pi pulse."""

    gamma_reg: float = 1e-3
    alpha: tuple | None = None
    eps_u: float = 1e-4
    max_iterations: int = 5000
    relaxation: float = 0.3
    init_u: float = 1.0
    target_phase: object = "auto"

    def weights(self):
        return CostWeights(self.gamma_reg, self.alpha)

    def config(self, n_steps):
        return PureConfig(n_steps, self.eps_u, self.max_iterations, self.relaxation, self.init_u)


@dataclass(frozen=True)
class RunConfig:
    problem: str = "spin-transfer"
    spin: SpinParams = SpinParams()
    solver: SolverConfig = SolverConfig()
    pure: PureSettings = PureSettings()
    method: str = "pmp"
    output: str = "out"
    seed: int = 0
    rho0: tuple | None = None
    sigma: tuple | None = None

    def matrices(self):
        """(rho0, sigma) as complex arrays."""
        from .spin import transfer_problem

        if self.problem == "spin-transfer":
            return transfer_problem()
        return np.array(self.rho0, dtype=complex), np.array(self.sigma, dtype=complex)

    def to_dict(self):
        solver = dataclasses.asdict(self.solver)
        solver["propagator"] = self.solver.propagator.value
        solver["u_bounds"] = list(self.solver.u_bounds)
        solver["omega_bounds"] = list(self.solver.omega_bounds)
        if isinstance(solver["init_u"], tuple):
            solver["init_u"] = list(solver["init_u"])
        pure = dataclasses.asdict(self.pure)
        if pure["alpha"] is not None:
            pure["alpha"] = list(pure["alpha"])
        out = {
            "problem": self.problem,
            "method": self.method,
            "output": self.output,
            "seed": self.seed,
            "spin": dataclasses.asdict(self.spin),
            "solver": solver,
            "pure": pure,
        }
        if self.problem == "custom-matrices":
            out["rho0"] = _matrix_to_list(self.rho0)
            out["sigma"] = _matrix_to_list(self.sigma)
        return out

    @classmethod
    def from_dict(cls, data, lines=None):
        return _build(data, lines or {})


def _matrix_to_list(m):
    return [[[float(np.real(z)), float(np.imag(z))] for z in row] for row in m]


def _parse_entry(x, path, lines):
    if isinstance(x, bool):
        raise ConfigError("matrix entries must be numbers", path, lines.get(path))
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    if isinstance(x, str):
        try:
            return complex(x.replace(" ", "").replace("i", "j"))
        except ValueError:
            pass
    raise ConfigError(f"cannot read matrix entry {x!r}", path, lines.get(path))


def _parse_matrix(value, path, lines):
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError("expected a square matrix given as a list of rows", path, lines.get(path))
    n = len(value)
    if any(len(r) != n for r in value):
        raise ConfigError("matrix must be square", path, lines.get(path))
    m = tuple(tuple(_parse_entry(x, path, lines) for x in row) for row in value)
    problems = density_violations(np.array(m, dtype=complex))
    if problems:
        raise ConfigError("not a density matrix: " + "; ".join(problems), path, lines.get(path))
    return m


def _section(data, key, lines):
    sec = data.get(key, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError("expected a mapping", key, lines.get(key))
    return sec


def _fields(cls, sec, prefix, lines):
    names = {f.name for f in dataclasses.fields(cls)}
    for k in sec:
        if k not in names:
            path = f"{prefix}.{k}"
            raise ConfigError("unknown key", path, lines.get(path))
    out = {}
    for k, v in sec.items():
        if isinstance(v, list):
            v = tuple(v)
        out[k] = v
    return out


def _construct(cls, kwargs, prefix, lines):
    try:
        return cls(**kwargs)
    except (DomainError, TypeError, ValueError) as exc:
        msg = str(exc)
        # name the offending key when the message mentions it
        for k in sorted(kwargs, key=len, reverse=True):
            if k in msg:
                path = f"{prefix}.{k}"
                raise ConfigError(msg, path, lines.get(path)) from exc
        raise ConfigError(msg, prefix, lines.get(prefix)) from exc


def _build(data, lines):
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for k in data:
        if k not in known:
            raise ConfigError("unknown key", k, lines.get(k))

    problem = data.get("problem", "spin-transfer")
    if problem not in PROBLEMS:
        raise ConfigError(f"must be one of {PROBLEMS}", "problem", lines.get("problem"))
    method = data.get("method", "pmp")
    if method not in METHODS:
        raise ConfigError(f"must be one of {METHODS}", "method", lines.get("method"))
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("must be an integer", "seed", lines.get("seed"))
    output = data.get("output", "out")
    if not isinstance(output, str):
        raise ConfigError("must be a path string", "output", lines.get("output"))

    spin = _construct(SpinParams, _fields(SpinParams, _section(data, "spin", lines), "spin", lines),
                      "spin", lines)
    solver_kw = _fields(SolverConfig, _section(data, "solver", lines), "solver", lines)
    for key in ("u_bounds", "omega_bounds"):
        if key in solver_kw:
            v = solver_kw[key]
            if not (isinstance(v, tuple) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
                path = f"solver.{key}"
                raise ConfigError("expected [low, high]", path, lines.get(path))
    solver = _construct(SolverConfig, solver_kw, "solver", lines)
    pure = _construct(PureSettings, _fields(PureSettings, _section(data, "pure", lines), "pure", lines),
                      "pure", lines)
    try:
        pure.weights()
        pure.config(solver.n_steps)
    except DomainError as exc:
        raise ConfigError(str(exc), "pure", lines.get("pure")) from exc
    tp = pure.target_phase
    if not (tp == "auto" or (isinstance(tp, (int, float)) and not isinstance(tp, bool))):
        raise ConfigError("must be 'auto' or a number", "pure.target_phase", lines.get("pure.target_phase"))

    rho0 = sigma = None
    if problem == "custom-matrices":
        for key in ("rho0", "sigma"):
            if key not in data:
                raise ConfigError("required for problem 'custom-matrices'", key)
        rho0 = _parse_matrix(data["rho0"], "rho0", lines)
        sigma = _parse_matrix(data["sigma"], "sigma", lines)
        if len(rho0) != 2 or len(sigma) != 2:
            raise ConfigError("the spin model needs 2x2 matrices", "rho0", lines.get("rho0"))
    elif "rho0" in data or "sigma" in data:
        raise ConfigError("only allowed for problem 'custom-matrices'", "rho0" if "rho0" in data else "sigma")

    return RunConfig(problem, spin, solver, pure, method, output, seed, rho0, sigma)


def _key_lines(node, prefix="", out=None):
    """Map dotted key paths to 1-based line numbers."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = f"{prefix}.{key.value}" if prefix else str(key.value)
            out[path] = key.start_mark.line + 1
            _key_lines(value, path, out)
    return out


def parse_config(text):
    """Parse YAML text into a :class:`RunConfig`."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", line=line) from exc
    if data is None:
        data = {}
    return RunConfig.from_dict(data, _key_lines(node) if node is not None else {})


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return parse_config(text)
