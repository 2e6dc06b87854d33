"""Vertex-position optimization at fixed connectivity.

The design vector collects the coordinates of the free vertices (x then y per
vertex in 2D, vertices in mesh order).  Descent uses central finite-difference
gradients and a backtracking Armijo line search; a trial step is rejected
when some cell shrinks below a fraction of its current volume, so every
accepted iterate keeps all cells positively oriented.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .field import EnergyWeights, ScalarField, phi
from .mesh import InvalidMeshError, Triangulation, validate
from .whitney import OneForm, phi_form

__all__ = [
    "OptimizerConfig",
    "TraceRow",
    "OptResult",
    "pack_free",
    "unpack_free",
    "fd_gradient",
    "make_objective",
    "optimize",
    "stationarity_check",
]

logger = logging.getLogger(__name__)

MAX_HALVINGS = 60


@dataclass(frozen=True)
class OptimizerConfig:
    gtol: float = 1e-6
    ftol: float = 1e-12
    max_iters: int = 500
    fd_step: float = 1e-6
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    vol_floor_factor: float = 0.1

    def __post_init__(self):
        for name in ("gtol", "ftol", "fd_step", "initial_step", "vol_floor_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass(frozen=True)
class TraceRow:
    iter: int
    phi: float
    grad_inf: float
    min_volume: float
    step: float


@dataclass
class OptResult:
    trace: list
    mesh: Triangulation
    reason: str  # gradient_tolerance | f_decrease | max_iters | line_search_failure
    gradient: np.ndarray = field(repr=False)

    @property
    def phi(self) -> float:
        return self.trace[-1].phi

    @property
    def iterations(self) -> int:
        return self.trace[-1].iter

    @property
    def converged(self) -> bool:
        return self.reason in ("gradient_tolerance", "f_decrease")


def pack_free(mesh: Triangulation) -> np.ndarray:
    return mesh.vertices[mesh.free_mask].ravel().copy()


def unpack_free(mesh: Triangulation, x) -> Triangulation:
    x = np.asarray(x, dtype=float)
    n_free = int(mesh.free_mask.sum())
    if x.shape != (n_free * mesh.dim,):
        raise ValueError(f"design vector has length {x.size}, expected {n_free * mesh.dim}")
    verts = mesh.vertices.copy()
    verts[mesh.free_mask] = x.reshape(n_free, mesh.dim)
    return mesh.with_vertices(verts)


def fd_gradient(objective: Callable[[np.ndarray], float], x, fd_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with step ``fd_step * max(1, |x_i|)``.

    A probe that raises :class:`InvalidMeshError` is replaced by a one-sided
    difference on the feasible side; if both sides fail the error propagates.
    """
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    f0 = None
    for i in range(x.size):
        h = fd_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        try:
            fp = objective(xp)
        except InvalidMeshError:
            fp = None
        try:
            fm = objective(xm)
        except InvalidMeshError:
            fm = None
        if fp is not None and fm is not None:
            g[i] = (fp - fm) / (2.0 * h)
            continue
        if fp is None and fm is None:
            raise InvalidMeshError(f"both finite-difference probes of coordinate {i} are infeasible")
        if f0 is None:
            f0 = objective(x)
        g[i] = (fp - f0) / h if fp is not None else (f0 - fm) / h
    return g


def make_objective(mesh: Triangulation, target: ScalarField | OneForm, w: EnergyWeights):
    """Energy as a function of the design vector of ``mesh``."""
    energy = phi_form if isinstance(target, OneForm) else phi

    def objective(x):
        return energy(unpack_free(mesh, x), target, w)

    return objective


def optimize(
    mesh: Triangulation,
    target: ScalarField | OneForm,
    weights: EnergyWeights,
    config: OptimizerConfig | None = None,
    check_iterates: bool = True,
) -> OptResult:
    """Minimize the interpolation energy over free-vertex positions.

    ``target`` is a scalar field (P1 energy) or a 1-form (Whitney energy).
    Termination never raises: a line search that fails after 60 reductions
    ends the run with ``line_search_failure`` and the last accepted mesh.
    With ``check_iterates`` every accepted mesh is run through the full
    validator and a failure raises :class:`InvalidMeshError`.
    """
    cfg = config or OptimizerConfig()
    report = validate(mesh)
    if not report.ok:
        raise InvalidMeshError(f"initial mesh is invalid:\n{report}")
    objective = make_objective(mesh, target, weights)
    x = pack_free(mesh)
    current = mesh
    orient = 1.0 if mesh.signed_volumes.sum() > 0 else -1.0
    fx = objective(x)
    trace: list[TraceRow] = []
    step = 0.0
    k = 0
    while True:
        g = fd_gradient(objective, x, cfg.fd_step) if x.size else np.zeros(0)
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        trace.append(TraceRow(k, fx, gnorm, float(current.volumes.min()), step))
        logger.debug("iter %d phi %.12e |g| %.3e step %.3e", k, fx, gnorm, step)
        if gnorm <= cfg.gtol:
            reason = "gradient_tolerance"
            break
        if k >= cfg.max_iters:
            reason = "max_iters"
            break
        floor = cfg.vol_floor_factor * current.volumes
        g2 = float(g @ g)
        t = cfg.initial_step
        accepted = None
        for _ in range(MAX_HALVINGS + 1):
            trial_x = x - t * g
            trial = unpack_free(mesh, trial_x)
            if np.all(orient * trial.signed_volumes > floor):
                try:
                    f_trial = objective(trial_x)
                except InvalidMeshError:
                    f_trial = math.inf
                if f_trial <= fx - cfg.armijo_c * t * g2:
                    accepted = (trial_x, trial, f_trial)
                    break
            t *= cfg.backtrack_factor
        if accepted is None:
            reason = "line_search_failure"
            break
        x, current, f_new = accepted
        if check_iterates:
            rep = validate(current)
            if not rep.ok:
                raise InvalidMeshError(f"iterate {k + 1} failed validation:\n{rep}")
        decrease = fx - f_new
        fx = f_new
        step = t
        k += 1
        if decrease <= cfg.ftol * max(abs(fx + decrease), np.finfo(float).tiny):
            g = fd_gradient(objective, x, cfg.fd_step)
            gnorm = float(np.max(np.abs(g))) if g.size else 0.0
            trace.append(TraceRow(k, fx, gnorm, float(current.volumes.min()), step))
            reason = "f_decrease"
            break
    return OptResult(trace, current, reason, g)


def stationarity_check(
    result: OptResult,
    target: ScalarField | OneForm,
    weights: EnergyWeights,
    tol: float,
    fd_step: float = 1e-6,
) -> tuple[float, bool]:
    """Max-norm of the finite-difference gradient at the final mesh."""
    obj = make_objective(result.mesh, target, weights)
    x = pack_free(result.mesh)
    g = fd_gradient(obj, x, fd_step) if x.size else np.zeros(0)
    residual = float(np.max(np.abs(g))) if g.size else 0.0
    return residual, residual <= tol
