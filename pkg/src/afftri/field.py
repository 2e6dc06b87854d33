"""Scalar test fields, P1 interpolation and the weighted H1 error energy.

The energy of a triangulation is

    phi = sum over cells of  integral of  c0 * e**2 + c1 * |grad e|**2,

with ``e`` the difference between the piecewise-affine nodal interpolant and
the exact field.  Integrals use the degree-5 rule of :mod:`afftri.quadrature`
against the analytic field, so ``e`` never has to live in a finite element
space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mesh import (
    Triangulation,
    barycentric_gradients,
    require_embedded,
    structured_square_mesh,
    uniform_interval_mesh,
)
from .quadrature import quadrature_rule

__all__ = [
    "ScalarField",
    "EnergyWeights",
    "InterpolantP1",
    "Parametrization1D",
    "FIELDS",
    "get_field",
    "polynomial_field",
    "interpolate_p1",
    "eval_p1",
    "phi",
    "phi_cells",
    "phi_reparam_1d",
    "IDENTITY",
    "PAPER1D_INVERSE",
    "PAPER1D_MAP",
    "ConvergenceRow",
    "convergence_study",
]


@dataclass(frozen=True)
class ScalarField:
    """Analytic field with exact gradient.

    ``value`` maps an (k, d) array of points to (k,), ``gradient`` to (k, d).
    """

    name: str
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]

    def __call__(self, points):
        return self.value(np.atleast_2d(np.asarray(points, dtype=float)))


def polynomial_field(coeffs: Sequence[float], name: str | None = None) -> ScalarField:
    """1D polynomial, constant term first."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        raise ValueError("polynomial needs at least one coefficient")
    p = np.polynomial.Polynomial(c)
    dp = p.deriv()
    return ScalarField(
        name or "poly1d:" + ",".join(repr(float(x)) for x in c),
        1,
        lambda x: p(x[:, 0]),
        lambda x: dp(x[:, 0])[:, None],
    )


def _field2d(name, value, grad):
    return ScalarField(
        name,
        2,
        lambda x: value(x[:, 0], x[:, 1]),
        lambda x: np.column_stack(grad(x[:, 0], x[:, 1])),
    )


_PI = math.pi

FIELDS: dict[str, ScalarField] = {
    "quad1d": polynomial_field([0, 0, 1], "quad1d"),
    "cubic1d": polynomial_field([0, 0, 0, 1], "cubic1d"),
    "paper1d": polynomial_field([0, 0.5, 0.5], "paper1d"),
    "affine2d": _field2d(
        "affine2d",
        lambda x, y: x + y,
        lambda x, y: (np.ones_like(x), np.ones_like(y)),
    ),
    "quadsum2d": _field2d(
        "quadsum2d",
        lambda x, y: x * x + y * y,
        lambda x, y: (2 * x, 2 * y),
    ),
    "sinprod2d": _field2d(
        "sinprod2d",
        lambda x, y: np.sin(_PI * x) * np.sin(_PI * y),
        lambda x, y: (
            _PI * np.cos(_PI * x) * np.sin(_PI * y),
            _PI * np.sin(_PI * x) * np.cos(_PI * y),
        ),
    ),
}


def get_field(name: str) -> ScalarField:
    """Look up a catalog field; ``poly1d:c0,c1,...`` builds a polynomial."""
    if name.startswith("poly1d:"):
        try:
            coeffs = [float(t) for t in name[len("poly1d:") :].split(",")]
        except ValueError:
            raise ValueError(f"bad polynomial coefficients in {name!r}") from None
        return polynomial_field(coeffs)
    try:
        return FIELDS[name]
    except KeyError:
        raise ValueError(
            f"unknown field {name!r}; choose from {sorted(FIELDS)} or poly1d:..."
        ) from None


@dataclass(frozen=True)
class EnergyWeights:
    """Weights of the identity and Laplacian parts of the operator."""

    c0: float = 1.0
    c1: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.c0) and math.isfinite(self.c1)):
            raise ValueError("weights must be finite")
        if self.c0 < 0 or self.c1 < 0 or self.c0 + self.c1 <= 0:
            raise ValueError(f"need c0, c1 >= 0 and c0 + c1 > 0, got ({self.c0}, {self.c1})")


@dataclass(frozen=True)
class InterpolantP1:
    mesh: Triangulation
    nodal_values: np.ndarray

    def __call__(self, cell: int, bary):
        return eval_p1(self, cell, bary)


def interpolate_p1(f: ScalarField, mesh: Triangulation) -> InterpolantP1:
    if f.dim != mesh.dim:
        raise ValueError(f"field {f.name} is {f.dim}D, mesh is {mesh.dim}D")
    vals = np.asarray(f.value(mesh.vertices), dtype=float)
    vals.setflags(write=False)
    return InterpolantP1(mesh, vals)


def eval_p1(u: InterpolantP1, cell: int, bary) -> tuple[float, np.ndarray]:
    """Value and (cellwise constant) gradient of the interpolant."""
    mesh = u.mesh
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    lam = np.asarray(bary, dtype=float)
    idx = mesh.cells[cell]
    nodal = u.nodal_values[idx]
    grads = barycentric_gradients(mesh.vertices, mesh.cells[cell : cell + 1])[0]
    return float(lam @ nodal), nodal @ grads


def phi_cells(mesh: Triangulation, f: ScalarField, w: EnergyWeights) -> np.ndarray:
    """Per-cell energy contributions (no validity check)."""
    rule = quadrature_rule(mesh.dim, 5)
    P = mesh.vertices[mesh.cells]  # (nc, d+1, d)
    x = np.einsum("qi,cid->cqd", rule.nodes, P)
    nc, nq, d = x.shape
    flat = x.reshape(-1, d)
    nodal = np.asarray(f.value(mesh.vertices), dtype=float)[mesh.cells]  # (nc, d+1)
    out = np.zeros(nc)
    vol = np.abs(mesh.signed_volumes)
    if w.c0:
        e = rule.nodes @ nodal.T  # (q, nc)
        e = e.T - f.value(flat).reshape(nc, nq)
        out += w.c0 * (e * e) @ rule.weights
    if w.c1:
        grads = barycentric_gradients(mesh.vertices, mesh.cells)
        gu = np.einsum("ci,cid->cd", nodal, grads)
        ge = gu[:, None, :] - f.gradient(flat).reshape(nc, nq, d)
        out += w.c1 * np.sum(ge * ge, axis=2) @ rule.weights
    return out * vol


def phi(mesh: Triangulation, f: ScalarField, w: EnergyWeights) -> float:
    """Weighted H1 error of the P1 interpolant of ``f`` on ``mesh``.

    Raises :class:`~afftri.mesh.InvalidMeshError` if a cell is degenerate or
    inverted or the cells do not cover the domain.
    """
    if f.dim != mesh.dim:
        raise ValueError(f"field {f.name} is {f.dim}D, mesh is {mesh.dim}D")
    require_embedded(mesh)
    return float(np.sum(phi_cells(mesh, f, w)))


# ----------------------------------------------------------------------
# single-chart curved parametrizations of [0, 1]
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Parametrization1D:
    """Smooth increasing map of [0, 1] onto itself with exact derivative."""

    name: str
    map: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        ends = self.map(np.array([0.0, 1.0]))
        if abs(ends[0]) > 1e-12 or abs(ends[1] - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: must map 0 -> 0 and 1 -> 1")


IDENTITY = Parametrization1D("identity", lambda t: t, lambda t: np.ones_like(t))
# inverse of (x + x^2)/2: the positive root of x^2 + x - 2t = 0
PAPER1D_INVERSE = Parametrization1D(
    "paper1d_inverse",
    lambda t: (-1.0 + np.sqrt(1.0 + 8.0 * t)) / 2.0,
    lambda t: 2.0 / np.sqrt(1.0 + 8.0 * t),
)
PAPER1D_MAP = Parametrization1D(
    "paper1d",
    lambda t: (t + t * t) / 2.0,
    lambda t: (1.0 + 2.0 * t) / 2.0,
)

REPARAM_PANELS = 64


def phi_reparam_1d(
    f: ScalarField,
    sigma: Parametrization1D,
    w: EnergyWeights,
    panels: int = REPARAM_PANELS,
) -> float:
    """Energy of a one-cell triangulation of [0, 1] whose chart is ``sigma``.

    The interpolant is affine in the chart parameter and matches ``f`` at both
    ends, i.e. ``u(sigma(t)) = t`` for ``f(0) = 0, f(1) = 1``.  With
    ``x = sigma(t)``::

        e(x)  = t - f(sigma(t))
        e'(x) = 1/sigma'(t) - f'(sigma(t))

    and the integrals over x are pulled back to t (Jacobian sigma'(t)).
    """
    if f.dim != 1:
        raise ValueError("phi_reparam_1d needs a 1D field")
    ends = f.value(np.array([[0.0], [1.0]]))
    if abs(ends[0]) > 1e-12 or abs(ends[1] - 1.0) > 1e-12:
        raise ValueError(f"{f.name}: need f(0) = 0 and f(1) = 1")
    rule = quadrature_rule(1, 5)
    s = rule.nodes[:, 1]
    edges_t = np.linspace(0.0, 1.0, panels + 1)
    h = np.diff(edges_t)
    t = (edges_t[:-1, None] + h[:, None] * s[None, :]).ravel()
    ww = (h[:, None] * rule.weights[None, :]).ravel()

    ds = sigma.derivative(t)
    x = sigma.map(t)
    if np.any(ds <= 0) or np.any(np.diff(x) <= 0):
        raise ValueError(f"{sigma.name}: parametrization is not strictly increasing")
    if np.any(f.gradient(x[:, None])[:, 0] <= 0):
        raise ValueError(f"{f.name}: field is not strictly increasing on (0, 1)")

    total = 0.0
    if w.c0:
        e = t - f.value(x[:, None])
        total += w.c0 * float(ww @ (e * e * ds))
    if w.c1:
        de = 1.0 / ds - f.gradient(x[:, None])[:, 0]
        total += w.c1 * float(ww @ (de * de * ds))
    return total


# ----------------------------------------------------------------------
# convergence study
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    h: float
    err_l2: float
    err_h1: float
    rate_l2: float | None
    rate_h1: float | None


# errors at or below this are rounding noise of an exactly reproduced field
ZERO_ERROR = 1e-13


def _rate(e_prev, e_cur, h_prev, h_cur):
    if e_prev <= 0 or e_cur <= 0:
        return None
    return math.log(e_prev / e_cur) / math.log(h_prev / h_cur)


def convergence_study(
    f: ScalarField, family: str, levels: Sequence[int]
) -> list[ConvergenceRow]:
    """L2 and H1-seminorm interpolation errors under uniform refinement.

    ``family`` is ``"interval"`` (uniform meshes of [0, 1] with N cells) or
    ``"square"`` (structured unit-square meshes, m x m).  ``h = 1/level``.
    Errors below ``ZERO_ERROR`` are reported as 0.  Rates are ``None`` on
    the first row and wherever an error vanishes.
    """
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    make = {"interval": lambda n: uniform_interval_mesh(0.0, 1.0, n), "square": structured_square_mesh}
    if family not in make:
        raise ValueError(f"unknown mesh family {family!r}")
    rows: list[ConvergenceRow] = []
    for lev in levels:
        mesh = make[family](int(lev))
        el2 = math.sqrt(phi(mesh, f, EnergyWeights(1.0, 0.0)))
        eh1 = math.sqrt(phi(mesh, f, EnergyWeights(0.0, 1.0)))
        el2 = 0.0 if el2 <= ZERO_ERROR else el2
        eh1 = 0.0 if eh1 <= ZERO_ERROR else eh1
        h = 1.0 / lev
        if rows:
            p = rows[-1]
            r2, r1 = _rate(p.err_l2, el2, p.h, h), _rate(p.err_h1, eh1, p.h, h)
        else:
            r2 = r1 = None
        rows.append(ConvergenceRow(int(lev), h, el2, eh1, r2, r1))
    return rows
