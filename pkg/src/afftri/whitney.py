"""Lowest-order Whitney 1-forms on planar triangulations.

Degrees of freedom are circulations along the globally oriented edges
(low vertex index to high).  On a cell the interpolant is

    sum over edges (lo, hi) of  dof * (lam_lo grad lam_hi - lam_hi grad lam_lo)

and its exterior derivative is the constant ``2 * dof * (grad lam_lo x grad lam_hi)``
summed over the same edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .field import EnergyWeights
from .mesh import Triangulation, barycentric_gradients, edges, require_embedded
from .quadrature import quadrature_rule

__all__ = [
    "OneForm",
    "FORMS",
    "get_form",
    "WhitneyInterpolant",
    "dof_edge",
    "interpolate_whitney",
    "whitney_eval",
    "whitney_d",
    "phi_form",
    "phi_form_cells",
    "signed_boundary_circulation",
]


@dataclass(frozen=True)
class OneForm:
    """``a dx + b dy`` with analytic components and exterior derivative.

    ``components`` maps (k, 2) points to (k, 2); ``curl`` gives the dx^dy
    coefficient ``db/dx - da/dy`` as (k,).
    """

    name: str
    components: Callable[[np.ndarray], np.ndarray]
    curl: Callable[[np.ndarray], np.ndarray]


def _form(name, comp, curl):
    return OneForm(
        name,
        lambda p: np.column_stack(np.broadcast_arrays(*comp(p[:, 0], p[:, 1]))).astype(float),
        lambda p: np.broadcast_to(np.asarray(curl(p[:, 0], p[:, 1]), dtype=float), (p.shape[0],)).copy(),
    )


FORMS: dict[str, OneForm] = {
    "dx": _form("dx", lambda x, y: (1.0, 0.0 * x), lambda x, y: 0.0),
    "x_dy": _form("x_dy", lambda x, y: (0.0 * x, x), lambda x, y: 1.0),
    "rot": _form("rot", lambda x, y: (-y, x), lambda x, y: 2.0),
    "dg_quad": _form("dg_quad", lambda x, y: (2 * x, 2 * y), lambda x, y: 0.0),
    "zero": _form("zero", lambda x, y: (0.0 * x, 0.0 * x), lambda x, y: 0.0),
}


def get_form(name: str) -> OneForm:
    try:
        return FORMS[name]
    except KeyError:
        raise ValueError(f"unknown form {name!r}; choose from {sorted(FORMS)}") from None


def dof_edge(alpha: OneForm, p_lo, p_hi) -> float:
    """Line integral of ``alpha`` from ``p_lo`` to ``p_hi`` (3-point Gauss)."""
    a = np.asarray(p_lo, dtype=float)
    b = np.asarray(p_hi, dtype=float)
    rule = quadrature_rule(1, 5)
    pts = rule.nodes @ np.vstack([a, b])
    vals = alpha.components(pts) @ (b - a)
    return float(rule.weights @ vals)


@dataclass(frozen=True)
class WhitneyInterpolant:
    mesh: Triangulation
    edges: tuple  # tuple[Edge, ...], sorted by (lo, hi)
    edge_dofs: np.ndarray

    def edge_index(self) -> dict:
        return {(e.v_lo, e.v_hi): k for k, e in enumerate(self.edges)}

    def cell_edge_table(self) -> np.ndarray:
        """(nc, 3, 3) rows of (edge index, local lo position, local hi position)."""
        index = self.edge_index()
        table = np.empty((self.mesh.n_cells, 3, 3), dtype=np.int64)
        for c, cell in enumerate(self.mesh.cells.tolist()):
            for k, (i, j) in enumerate(((0, 1), (1, 2), (0, 2))):
                if cell[i] > cell[j]:
                    i, j = j, i
                table[c, k] = (index[(cell[i], cell[j])], i, j)
        return table


def interpolate_whitney(alpha: OneForm, mesh: Triangulation) -> WhitneyInterpolant:
    if mesh.dim != 2:
        raise ValueError("Whitney 1-forms are supported on 2D meshes only")
    es = tuple(edges(mesh))
    P = mesh.vertices
    dofs = np.array([dof_edge(alpha, P[e.v_lo], P[e.v_hi]) for e in es])
    dofs.setflags(write=False)
    return WhitneyInterpolant(mesh, es, dofs)


def _cell_basis_values(table, grads, lam):
    """Whitney basis vectors on the cell edges at barycentric points.

    table: (3, 3); grads: (3, 2); lam: (q, 3) -> (q, 3 edges, 2)
    """
    lo, hi = table[:, 1], table[:, 2]
    return lam[:, lo, None] * grads[None, hi, :] - lam[:, hi, None] * grads[None, lo, :]


def whitney_eval(interp: WhitneyInterpolant, cell: int, bary) -> np.ndarray:
    """Vector proxy ``(a, b)`` of the interpolant at a barycentric point."""
    mesh = interp.mesh
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    lam = np.atleast_2d(np.asarray(bary, dtype=float))
    table = interp.cell_edge_table()[cell]
    grads = barycentric_gradients(mesh.vertices, mesh.cells[cell : cell + 1])[0]
    basis = _cell_basis_values(table, grads, lam)
    out = np.einsum("e,qed->qd", interp.edge_dofs[table[:, 0]], basis)
    return out[0] if np.ndim(bary) == 1 else out


def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def whitney_d(interp: WhitneyInterpolant, cell: int | None = None):
    """dx^dy coefficient of the exterior derivative (constant on each cell).

    Returns a float for one cell, or an array over all cells when ``cell`` is None.
    """
    mesh = interp.mesh
    table = interp.cell_edge_table()
    grads = barycentric_gradients(mesh.vertices, mesh.cells)
    c = np.arange(mesh.n_cells)[:, None]
    g_lo = grads[c, table[:, :, 1]]
    g_hi = grads[c, table[:, :, 2]]
    curl = 2.0 * np.sum(interp.edge_dofs[table[:, :, 0]] * _cross2(g_lo, g_hi), axis=1)
    if cell is None:
        return curl
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    return float(curl[cell])


def signed_boundary_circulation(interp: WhitneyInterpolant) -> np.ndarray:
    """Per cell, sum of edge DOFs signed by the orientation the cell induces."""
    out = np.zeros(interp.mesh.n_cells)
    for e, dof in zip(interp.edges, interp.edge_dofs):
        for c, sign in e.incident_cells:
            out[c] += sign * dof
    return out


def phi_form(mesh: Triangulation, alpha: OneForm, w: EnergyWeights) -> float:
    """``c0 |I alpha - alpha|^2 + c1 |d(I alpha) - d alpha|^2`` integrated over the mesh."""
    if mesh.dim != 2:
        raise ValueError("phi_form needs a 2D mesh")
    require_embedded(mesh)
    return float(np.sum(phi_form_cells(mesh, alpha, w)))


def phi_form_cells(mesh: Triangulation, alpha: OneForm, w: EnergyWeights) -> np.ndarray:
    interp = interpolate_whitney(alpha, mesh)
    rule = quadrature_rule(2, 5)
    P = mesh.vertices[mesh.cells]
    x = np.einsum("qi,cid->cqd", rule.nodes, P)
    nc, nq, _ = x.shape
    flat = x.reshape(-1, 2)
    out = np.zeros(nc)
    table = interp.cell_edge_table()
    if w.c0:
        grads = barycentric_gradients(mesh.vertices, mesh.cells)
        c = np.arange(nc)[:, None]
        g_lo = grads[c, table[:, :, 1]]  # (nc, 3, 2)
        g_hi = grads[c, table[:, :, 2]]
        lam = rule.nodes  # (q, 3)
        l_lo = lam[:, table[:, :, 1]].transpose(1, 0, 2)  # (nc, q, 3)
        l_hi = lam[:, table[:, :, 2]].transpose(1, 0, 2)
        basis = l_lo[..., None] * g_hi[:, None] - l_hi[..., None] * g_lo[:, None]
        vals = np.einsum("ce,cqed->cqd", interp.edge_dofs[table[:, :, 0]], basis)
        err = vals - alpha.components(flat).reshape(nc, nq, 2)
        out += w.c0 * np.sum(err * err, axis=2) @ rule.weights
    if w.c1:
        derr = whitney_d(interp)[:, None] - alpha.curl(flat).reshape(nc, nq)
        out += w.c1 * (derr * derr) @ rule.weights
    return out * mesh.volumes
