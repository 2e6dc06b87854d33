"""Affine simplicial triangulations of flat 1D/2D domains.

A :class:`Triangulation` holds vertex coordinates, cells as vertex-index
tuples and a per-vertex mask of optimizable positions.  It is immutable;
moving vertices means building a new one (see :meth:`Triangulation.with_vertices`).

The module also provides the validity checks for a triangulation (embedded
cells, covering, intersection along shared faces, consistent face
identification), two structured generators, edge enumeration and a small
line-oriented text format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "Interval",
    "Polygon",
    "Triangulation",
    "Edge",
    "Violation",
    "ValidationReport",
    "InvalidMeshError",
    "MeshParseError",
    "simplex_volume",
    "barycentric_coords",
    "validate",
    "uniform_interval_mesh",
    "structured_square_mesh",
    "edges",
    "read_mesh",
    "write_mesh",
    "load_mesh",
    "save_mesh",
]

# relative tolerance on the covering (volume sum) test
COVER_RTOL = 1e-9
# geometric predicates are relative to the squared/plain domain diameter
GEOM_EPS = 1e-12


class InvalidMeshError(ValueError):
    """Raised when an operation needs a valid triangulation and gets none."""


class MeshParseError(ValueError):
    """Malformed mesh text.  ``lineno`` is 1-based (0 when unknown)."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


# ----------------------------------------------------------------------
# domains
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not self.a < self.b:
            raise ValueError(f"empty interval [{self.a}, {self.b}]")

    dim = 1

    @property
    def measure(self) -> float:
        return self.b - self.a


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _shoelace(pts) -> float:
    area = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return 0.5 * area


@dataclass(frozen=True)
class Polygon:
    """Simple counterclockwise polygon.

    The boundary is stored in canonical form: collinear points are dropped
    and the list starts at the lowest (then leftmost) corner, so two
    descriptions of the same polygon compare equal.
    """

    points: tuple

    dim = 2

    def __post_init__(self):
        pts = [tuple(float(c) for c in p) for p in self.points]
        if any(len(p) != 2 or not all(map(math.isfinite, p)) for p in pts):
            raise ValueError("polygon points must be finite 2D coordinates")
        if len(pts) < 3:
            raise ValueError("polygon needs at least 3 points")
        scale = max(max(abs(c) for p in pts for c in p), 1.0)
        changed = True
        while changed and len(pts) >= 3:
            changed = False
            for i in range(len(pts)):
                prev, cur, nxt = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
                if abs(_cross(prev, cur, nxt)) <= GEOM_EPS * scale * scale:
                    del pts[i]
                    changed = True
                    break
        if len(pts) < 3:
            raise ValueError("degenerate polygon")
        area = _shoelace(pts)
        if area <= 0:
            raise ValueError("polygon must be counterclockwise with positive area")
        if not _is_simple(pts):
            raise ValueError("polygon boundary self-intersects")
        start = min(range(len(pts)), key=lambda i: (pts[i][1], pts[i][0]))
        object.__setattr__(self, "points", tuple(pts[start:] + pts[:start]))

    @property
    def measure(self) -> float:
        return _shoelace(self.points)


def _segments_intersect(p1, p2, q1, q2, eps=0.0) -> bool:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True

    def on_seg(a, b, c, d):
        return (
            abs(d) <= eps
            and min(a[0], b[0]) - 1e-15 <= c[0] <= max(a[0], b[0]) + 1e-15
            and min(a[1], b[1]) - 1e-15 <= c[1] <= max(a[1], b[1]) + 1e-15
        )

    return (
        on_seg(q1, q2, p1, d1)
        or on_seg(q1, q2, p2, d2)
        or on_seg(p1, p2, q1, d3)
        or on_seg(p1, p2, q2, d4)
    )


def _is_simple(pts) -> bool:
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                return False
    return True


# ----------------------------------------------------------------------
# simplex geometry
# ----------------------------------------------------------------------


def simplex_volume(points) -> tuple[float, int]:
    """Volume and orientation sign of a full-dimensional simplex.

    Parameters
    ----------
    points : array_like, shape (d+1, d)
        Vertex coordinates, d in {1, 2}.

    Returns
    -------
    volume : float
        ``|det(v1-v0, ..., vd-v0)| / d!``
    sign : int
        Sign of that determinant (+1, -1 or 0).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] != pts.shape[1] + 1 or pts.shape[1] not in (1, 2):
        raise ValueError(f"expected d+1 points in dimension d (d = 1, 2), got shape {pts.shape}")
    det = _det(pts[1:] - pts[0])
    return abs(det) / math.factorial(pts.shape[1]), int(np.sign(det))


def _det(edge_vectors) -> float:
    e = edge_vectors
    if e.shape[-1] == 1:
        return float(e[0, 0])
    return float(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])


def barycentric_coords(cell_points, p) -> np.ndarray:
    """Barycentric coordinates of ``p`` with respect to a nondegenerate simplex."""
    pts = np.asarray(cell_points, dtype=float)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    d = pts.shape[1]
    if pts.shape[0] != d + 1 or p.shape != (d,):
        raise ValueError("dimension mismatch between cell and point")
    jac = (pts[1:] - pts[0]).T
    vol, _ = simplex_volume(pts)
    scale = max(np.abs(jac).max(), 1e-300)
    if vol <= GEOM_EPS * scale**d:
        raise InvalidMeshError("degenerate cell has no barycentric coordinates")
    tail = np.linalg.solve(jac, p - pts[0])
    return np.concatenate([[1.0 - tail.sum()], tail])


def signed_volumes(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Signed volume of every cell (vectorized)."""
    e = vertices[cells[:, 1:]] - vertices[cells[:, :1]]
    if vertices.shape[1] == 1:
        return e[:, 0, 0]
    return 0.5 * (e[:, 0, 0] * e[:, 1, 1] - e[:, 0, 1] * e[:, 1, 0])


def barycentric_gradients(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Constant gradients of the barycentric functions, shape (nc, d+1, d)."""
    e = vertices[cells[:, 1:]] - vertices[cells[:, :1]]  # (nc, d, d); rows are edge vectors
    # lambda_{1..d}(x) = J^{-1}(x - v0) with J columns = edge vectors, i.e. J = e^T
    inv = np.linalg.inv(np.swapaxes(e, 1, 2))
    grads = np.empty((cells.shape[0], cells.shape[1], vertices.shape[1]))
    grads[:, 1:, :] = inv
    grads[:, 0, :] = -inv.sum(axis=1)
    return grads


# ----------------------------------------------------------------------
# triangulation
# ----------------------------------------------------------------------


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Affine simplicial triangulation with a fixed cell connectivity.

    Attributes
    ----------
    vertices : ndarray, shape (nv, d)
    cells : ndarray of int, shape (nc, d+1)
    free_mask : ndarray of bool, shape (nv,)
        True where the vertex position may be optimized.
    domain : Interval or Polygon
    """

    vertices: np.ndarray
    cells: np.ndarray
    free_mask: np.ndarray
    domain: Interval | Polygon

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        if verts.ndim == 1:
            verts = verts[:, None]
        if verts.ndim != 2 or verts.shape[1] not in (1, 2):
            raise ValueError("vertices must have shape (nv, d) with d in {1, 2}")
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertex coordinates must be finite")
        d = verts.shape[1]
        cells = np.array(self.cells, dtype=np.int64).reshape(-1, d + 1)
        if cells.size and (cells.min() < 0 or cells.max() >= len(verts)):
            raise ValueError("cell references a vertex index out of range")
        for k, c in enumerate(cells):
            if len(set(c.tolist())) != d + 1:
                raise ValueError(f"cell {k} repeats a vertex index")
        mask = np.array(self.free_mask, dtype=bool).reshape(-1)
        if mask.shape != (len(verts),):
            raise ValueError("free_mask must have one entry per vertex")
        if self.domain.dim != d:
            raise ValueError("domain dimension does not match vertex dimension")
        object.__setattr__(self, "vertices", _readonly(verts))
        object.__setattr__(self, "cells", _readonly(cells))
        object.__setattr__(self, "free_mask", _readonly(mask))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        return _readonly(signed_volumes(self.vertices, self.cells))

    @property
    def volumes(self) -> np.ndarray:
        return np.abs(self.signed_volumes)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Indices of vertices on faces that belong to exactly one cell."""
        counts: dict[tuple, int] = {}
        for c in self.cells.tolist():
            for face in combinations(sorted(c), self.dim):
                counts[face] = counts.get(face, 0) + 1
        on_bdry = sorted({v for face, k in counts.items() if k == 1 for v in face})
        return _readonly(np.array(on_bdry, dtype=np.int64))

    def cell_points(self, k: int) -> np.ndarray:
        return self.vertices[self.cells[k]]

    def with_vertices(self, vertices) -> "Triangulation":
        return Triangulation(vertices, self.cells, self.free_mask, self.domain)

    def validate(self) -> "ValidationReport":
        return validate(self)

    def __eq__(self, other):
        if not isinstance(other, Triangulation):
            return NotImplemented
        return (
            self.vertices.shape == other.vertices.shape
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.cells, other.cells)
            and np.array_equal(self.free_mask, other.free_mask)
            and self.domain == other.domain
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"Triangulation(dim={self.dim}, vertices={self.n_vertices}, "
            f"cells={self.n_cells}, free={int(self.free_mask.sum())})"
        )


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    condition: str  # "1".."4", or "free_mask"
    message: str
    cells: tuple = ()

    def __str__(self):
        return f"condition ({self.condition}): {self.message}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def conditions(self) -> set:
        return {v.condition for v in self.violations}

    def __len__(self):
        return len(self.violations)

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)

    def __bool__(self):
        # truthy when there is something to report
        return bool(self.violations)

    def __str__(self):
        if self.ok:
            return "valid: no violations"
        return "\n".join(str(v) for v in self.violations)


def _diameter(mesh: Triangulation) -> float:
    span = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0) if mesh.n_vertices else 0
    return max(float(np.max(span)) if np.size(span) else 0.0, 1e-300)


def validate(mesh: Triangulation) -> ValidationReport:
    """Check the four triangulation conditions and the free-mask invariant.

    (1) every cell is embedded: positive volume, one orientation sign for all;
    (2) cell volumes sum to the domain measure (relative tolerance 1e-9);
    (3) two closed cells meet only in a face spanned by their shared vertices;
    (4) shared faces are identified consistently: a face belongs to at most two
        cells and no two distinct vertices occupy the same position.
    Violations are collected, never raised.
    """
    out: list[Violation] = []
    diam = _diameter(mesh)
    d = mesh.dim

    sv = mesh.signed_volumes
    vol_tol = GEOM_EPS * diam**d
    degenerate = np.flatnonzero(np.abs(sv) <= vol_tol)
    for k in degenerate:
        out.append(Violation("1", f"cell {k} is degenerate (volume {abs(sv[k]):.3e})", (int(k),)))
    pos = int(np.sum(sv > vol_tol))
    neg = int(np.sum(sv < -vol_tol))
    ref = 1 if pos >= neg else -1
    for k in np.flatnonzero(np.sign(sv) == -ref):
        if abs(sv[k]) > vol_tol:
            out.append(
                Violation(
                    "1",
                    f"cell {k} is inverted (signed volume {sv[k]:.6g}, "
                    f"orientation opposite to the mesh)",
                    (int(k),),
                )
            )

    total = float(np.sum(np.abs(sv)))
    measure = mesh.domain.measure
    if abs(total - measure) > COVER_RTOL * abs(measure):
        out.append(
            Violation(
                "2",
                f"cell volumes sum to {total:.12g}, domain measure is {measure:.12g}",
            )
        )

    for i, j, why in _bad_intersections(mesh, diam):
        out.append(Violation("3", f"cells {i} and {j} {why}", (i, j)))

    out.extend(_identification_violations(mesh, diam))

    bdry = mesh.boundary_vertices
    moving = bdry[mesh.free_mask[bdry]] if bdry.size else bdry
    for v in moving:
        out.append(Violation("free_mask", f"boundary vertex {v} is marked free"))
    return ValidationReport(out)


def _candidate_pairs(mesh: Triangulation, diam: float):
    """Index arrays (I, J), I < J, of cells whose bounding boxes overlap."""
    pts = mesh.vertices[mesh.cells]
    lo = pts.min(axis=1)
    hi = pts.max(axis=1)
    tol = GEOM_EPS * diam
    order = np.argsort(lo[:, 0], kind="stable")
    lo_sorted = lo[order, 0]
    pos = np.arange(len(order))
    ends = np.searchsorted(lo_sorted, hi[order, 0] + tol, side="right")
    counts = np.maximum(ends - pos - 1, 0)
    first = np.repeat(pos + 1, counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    a = np.repeat(order, counts)
    b = order[first + offsets]
    keep = np.all(lo[b] <= hi[a] + tol, axis=1) & np.all(lo[a] <= hi[b] + tol, axis=1)
    a, b = a[keep], b[keep]
    return np.minimum(a, b), np.maximum(a, b)


def _safe_bary_grads(vertices, cells):
    """Like :func:`barycentric_gradients` but NaN for degenerate cells."""
    e = vertices[cells[:, 1:]] - vertices[cells[:, :1]]
    det = e[:, 0, 0] * e[:, 1, 1] - e[:, 0, 1] * e[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.stack(
            [
                np.stack([e[:, 1, 1], -e[:, 1, 0]], axis=1),
                np.stack([-e[:, 0, 1], e[:, 0, 0]], axis=1),
            ],
            axis=1,
        ) / det[:, None, None]
    inv[det == 0] = np.nan
    grads = np.empty((len(cells), 3, 2))
    grads[:, 1:] = inv
    grads[:, 0] = -inv.sum(axis=1)
    return grads


def _suspect_triangle_pairs(mesh, I, J, diam):
    """Vectorized screen using the same predicates as :func:`_triangle_pair_issue`."""
    P = mesh.vertices
    Ci, Cj = mesh.cells[I], mesh.cells[J]
    eps = GEOM_EPS * diam * diam
    G = _safe_bary_grads(P, mesh.cells)
    flag = np.zeros(len(I), dtype=bool)
    with np.errstate(invalid="ignore"):
        for A, B, cb in ((Ci, Cj, J), (Cj, Ci, I)):
            v0 = P[B[:, 0]]
            for k in range(3):
                v = A[:, k]
                shared = np.any(B == v[:, None], axis=1)
                rel = P[v] - v0
                lam12 = np.einsum("kd,kjd->kj", rel, G[cb, 1:])
                lam = np.column_stack([1.0 - lam12.sum(axis=1), lam12])
                flag |= ~shared & np.all(lam >= -GEOM_EPS, axis=1)

    def cross(o, a, b):
        return (a[:, 0] - o[:, 0]) * (b[:, 1] - o[:, 1]) - (a[:, 1] - o[:, 1]) * (b[:, 0] - o[:, 0])

    def within(a, b, c):
        return np.all(
            (np.minimum(a, b) - 1e-15 <= c) & (c <= np.maximum(a, b) + 1e-15), axis=1
        )

    local = ((0, 1), (1, 2), (2, 0))
    for ia, ib in local:
        a0, a1 = Ci[:, ia], Ci[:, ib]
        p1, p2 = P[a0], P[a1]
        for ja, jb in local:
            b0, b1 = Cj[:, ja], Cj[:, jb]
            q1, q2 = P[b0], P[b1]
            n_common = (a0 == b0).astype(int) + (a0 == b1) + (a1 == b0) + (a1 == b1)
            d1, d2 = cross(q1, q2, p1), cross(q1, q2, p2)
            d3, d4 = cross(p1, p2, q1), cross(p1, p2, q2)
            proper = (((d1 > eps) & (d2 < -eps)) | ((d1 < -eps) & (d2 > eps))) & (
                ((d3 > eps) & (d4 < -eps)) | ((d3 < -eps) & (d4 > eps))
            )
            touch = (
                ((np.abs(d1) <= eps) & within(q1, q2, p1))
                | ((np.abs(d2) <= eps) & within(q1, q2, p2))
                | ((np.abs(d3) <= eps) & within(p1, p2, q1))
                | ((np.abs(d4) <= eps) & within(p1, p2, q2))
            )
            flag |= (n_common == 0) & (proper | touch)
            # one common vertex: collinear overlap beyond it
            one = n_common == 1
            if np.any(one):
                c = np.where((a0 == b0) | (a0 == b1), a0, a1)
                pa = np.where((a0 == c)[:, None], p2, p1)
                pb = np.where((b0 == c)[:, None], q2, q1)
                pc = P[c]
                col = np.abs(cross(pc, pa, pb)) <= eps
                same_dir = np.sum((pa - pc) * (pb - pc), axis=1) > 0
                flag |= one & col & same_dir
    return flag


def _bad_intersections(mesh: Triangulation, diam: float):
    I, J = _candidate_pairs(mesh, diam)
    if mesh.dim == 1:
        x = mesh.vertices[mesh.cells, 0]
        lo = np.maximum(x[I].min(axis=1), x[J].min(axis=1))
        hi = np.minimum(x[I].max(axis=1), x[J].max(axis=1))
        shares = np.any(mesh.cells[I][:, :, None] == mesh.cells[J][:, None, :], axis=(1, 2))
        suspect = (hi - lo > GEOM_EPS * diam) | ~shares
        check = _interval_pair_issue
    else:
        suspect = _suspect_triangle_pairs(mesh, I, J, diam)
        check = _triangle_pair_issue
    bad = []
    for i, j in zip(I[suspect].tolist(), J[suspect].tolist()):
        why = check(mesh, i, j, diam)
        if why:
            bad.append((i, j, why))
    bad.sort()
    return bad


def _interval_pair_issue(mesh, i, j, diam):
    ci, cj = mesh.cells[i], mesh.cells[j]
    xi = mesh.vertices[ci, 0]
    xj = mesh.vertices[cj, 0]
    lo = max(xi.min(), xj.min())
    hi = min(xi.max(), xj.max())
    tol = GEOM_EPS * diam
    if hi - lo > tol:
        return f"overlap on an interval of length {hi - lo:.6g}"
    if hi - lo >= -tol:
        # touching at one point: must be the same vertex index on both sides
        vi = ci[np.argmin(np.abs(xi - lo))]
        vj = cj[np.argmin(np.abs(xj - lo))]
        if vi != vj:
            return f"touch at x={lo:.6g} without sharing a vertex"
    return None


def _triangle_pair_issue(mesh, i, j, diam):
    ci = mesh.cells[i].tolist()
    cj = mesh.cells[j].tolist()
    P = mesh.vertices
    shared = set(ci) & set(cj)
    eps = GEOM_EPS * diam * diam

    # a non-shared vertex of one cell inside (or on) the other
    for a, b in ((ci, cj), (cj, ci)):
        tri = P[b]
        for v in a:
            if v in shared:
                continue
            try:
                lam = barycentric_coords(tri, P[v])
            except InvalidMeshError:
                continue
            if np.all(lam >= -GEOM_EPS):
                return f"overlap: vertex {v} lies in the closed cell"

    # edge-against-edge: segments meet only at shared endpoints
    ei = [(ci[0], ci[1]), (ci[1], ci[2]), (ci[2], ci[0])]
    ej = [(cj[0], cj[1]), (cj[1], cj[2]), (cj[2], cj[0])]
    for a0, a1 in ei:
        for b0, b1 in ej:
            common = {a0, a1} & {b0, b1}
            if len(common) == 2:
                continue
            p1, p2, q1, q2 = P[a0], P[a1], P[b0], P[b1]
            if len(common) == 1:
                # only a problem if the segments are collinear and overlap
                # beyond the common vertex
                c = common.pop()
                pa = P[a1] if a0 == c else P[a0]
                pb = P[b1] if b0 == c else P[b0]
                pc = P[c]
                if abs(_cross(pc, pa, pb)) <= eps and np.dot(pa - pc, pb - pc) > 0:
                    return f"edges ({a0},{a1}) and ({b0},{b1}) overlap"
                continue
            if _segments_intersect(p1, p2, q1, q2, eps):
                return f"edges ({a0},{a1}) and ({b0},{b1}) intersect"
    return None


def _identification_violations(mesh: Triangulation, diam: float):
    out = []
    owners: dict[tuple, list] = {}
    for k, c in enumerate(mesh.cells.tolist()):
        for face in combinations(sorted(c), mesh.dim):
            owners.setdefault(face, []).append(k)
    for face, ks in sorted(owners.items()):
        if len(ks) > 2:
            out.append(
                Violation("4", f"face {face} is shared by {len(ks)} cells", tuple(ks))
            )
    used = np.unique(mesh.cells)
    pts = mesh.vertices[used]
    order = np.lexsort(pts.T[::-1])
    tol = GEOM_EPS * diam
    for a, b in zip(order[:-1], order[1:]):
        if np.all(np.abs(pts[a] - pts[b]) <= tol):
            out.append(
                Violation(
                    "4",
                    f"vertices {used[a]} and {used[b]} coincide; faces through them "
                    "are identified inconsistently",
                )
            )
    return out


def require_embedded(mesh: Triangulation) -> None:
    """Fast check of conditions (1) and (2); raise :class:`InvalidMeshError`.

    For a fixed connectivity with fixed boundary, one orientation for every
    cell together with the covering identity is what descent iterates need.
    """
    sv = mesh.signed_volumes
    ref = 1.0 if sv.size == 0 or sv[0] >= 0 else -1.0
    if not np.all(ref * sv > 0):
        k = int(np.argmin(ref * sv))
        raise InvalidMeshError(f"cell {k} is degenerate or inverted (signed volume {sv[k]:.3g})")
    total = float(np.sum(np.abs(sv)))
    measure = mesh.domain.measure
    if abs(total - measure) > COVER_RTOL * abs(measure):
        raise InvalidMeshError(f"cell volumes sum to {total:.12g}, expected {measure:.12g}")


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------


def uniform_interval_mesh(a: float, b: float, n: int) -> Triangulation:
    """``n`` equal cells on [a, b]; endpoints fixed, interior vertices free."""
    if n < 1:
        raise ValueError("need at least one cell")
    dom = Interval(float(a), float(b))
    x = np.array([a + i * (b - a) / n for i in range(n)] + [b], dtype=float)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    free = np.ones(n + 1, dtype=bool)
    free[[0, -1]] = False
    return Triangulation(x[:, None], cells, free, dom)


def structured_square_mesh(m: int) -> Triangulation:
    """Unit square, ``m`` x ``m`` grid, each square cut along its rising diagonal.

    Vertex ``j*(m+1) + i`` sits at ``(i/m, j/m)``.
    """
    if m < 1:
        raise ValueError("need m >= 1")
    t = np.array([i / m for i in range(m + 1)])
    xx, yy = np.meshgrid(t, t)
    verts = np.column_stack([xx.ravel(), yy.ravel()])
    cells = []
    for j in range(m):
        for i in range(m):
            v00 = j * (m + 1) + i
            v10, v01, v11 = v00 + 1, v00 + m + 1, v00 + m + 2
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    ii, jj = np.meshgrid(np.arange(m + 1), np.arange(m + 1))
    free = ((ii > 0) & (ii < m) & (jj > 0) & (jj < m)).ravel()
    dom = Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))
    return Triangulation(verts, np.array(cells), free, dom)


# ----------------------------------------------------------------------
# edges
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    v_lo: int
    v_hi: int
    incident_cells: tuple  # ((cell, local_sign), ...)

    @property
    def is_boundary(self) -> bool:
        return len(self.incident_cells) == 1


def _cell_edges(cell: Sequence[int]):
    """Edges of a cell, oriented as induced by the cell's vertex order."""
    if len(cell) == 2:
        return [(cell[0], cell[1])]
    a, b, c = cell
    return [(a, b), (b, c), (c, a)]


def edges(mesh: Triangulation) -> list[Edge]:
    """All undirected edges, sorted by ``(v_lo, v_hi)``.

    The local sign of an incident cell is +1 when the orientation the cell's
    vertex order induces on the edge runs from low to high index.
    """
    inc: dict[tuple, list] = {}
    for k, c in enumerate(mesh.cells.tolist()):
        for p, q in _cell_edges(c):
            key = (min(p, q), max(p, q))
            inc.setdefault(key, []).append((k, 1 if p < q else -1))
    return [Edge(lo, hi, tuple(inc[(lo, hi)])) for lo, hi in sorted(inc)]


# ----------------------------------------------------------------------
# text format
# ----------------------------------------------------------------------

MAGIC = "meshtri 1"


def write_mesh(mesh: Triangulation) -> str:
    lines = [MAGIC, f"dim {mesh.dim} vertices {mesh.n_vertices} cells {mesh.n_cells}"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines += ["0" if f else "1" for f in mesh.free_mask]
    return "\n".join(lines) + "\n"


def read_mesh(text: str) -> Triangulation:
    """Parse mesh text; the domain is recovered from the boundary of the cells."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body.split()))
    it = iter(rows)
    last = rows[-1][0] if rows else 0

    def take(what):
        try:
            return next(it)
        except StopIteration:
            raise MeshParseError(last + 1, f"unexpected end of file, expected {what}") from None

    lineno, tok = take("header")
    if tok != MAGIC.split():
        raise MeshParseError(lineno, f"expected '{MAGIC}', got {' '.join(tok)!r}")
    lineno, tok = take("sizes line")
    if len(tok) != 6 or tok[0::2] != ["dim", "vertices", "cells"]:
        raise MeshParseError(lineno, "expected 'dim <d> vertices <nv> cells <nc>'")
    try:
        d, nv, nc = (int(t) for t in tok[1::2])
    except ValueError:
        raise MeshParseError(lineno, "sizes must be integers") from None
    if d not in (1, 2) or nv < 0 or nc < 0:
        raise MeshParseError(lineno, f"unsupported sizes dim={d} vertices={nv} cells={nc}")

    verts = np.empty((nv, d))
    for k in range(nv):
        lineno, tok = take(f"vertex {k}")
        if len(tok) != d:
            raise MeshParseError(lineno, f"vertex {k}: expected {d} coordinates, got {len(tok)}")
        try:
            verts[k] = [float(t) for t in tok]
        except ValueError:
            raise MeshParseError(lineno, f"vertex {k}: bad coordinate") from None
        if not np.all(np.isfinite(verts[k])):
            raise MeshParseError(lineno, f"vertex {k}: non-finite coordinate")
    cells = np.empty((nc, d + 1), dtype=np.int64)
    for k in range(nc):
        lineno, tok = take(f"cell {k}")
        if len(tok) != d + 1:
            raise MeshParseError(lineno, f"cell {k}: expected {d + 1} indices, got {len(tok)}")
        try:
            idx = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError(lineno, f"cell {k}: bad vertex index") from None
        for i in idx:
            if not 0 <= i < nv:
                raise MeshParseError(lineno, f"cell {k}: vertex index {i} out of range 0..{nv - 1}")
        if len(set(idx)) != len(idx):
            raise MeshParseError(lineno, f"cell {k}: repeated vertex index")
        cells[k] = idx
    free = np.empty(nv, dtype=bool)
    for k in range(nv):
        lineno, tok = take(f"fixed flag of vertex {k}")
        if tok not in (["0"], ["1"]):
            raise MeshParseError(lineno, f"vertex {k}: flag must be 0 (free) or 1 (fixed)")
        free[k] = tok == ["0"]
    extra = next(it, None)
    if extra is not None:
        raise MeshParseError(extra[0], "trailing content after the fixed flags")
    try:
        domain = _infer_domain(verts, cells)
    except ValueError as exc:
        raise MeshParseError(0, f"cannot recover the domain: {exc}") from None
    return Triangulation(verts, cells, free, domain)


def _infer_domain(verts: np.ndarray, cells: np.ndarray):
    if verts.shape[1] == 1:
        used = verts[np.unique(cells)] if cells.size else verts
        return Interval(float(used.min()), float(used.max()))
    counts: dict[tuple, list] = {}
    for c in cells.tolist():
        for p, q in _cell_edges(c):
            counts.setdefault((min(p, q), max(p, q)), []).append((p, q))
    directed = {}
    for key, uses in counts.items():
        if len(uses) == 1:
            p, q = uses[0]
            directed[p] = q
    if not directed:
        raise ValueError("no boundary edges")
    start = min(directed)
    loop = [start]
    nxt = directed[start]
    while nxt != start:
        if nxt not in directed or len(loop) > len(directed):
            raise ValueError("boundary is not a single closed loop")
        loop.append(nxt)
        nxt = directed[nxt]
    if len(loop) != len(directed):
        raise ValueError("boundary has more than one component")
    pts = [tuple(verts[v]) for v in loop]
    if _shoelace(pts) < 0:
        pts.reverse()
    return Polygon(tuple(pts))


def load_mesh(path) -> Triangulation:
    with open(path, encoding="utf-8") as fh:
        return read_mesh(fh.read())


def save_mesh(mesh: Triangulation, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_mesh(mesh))
