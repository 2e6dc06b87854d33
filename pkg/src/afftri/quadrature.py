"""Fixed quadrature rules on the reference simplex, in barycentric form.

Weights sum to one; multiply by the cell volume when integrating.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np

MAX_DEGREE = 5


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (q, n+1) barycentric coordinates
    weights: np.ndarray  # (q,), sum to 1
    degree: int

    @property
    def dim(self) -> int:
        return self.nodes.shape[1] - 1

    def integrate(self, fn, points) -> float:
        """Integrate ``fn`` (vectorized over rows of coordinates) over one simplex."""
        from .mesh import simplex_volume

        pts = np.asarray(points, dtype=float)
        vol, _ = simplex_volume(pts)
        x = self.nodes @ pts
        return vol * float(self.weights @ np.asarray(fn(x), dtype=float))


def _gauss_legendre_3():
    s = sqrt(15.0) / 10.0
    t = np.array([0.5 - s, 0.5, 0.5 + s])
    nodes = np.column_stack([1.0 - t, t])
    weights = np.array([5.0, 8.0, 5.0]) / 18.0
    return nodes, weights


def _triangle_7():
    # degree-5 symmetric rule (Radon)
    r = sqrt(15.0)
    a1, a2 = (6.0 - r) / 21.0, (6.0 + r) / 21.0
    w1, w2 = (155.0 - r) / 1200.0, (155.0 + r) / 1200.0
    nodes = [(1 / 3, 1 / 3, 1 / 3)]
    weights = [9.0 / 40.0]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        nodes += [(a, a, b), (a, b, a), (b, a, a)]
        weights += [w, w, w]
    return np.array(nodes), np.array(weights)


_RULES = {1: _gauss_legendre_3(), 2: _triangle_7()}


def quadrature_rule(n: int, degree: int = MAX_DEGREE) -> QuadratureRule:
    """Rule on the ``n``-simplex exact up to ``degree`` (at most 5).

    Always returns the degree-5 rule: 3-point Gauss-Legendre on the segment,
    the 7-point rule on the triangle.
    """
    if n not in _RULES:
        raise ValueError(f"no quadrature for simplex dimension {n}")
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (max {MAX_DEGREE})")
    nodes, weights = _RULES[n]
    nodes = nodes.copy()
    weights = weights.copy()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, MAX_DEGREE)
