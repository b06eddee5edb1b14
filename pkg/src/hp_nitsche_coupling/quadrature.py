"""
Quadrature rules on the reference interval, triangle and square, geometrically
graded composite rules and product rules for log-singular panel pairs.

All reference rules live on [0, 1], the unit triangle {x, y >= 0, x + y <= 1}
and the unit square. Rules are cached and their arrays are read-only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import eval_legendre, roots_legendre

try:
    from hp_nitsche_coupling.geometry_mesh import geometric_partition_1d
    from hp_nitsche_coupling.models import ElementKind, ParameterError, PanelRelation
except ImportError:
    from .geometry_mesh import geometric_partition_1d
    from .models import ElementKind, ParameterError, PanelRelation

# Configure logging
logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuadRule:
    """
    Quadrature rule with positive weights.

    nodes has shape (n,) on the interval and (n, 2) on 2D reference elements.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes))
        object.__setattr__(self, "weights", _frozen(self.weights))

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def _check_order(n: int, name: str = "n") -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ParameterError(f"{name} must be a positive integer, got {n!r}")
    return int(n)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadRule:
    """
    n-point Gauss-Legendre rule on [0, 1], exact up to degree 2n - 1.

    Raises:
        ParameterError: If n < 1
    """
    n = _check_order(n)
    x, w = roots_legendre(n)
    return QuadRule(0.5 * (x + 1.0), 0.5 * w)


@lru_cache(maxsize=None)
def gauss_log_weights(n: int) -> np.ndarray:
    """
    Weights l_i on the n Gauss nodes with sum l_i q(x_i) = int_0^1 q(x) ln(x) dx.

    Exact for polynomials q of degree below n. The weights are negative, so
    they are returned as a bare array and not as a QuadRule.
    """
    n = _check_order(n)
    rule = gauss_legendre(n)
    k = np.arange(n)
    moments = np.empty(n)
    moments[0] = -1.0
    kk = k[1:].astype(float)
    moments[1:] = (-1.0) ** (kk + 1.0) / (kk * (kk + 1.0))
    legendre = eval_legendre(k[:, None], 2.0 * rule.nodes[None, :] - 1.0)
    return _frozen(rule.weights * (((2 * k + 1) * moments) @ legendre))


@lru_cache(maxsize=None)
def graded_rule(sigma: float, layers: int, order: int) -> QuadRule:
    """
    Composite Gauss rule on [0, 1] over the geometric partition toward 0.

    Raises:
        ParameterError: For an invalid grading or order
    """
    breaks = geometric_partition_1d(sigma, layers)
    base = gauss_legendre(order)
    lengths = np.diff(breaks)
    nodes = (breaks[:-1, None] + lengths[:, None] * base.nodes[None, :]).ravel()
    weights = (lengths[:, None] * base.weights[None, :]).ravel()
    return QuadRule(nodes, weights)


@lru_cache(maxsize=None)
def triangle_rule(n: int) -> QuadRule:
    """Collapsed Gauss rule on the unit triangle, exact up to degree 2n - 2."""
    g = gauss_legendre(n)
    u, v = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    wu, wv = np.meshgrid(g.weights, g.weights, indexing="ij")
    nodes = np.column_stack((u.ravel(), (v * (1.0 - u)).ravel()))
    return QuadRule(nodes, (wu * wv * (1.0 - u)).ravel())


@lru_cache(maxsize=None)
def square_rule(n: int) -> QuadRule:
    """Tensor Gauss rule on the unit square."""
    g = gauss_legendre(n)
    x, y = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    wx, wy = np.meshgrid(g.weights, g.weights, indexing="ij")
    return QuadRule(np.column_stack((x.ravel(), y.ravel())), (wx * wy).ravel())


def element_rule(kind: ElementKind, n: int) -> QuadRule:
    if kind is ElementKind.TRIANGLE:
        return triangle_rule(n)
    if kind is ElementKind.PARALLELOGRAM:
        return square_rule(n)
    if kind is ElementKind.INTERVAL:
        return gauss_legendre(n)
    raise ParameterError(f"No quadrature rule for {kind}")


@lru_cache(maxsize=None)
def graded_triangle_rule(sigma: float, layers: int, order: int) -> QuadRule:
    """
    Unit-triangle rule graded toward the vertex at the origin.

    Uses x = r (1 - w), y = r w with Jacobian r; the radial direction carries
    the graded composite rule.
    """
    radial = graded_rule(sigma, layers, order)
    ang = gauss_legendre(order)
    r, w = np.meshgrid(radial.nodes, ang.nodes, indexing="ij")
    wr, ww = np.meshgrid(radial.weights, ang.weights, indexing="ij")
    nodes = np.column_stack(((r * (1.0 - w)).ravel(), (r * w).ravel()))
    return QuadRule(nodes, (wr * ww * r).ravel())


@lru_cache(maxsize=None)
def graded_square_rule(sigma: float, layers: int, order: int) -> QuadRule:
    """Unit-square rule graded toward the origin, built from two graded triangles."""
    tri = graded_triangle_rule(sigma, layers, order)
    x, y = tri.nodes[:, 0], tri.nodes[:, 1]
    lower = np.column_stack((x + y, y))
    upper = np.column_stack((x, x + y))
    return QuadRule(np.vstack((lower, upper)), np.concatenate((tri.weights, tri.weights)))


def graded_element_rule(kind: ElementKind, sigma: float, layers: int, order: int) -> QuadRule:
    if kind is ElementKind.TRIANGLE:
        return graded_triangle_rule(sigma, layers, order)
    if kind is ElementKind.PARALLELOGRAM:
        return graded_square_rule(sigma, layers, order)
    if kind is ElementKind.INTERVAL:
        return graded_rule(sigma, layers, order)
    raise ParameterError(f"No graded rule for {kind}")


@dataclass(frozen=True)
class PanelPairRule:
    """
    Product rule for double integrals over a pair of panels.

    For f smooth on [0,1]^2 and D(s, t) >= 0 vanishing logarithmically only on
    the singular set of the relation,

        int int f ln D ~ sum weights * f * ln(D / radius) + sum log_weights * f

    where D / radius stays bounded away from zero. Without a logarithm, the
    plain integral is sum weights * f. For adjacent panels, s and t are the
    fractions measured from the shared vertex.
    """

    relation: PanelRelation
    s: np.ndarray
    t: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray
    radius: np.ndarray

    def __post_init__(self):
        for name in ("s", "t", "weights", "log_weights", "radius"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def size(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def panel_pair_rule(
    relation: PanelRelation, order: int, w_order: Optional[int] = None
) -> PanelPairRule:
    """
    Singularity-adapted product rule for a panel pair.

    Identical panels are split along the diagonal and each half is mapped so
    that |s - t| factors into the two coordinates; adjacent panels are split
    along s = t with coordinates measured from the shared vertex. The logarithm
    of the factored distance is integrated with Gauss-log weights. Disjoint
    panels use tensor Gauss.

    Args:
        relation: Geometric relation of the panels
        order: Gauss points in the radial direction
        w_order: Gauss points in the angular direction (default: order for
            identical and disjoint pairs, order + 8 for adjacent pairs)
    """
    order = _check_order(order, "order")
    relation = PanelRelation(relation)
    if w_order is None:
        w_order = order + 8 if relation is PanelRelation.ADJACENT else order
    w_order = _check_order(w_order, "w_order")

    if relation is PanelRelation.DISJOINT:
        g = gauss_legendre(order)
        s, t = np.meshgrid(g.nodes, g.nodes, indexing="ij")
        ws, wt = np.meshgrid(g.weights, g.weights, indexing="ij")
        n = s.size
        return PanelPairRule(relation, s.ravel(), t.ravel(), (ws * wt).ravel(), np.zeros(n), np.ones(n))

    ga, gw = gauss_legendre(order), gauss_legendre(w_order)
    la, lw = gauss_log_weights(order), gauss_log_weights(w_order)
    a, w = np.meshgrid(ga.nodes, gw.nodes, indexing="ij")
    wa, ww = np.meshgrid(ga.weights, gw.weights, indexing="ij")
    lam_a, lam_w = np.meshgrid(la, lw, indexing="ij")
    weights = wa * ww * a

    if relation is PanelRelation.IDENTICAL:
        # t = a (1 - w) below the diagonal: s - t = a w, ds dt = a da dw
        first, second = a, a * (1.0 - w)
        log_weights = (lam_a * ww + wa * lam_w) * a
        radius = a * w
    else:
        # t = a w below the diagonal: the distance factors as a * bounded
        first, second = a, a * w
        log_weights = lam_a * ww * a
        radius = a

    s = np.concatenate((first.ravel(), second.ravel()))
    t = np.concatenate((second.ravel(), first.ravel()))
    return PanelPairRule(
        relation,
        s,
        t,
        np.tile(weights.ravel(), 2),
        np.tile(log_weights.ravel(), 2),
        np.tile(radius.ravel(), 2),
    )
