"""
Hierarchic polynomial spaces on the FE mesh and on the BE boundary.

Shape functions are built from integrated Legendre polynomials: vertex hats,
edge modes and interior bubbles. Shared edges carry the minimum of the adjacent
element degrees, and edge modes are oriented from the lower to the higher global
vertex index so that neighbouring elements agree on them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

try:
    from hp_nitsche_coupling.geometry_mesh import BoundaryMesh, Mesh2D, local_edges
    from hp_nitsche_coupling.models import (
        BoundaryTag,
        ConsistencyError,
        ElementKind,
        ParameterError,
    )
    from hp_nitsche_coupling.quadrature import element_rule, gauss_legendre
except ImportError:
    from .geometry_mesh import BoundaryMesh, Mesh2D, local_edges
    from .models import BoundaryTag, ConsistencyError, ElementKind, ParameterError
    from .quadrature import element_rule, gauss_legendre

# Configure logging
logger = logging.getLogger(__name__)

_REF_TOL = 1e-12


@dataclass(frozen=True)
class DegreeVector:
    """Polynomial degree per element or panel"""

    degrees: Tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(p) for p in self.degrees)
        if any(p < 1 for p in values):
            raise ParameterError(f"Polynomial degrees must be >= 1, got {min(values)}")
        object.__setattr__(self, "degrees", values)

    @classmethod
    def uniform(cls, count: int, degree: int) -> "DegreeVector":
        return cls((degree,) * count)

    def __getitem__(self, i: int) -> int:
        return self.degrees[i]

    def __len__(self) -> int:
        return len(self.degrees)

    def __iter__(self):
        return iter(self.degrees)

    @property
    def max(self) -> int:
        return max(self.degrees)


def assign_linear_degrees(
    layers: Sequence[Optional[int]],
    slope: float,
    dimension: int = 2,
    n_layers: Optional[int] = None,
) -> DegreeVector:
    """
    Linear degree vector on a geometric mesh.

    In 1D the layer j >= 1 counts from the singular endpoint, with p_1 = 1 and
    p_j = max(2, floor(mu j)). In 2D the layer j >= 0 counts from the terminal
    layer, p_j = max(j + 1, floor(mu (j + 1))); elements outside the layers
    (tag None) get max(n + 1, floor(mu (n + 1))).

    Raises:
        ParameterError: For slope <= 0 or missing layer information
    """
    if not slope > 0.0:
        raise ParameterError(f"Degree slope must be positive, got {slope}")
    degrees = []
    for j in layers:
        if dimension == 1:
            if j is None or j < 1:
                raise ParameterError(f"1D layers start at 1, got {j}")
            degrees.append(1 if j == 1 else max(2, math.floor(slope * j + 1e-12)))
            continue
        if j is None:
            if n_layers is None:
                raise ParameterError("Regular elements need the number of layers")
            j = n_layers
        degrees.append(max(j + 1, math.floor(slope * (j + 1) + 1e-12)))
    return DegreeVector(tuple(degrees))


def _legendre_table(x: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Legendre polynomials L_0..L_n and their first two derivatives at x."""
    x = np.asarray(x, dtype=float)
    L = np.zeros((n + 1,) + x.shape)
    dL = np.zeros_like(L)
    d2L = np.zeros_like(L)
    L[0] = 1.0
    if n >= 1:
        L[1] = x
        dL[1] = 1.0
    for k in range(1, n):
        L[k + 1] = ((2 * k + 1) * x * L[k] - k * L[k - 1]) / (k + 1)
        dL[k + 1] = dL[k - 1] + (2 * k + 1) * L[k]
        d2L[k + 1] = d2L[k - 1] + (2 * k + 1) * dL[k]
    return L, dL, d2L


def interval_basis(degree: int, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hierarchic basis on [0, 1]: 1 - t, t and bubbles b_k(t), k = 2..degree.

    b_k(t) = (L_k(x) - L_{k-2}(x)) / (2k - 1) with x = 2t - 1, so that
    b_k'(t) = 2 L_{k-1}(x).

    Returns:
        values (degree+1, n) and derivatives d/dt of the same shape
    """
    t = np.asarray(t, dtype=float)
    x = 2.0 * t - 1.0
    L, _, _ = _legendre_table(x, max(degree, 1))
    vals = np.empty((degree + 1,) + t.shape)
    ders = np.empty_like(vals)
    vals[0], vals[1] = 1.0 - t, t
    ders[0], ders[1] = -1.0, 1.0
    for k in range(2, degree + 1):
        vals[k] = (L[k] - L[k - 2]) / (2 * k - 1)
        ders[k] = 2.0 * L[k - 1]
    return vals, ders


def legendre_basis(degree: int, t: np.ndarray) -> np.ndarray:
    """Shifted Legendre polynomials P_k(2t - 1), k = 0..degree (flux space basis)."""
    L, _, _ = _legendre_table(2.0 * np.asarray(t, dtype=float) - 1.0, degree)
    return L


def n_interior_modes(kind: ElementKind, degree: int) -> int:
    if kind is ElementKind.TRIANGLE:
        return (degree - 1) * (degree - 2) // 2
    if kind is ElementKind.PARALLELOGRAM:
        return (degree - 1) ** 2
    return degree - 1


def _triangle_basis(degree, edge_degrees, edge_signs, pts):
    x, y = pts[:, 0], pts[:, 1]
    lam = np.array([1.0 - x - y, x, y])
    glam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    vals = [lam[0], lam[1], lam[2]]
    grads = [np.broadcast_to(g, (len(x), 2)) for g in glam]
    for e, (a, b) in enumerate(local_edges(ElementKind.TRIANGLE)):
        q = edge_degrees[e]
        if q < 2:
            continue
        s = lam[b] - lam[a]
        _, dL, d2L = _legendre_table(s, q - 1)
        prod = lam[a] * lam[b]
        gprod = np.outer(lam[b], glam[a]) + np.outer(lam[a], glam[b])
        gs = glam[b] - glam[a]
        for k in range(2, q + 1):
            c = -4.0 / (k * (k - 1))
            kern, dkern = c * dL[k - 1], c * d2L[k - 1]
            sign = edge_signs[e] ** k
            vals.append(sign * prod * kern)
            grads.append(sign * (gprod * kern[:, None] + (prod * dkern)[:, None] * gs))
    if degree >= 3:
        bub = lam[0] * lam[1] * lam[2]
        gbub = (
            np.outer(lam[1] * lam[2], glam[0])
            + np.outer(lam[0] * lam[2], glam[1])
            + np.outer(lam[0] * lam[1], glam[2])
        )
        u, v = lam[1] - lam[0], lam[2] - lam[0] - lam[1]
        gu, gv = np.array([2.0, 1.0]), np.array([0.0, 2.0])
        Lu, dLu, _ = _legendre_table(u, degree - 3)
        Lv, dLv, _ = _legendre_table(v, degree - 3)
        for total in range(degree - 2):
            for m in range(total + 1):
                n = total - m
                poly = Lu[m] * Lv[n]
                gpoly = np.outer(dLu[m] * Lv[n], gu) + np.outer(Lu[m] * dLv[n], gv)
                vals.append(bub * poly)
                grads.append(gbub * poly[:, None] + bub[:, None] * gpoly)
    return np.array(vals), np.array([np.asarray(g) for g in grads])


def _square_basis(degree, edge_degrees, edge_signs, pts):
    x, y = pts[:, 0], pts[:, 1]
    top = max(degree, max(edge_degrees), 1)
    bx, dbx = interval_basis(top, x)
    by, dby = interval_basis(top, y)

    def mode(i, j, sign=1.0):
        val = sign * bx[i] * by[j]
        grad = sign * np.column_stack((dbx[i] * by[j], bx[i] * dby[j]))
        return val, grad

    pairs = [mode(0, 0), mode(1, 0), mode(1, 1), mode(0, 1)]
    # (x-index, y-index) of edge modes in local edge orientation
    edge_modes = (
        lambda k: (k, 0, 1.0),
        lambda k: (1, k, 1.0),
        lambda k: (k, 1, (-1.0) ** k),
        lambda k: (0, k, (-1.0) ** k),
    )
    for e in range(4):
        for k in range(2, edge_degrees[e] + 1):
            i, j, flip = edge_modes[e](k)
            pairs.append(mode(i, j, flip * edge_signs[e] ** k))
    for i in range(2, degree + 1):
        for j in range(2, degree + 1):
            pairs.append(mode(i, j))
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def _check_inside(kind: ElementKind, pts: np.ndarray) -> None:
    if kind is ElementKind.INTERVAL:
        bad = (pts < -_REF_TOL) | (pts > 1.0 + _REF_TOL)
    elif kind is ElementKind.TRIANGLE:
        bad = (pts[:, 0] < -_REF_TOL) | (pts[:, 1] < -_REF_TOL) | (pts.sum(axis=1) > 1.0 + _REF_TOL)
    else:
        bad = np.any((pts < -_REF_TOL) | (pts > 1.0 + _REF_TOL), axis=1)
    if np.any(bad):
        raise ParameterError(f"Point outside the reference {kind.value}")


def reference_basis(
    kind: ElementKind,
    degree: int,
    points: np.ndarray,
    edge_degrees: Optional[Sequence[int]] = None,
    edge_signs: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hierarchic basis on a reference element at several points.

    Local order: vertices, edge modes per local edge (k = 2..q_e), interior modes.

    Returns:
        values (n_basis, n_points) and reference gradients
        (n_basis, n_points, dim); dim is 1 on the interval
    """
    if kind is ElementKind.INTERVAL:
        t = np.asarray(points, dtype=float).reshape(-1)
        vals, ders = interval_basis(degree, t)
        return vals, ders[..., None]
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n_edges = len(local_edges(kind))
    edge_degrees = tuple(edge_degrees) if edge_degrees is not None else (degree,) * n_edges
    edge_signs = tuple(edge_signs) if edge_signs is not None else (1,) * n_edges
    if kind is ElementKind.TRIANGLE:
        return _triangle_basis(degree, edge_degrees, edge_signs, pts)
    return _square_basis(degree, edge_degrees, edge_signs, pts)


def shape_eval(
    kind: ElementKind, degree: int, point: Union[float, Sequence[float]], derivative: int = 0
) -> np.ndarray:
    """
    Evaluate the full hierarchic basis of a reference element at one point.

    Args:
        kind: Reference element
        degree: Polynomial degree (total degree on triangles, tensor degree on squares)
        point: Reference coordinates
        derivative: 0 for values, 1 for reference gradients

    Returns:
        (n_basis,) values or (n_basis, dim) gradients

    Raises:
        ParameterError: For degree < 1, derivative > 1 or a point outside the element
    """
    kind = ElementKind(kind)
    if degree < 1:
        raise ParameterError(f"Degree must be >= 1, got {degree}")
    if derivative not in (0, 1):
        raise ParameterError("Only derivatives of order 0 and 1 are available")
    if kind is ElementKind.INTERVAL:
        pts = np.asarray(point, dtype=float).reshape(1)
    else:
        pts = np.asarray(point, dtype=float).reshape(1, 2)
    _check_inside(kind, pts)
    vals, grads = reference_basis(kind, degree, pts)
    return vals[:, 0] if derivative == 0 else grads[:, 0, :]


def _edge_key(a: int, b: int) -> Tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True, eq=False)
class FeSpace:
    """
    Conforming hp space on the FE mesh.

    Global DOFs are ordered with the outer DOFs first and the DOFs whose
    support touches the interface last. Entries -1 in the local maps mark
    eliminated Dirichlet DOFs.
    """

    mesh: Mesh2D
    degrees: DegreeVector
    edge_degrees: Dict[Tuple[int, int], int]
    edge_signs: Tuple[Tuple[int, ...], ...]
    element_edge_degrees: Tuple[Tuple[int, ...], ...]
    natural_local: Tuple[np.ndarray, ...]
    edge_natural: Dict[Tuple[int, int], np.ndarray]
    vertex_natural: np.ndarray
    perm: np.ndarray
    n_dofs: int
    n_outer: int

    @property
    def n_interface(self) -> int:
        return self.n_dofs - self.n_outer

    @property
    def n_natural(self) -> int:
        return len(self.perm)

    def local_dofs(self, eid: int) -> np.ndarray:
        return self.perm[self.natural_local[eid]]

    def element_basis(self, eid: int, ref_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Values and physical gradients of the local basis at reference points."""
        el = self.mesh.elements[eid]
        vals, ref_grads = reference_basis(
            el.kind,
            self.degrees[eid],
            ref_points,
            self.element_edge_degrees[eid],
            self.edge_signs[eid],
        )
        B, _ = el.affine_map
        return vals, ref_grads @ np.linalg.inv(B)

    def evaluate(self, coeffs: np.ndarray, eid: int, ref_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Values and gradients of a global FE function on element eid."""
        vals, grads = self.element_basis(eid, ref_points)
        local = _gather(coeffs, self.local_dofs(eid))
        return local @ vals, np.einsum("i,ipd->pd", local, grads)


def _gather(coeffs: np.ndarray, ids: np.ndarray) -> np.ndarray:
    out = np.zeros(len(ids))
    mask = ids >= 0
    out[mask] = np.asarray(coeffs)[ids[mask]]
    return out


def enumerate_fe_dofs(
    mesh: Mesh2D, degrees: DegreeVector, eliminate_dirichlet: bool = True
) -> FeSpace:
    """
    Number the DOFs of the conforming hp space on a FE mesh.

    Raises:
        ConsistencyError: If the degree vector does not match the mesh
    """
    if len(degrees) != mesh.n_elements:
        raise ConsistencyError(
            f"Degree vector has {len(degrees)} entries for {mesh.n_elements} elements"
        )
    edge_map = mesh.edge_map
    edge_degrees = {key: min(degrees[e] for e, _ in users) for key, users in edge_map.items()}

    used = np.zeros(mesh.n_vertices, dtype=bool)
    for el in mesh.elements:
        used[list(el.vertex_ids)] = True
    vertex_natural = np.arange(mesh.n_vertices)
    counter = mesh.n_vertices
    edge_natural: Dict[Tuple[int, int], np.ndarray] = {}
    for key in sorted(edge_map):
        q = edge_degrees[key]
        edge_natural[key] = np.arange(counter, counter + q - 1)
        counter += max(q - 1, 0)

    natural_local, signs, elem_edge_degrees = [], [], []
    for eid, el in enumerate(mesh.elements):
        ids = [vertex_natural[v] for v in el.vertex_ids]
        e_signs, e_degs = [], []
        for a, b in local_edges(el.kind):
            va, vb = el.vertex_ids[a], el.vertex_ids[b]
            key = _edge_key(va, vb)
            e_signs.append(1 if va < vb else -1)
            e_degs.append(edge_degrees[key])
            ids.extend(edge_natural[key])
        n_int = n_interior_modes(el.kind, degrees[eid])
        ids.extend(range(counter, counter + n_int))
        counter += n_int
        natural_local.append(np.array(ids, dtype=int))
        signs.append(tuple(e_signs))
        elem_edge_degrees.append(tuple(e_degs))
    n_natural = counter

    excluded = np.zeros(n_natural, dtype=bool)
    excluded[: mesh.n_vertices] = ~used
    interface = np.zeros(n_natural, dtype=bool)
    for key, tag in mesh.edge_tags.items():
        ids = np.concatenate(([key[0], key[1]], edge_natural[key])).astype(int)
        if tag is BoundaryTag.DIRICHLET and eliminate_dirichlet:
            excluded[ids] = True
        elif tag is BoundaryTag.INTERFACE:
            interface[ids] = True
    interface &= ~excluded
    outer_ids = np.nonzero(~excluded & ~interface)[0]
    inner_ids = np.nonzero(interface)[0]
    perm = np.full(n_natural, -1, dtype=int)
    perm[outer_ids] = np.arange(len(outer_ids))
    perm[inner_ids] = len(outer_ids) + np.arange(len(inner_ids))

    space = FeSpace(
        mesh=mesh,
        degrees=degrees,
        edge_degrees=edge_degrees,
        edge_signs=tuple(signs),
        element_edge_degrees=tuple(elem_edge_degrees),
        natural_local=tuple(natural_local),
        edge_natural=edge_natural,
        vertex_natural=vertex_natural,
        perm=perm,
        n_dofs=len(outer_ids) + len(inner_ids),
        n_outer=len(outer_ids),
    )
    logger.debug(
        "FE space: %d DOFs (%d interface), %d eliminated",
        space.n_dofs,
        space.n_interface,
        int(excluded.sum()),
    )
    return space


@dataclass(frozen=True, eq=False)
class BeTraceSpace:
    """
    Continuous piecewise polynomials on the closed panel loop.

    Panel-local order: start vertex, end vertex, bubbles. Global DOFs are
    ordered with the interface DOFs first. Unless built with keep_all, DOFs on
    Dirichlet panels are removed so that functions vanish there.
    """

    boundary: BoundaryMesh
    degrees: DegreeVector
    natural_local: Tuple[np.ndarray, ...]
    perm: np.ndarray
    n_dofs: int
    n_interface: int

    @property
    def n_outer(self) -> int:
        return self.n_dofs - self.n_interface

    def local_dofs(self, pid: int) -> np.ndarray:
        return self.perm[self.natural_local[pid]]

    def panel_basis(self, pid: int, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Values and d/dt derivatives of the local basis of panel pid."""
        return interval_basis(self.degrees[pid], t)

    def evaluate(self, coeffs: np.ndarray, pid: int, t: np.ndarray) -> np.ndarray:
        vals, _ = self.panel_basis(pid, t)
        return _gather(coeffs, self.local_dofs(pid)) @ vals


def enumerate_trace_dofs(
    boundary: BoundaryMesh, degrees: DegreeVector, keep_all: bool = False
) -> BeTraceSpace:
    """
    Number the DOFs of the BE trace space.

    Raises:
        ConsistencyError: If the degree vector does not match the panels
    """
    n = boundary.n_panels
    if len(degrees) != n:
        raise ConsistencyError(f"Degree vector has {len(degrees)} entries for {n} panels")
    counter = n
    natural_local = []
    for pid in range(n):
        p = degrees[pid]
        ids = [pid, (pid + 1) % n] + list(range(counter, counter + p - 1))
        counter += p - 1
        natural_local.append(np.array(ids, dtype=int))
    excluded = np.zeros(counter, dtype=bool)
    interface = np.zeros(counter, dtype=bool)
    for pid, panel in enumerate(boundary.panels):
        if panel.tag is BoundaryTag.DIRICHLET and not keep_all:
            excluded[natural_local[pid]] = True
        elif panel.tag is BoundaryTag.INTERFACE:
            interface[natural_local[pid]] = True
    interface &= ~excluded
    inner_ids = np.nonzero(interface)[0]
    outer_ids = np.nonzero(~excluded & ~interface)[0]
    perm = np.full(counter, -1, dtype=int)
    perm[inner_ids] = np.arange(len(inner_ids))
    perm[outer_ids] = len(inner_ids) + np.arange(len(outer_ids))
    return BeTraceSpace(
        boundary, degrees, tuple(natural_local), perm, len(inner_ids) + len(outer_ids), len(inner_ids)
    )


@dataclass(frozen=True, eq=False)
class BeFluxSpace:
    """Discontinuous piecewise polynomials with Legendre basis on each panel"""

    boundary: BoundaryMesh
    degrees: DegreeVector
    offsets: np.ndarray

    @property
    def n_dofs(self) -> int:
        return int(self.offsets[-1])

    def local_dofs(self, pid: int) -> np.ndarray:
        return np.arange(self.offsets[pid], self.offsets[pid + 1])

    def evaluate(self, coeffs: np.ndarray, pid: int, t: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs)[self.local_dofs(pid)] @ legendre_basis(self.degrees[pid], t)

    def mass_diagonal(self) -> np.ndarray:
        """Diagonal of the L2 mass matrix: h_J / (2k + 1)."""
        out = np.empty(self.n_dofs)
        for pid, panel in enumerate(self.boundary.panels):
            k = np.arange(self.degrees[pid] + 1)
            out[self.local_dofs(pid)] = panel.length / (2 * k + 1)
        return out


def enumerate_flux_dofs(boundary: BoundaryMesh, degrees: DegreeVector) -> BeFluxSpace:
    if len(degrees) != boundary.n_panels:
        raise ConsistencyError(
            f"Degree vector has {len(degrees)} entries for {boundary.n_panels} panels"
        )
    sizes = np.array([p + 1 for p in degrees], dtype=int)
    return BeFluxSpace(boundary, degrees, np.concatenate(([0], np.cumsum(sizes))))


SpaceType = Union[FeSpace, BeTraceSpace, BeFluxSpace]


def enumerate_dofs(
    source: Union[Mesh2D, BoundaryMesh],
    degrees: DegreeVector,
    flux: bool = False,
    eliminate_dirichlet: bool = True,
) -> SpaceType:
    """FE space for a Mesh2D; trace space (or flux space) for a BoundaryMesh."""
    if isinstance(source, Mesh2D):
        return enumerate_fe_dofs(source, degrees, eliminate_dirichlet)
    if flux:
        return enumerate_flux_dofs(source, degrees)
    return enumerate_trace_dofs(source, degrees, keep_all=not eliminate_dirichlet)


def _project_bubbles(t, w, residual, q) -> np.ndarray:
    vals, _ = interval_basis(q, t)
    bub = vals[2:]
    gram = (bub * w) @ bub.T
    return np.linalg.solve(gram, bub @ (w * residual))


def _interpolate_fe(space: FeSpace, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    mesh = space.mesh
    natural = np.zeros(space.n_natural)
    fv = np.asarray(f(mesh.vertices), dtype=float)
    natural[: mesh.n_vertices] = fv
    for key, q in space.edge_degrees.items():
        if q < 2:
            continue
        a, b = mesh.vertices[key[0]], mesh.vertices[key[1]]
        rule = gauss_legendre(q + 3)
        t = rule.nodes
        pts = a + t[:, None] * (b - a)
        residual = np.asarray(f(pts), dtype=float) - (fv[key[0]] * (1.0 - t) + fv[key[1]] * t)
        natural[space.edge_natural[key]] = _project_bubbles(t, rule.weights, residual, q)
    for eid, el in enumerate(mesh.elements):
        n_int = n_interior_modes(el.kind, space.degrees[eid])
        if n_int == 0:
            continue
        rule = element_rule(el.kind, space.degrees[eid] + 2)
        vals, _ = space.element_basis(eid, rule.nodes)
        ids = space.natural_local[eid]
        nb = len(ids) - n_int
        residual = np.asarray(f(el.to_physical(rule.nodes)), dtype=float) - natural[ids[:nb]] @ vals[:nb]
        inner = vals[nb:]
        gram = (inner * rule.weights) @ inner.T
        natural[ids[nb:]] = np.linalg.solve(gram, inner @ (rule.weights * residual))
    coeffs = np.zeros(space.n_dofs)
    keep = space.perm >= 0
    coeffs[space.perm[keep]] = natural[keep]
    return coeffs


def _interpolate_trace(space: BeTraceSpace, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    boundary = space.boundary
    natural = np.zeros(len(space.perm))
    fv = np.asarray(f(boundary.vertices), dtype=float)
    natural[: boundary.n_panels] = fv
    for pid, panel in enumerate(boundary.panels):
        q = space.degrees[pid]
        if q < 2:
            continue
        rule = gauss_legendre(q + 3)
        t = rule.nodes
        ids = space.natural_local[pid]
        residual = np.asarray(f(panel.point(t)), dtype=float) - (
            natural[ids[0]] * (1.0 - t) + natural[ids[1]] * t
        )
        natural[ids[2:]] = _project_bubbles(t, rule.weights, residual, q)
    coeffs = np.zeros(space.n_dofs)
    keep = space.perm >= 0
    coeffs[space.perm[keep]] = natural[keep]
    return coeffs


def project_flux(
    space: BeFluxSpace, g: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> np.ndarray:
    """Panelwise L2 projection of g(points, normals) onto the flux space."""
    coeffs = np.zeros(space.n_dofs)
    for pid, panel in enumerate(space.boundary.panels):
        p = space.degrees[pid]
        rule = gauss_legendre(p + 4)
        pts = panel.point(rule.nodes)
        normals = np.broadcast_to(panel.outward_normal, pts.shape)
        values = np.asarray(g(pts, normals), dtype=float)
        basis = legendre_basis(p, rule.nodes)
        k = np.arange(p + 1)
        coeffs[space.local_dofs(pid)] = (2 * k + 1) * (basis @ (rule.weights * values))
    return coeffs


def interpolate(space: SpaceType, function: Callable) -> np.ndarray:
    """
    Projection-based interpolant.

    Vertex values are matched exactly; edge and interior coefficients come from
    local L2 projections. For the flux space the function takes
    (points, normals) and the result is the panelwise L2 projection.
    """
    if isinstance(space, FeSpace):
        return _interpolate_fe(space, function)
    if isinstance(space, BeTraceSpace):
        return _interpolate_trace(space, function)
    if isinstance(space, BeFluxSpace):
        return project_flux(space, function)
    raise ParameterError(f"Cannot interpolate into {type(space).__name__}")


def dump_dofs(space: SpaceType) -> str:
    """Plain-text DOF map: one line per element or panel with its global DOF ids."""
    if isinstance(space, FeSpace):
        header, count = "FE", space.mesh.n_elements
    elif isinstance(space, BeTraceSpace):
        header, count = "TRACE", space.boundary.n_panels
    else:
        header, count = "FLUX", space.boundary.n_panels
    lines = [f"{header} {space.n_dofs} {count}"]
    for i in range(count):
        ids = " ".join(str(int(d)) for d in space.local_dofs(i))
        lines.append(f"{i} p={space.degrees[i]} {ids}")
    return "\n".join(lines) + "\n"
