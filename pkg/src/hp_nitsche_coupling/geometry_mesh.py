"""
Meshes of the FE subdomain, panel meshes of the BE boundary, geometric corner
refinement, interface trace partitions and their non-matching overlay.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

try:
    from hp_nitsche_coupling.models import (
        BoundaryTag,
        ConsistencyError,
        ElementKind,
        GradingParams,
        ParameterError,
    )
except ImportError:
    from .models import BoundaryTag, ConsistencyError, ElementKind, GradingParams, ParameterError

# Configure logging
logger = logging.getLogger(__name__)

# Absolute tolerance for identifying points; all shipped domains have unit size
GEOMETRY_TOL = 1e-12
# Resolution of the vertex deduplication grid
VERTEX_KEY_SCALE = 1e11
DEFAULT_SHAPE_TAU = 60.0


class Point2(NamedTuple):
    """Point of the plane"""

    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def _as_point_array(p: Union[Point2, Sequence[float], np.ndarray]) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"Non-finite coordinates {p}")
    return arr


def geometric_partition_1d(sigma: float, layers: int) -> np.ndarray:
    """
    Breakpoints x_0 = 0 < x_1 < ... < x_{n+1} = 1 with x_j = sigma**(n+1-j).

    Args:
        sigma: Grading ratio in (0, 1)
        layers: Number of geometric layers n >= 0

    Raises:
        ParameterError: For sigma outside (0, 1) or negative layers
    """
    if isinstance(layers, bool) or not isinstance(layers, (int, np.integer)):
        raise ParameterError(f"layers must be an integer, got {layers!r}")
    if layers < 0:
        raise ParameterError(f"layers must be non-negative, got {layers}")
    if not (isinstance(sigma, (int, float, np.floating)) and 0.0 < float(sigma) < 1.0):
        raise ParameterError(f"sigma must lie in (0, 1), got {sigma!r}")
    n = int(layers)
    powers = float(sigma) ** np.arange(n, -1, -1, dtype=float)
    return np.concatenate(([0.0], powers))


def uniform_partition_1d(length: float, h: float) -> np.ndarray:
    """Equidistant fractions of an arc of given length with spacing at most h."""
    if not h > 0.0:
        raise ParameterError(f"Mesh size must be positive, got {h}")
    count = max(1, math.ceil(length / h - 1e-9))
    return np.linspace(0.0, 1.0, count + 1)


def two_sided_partition_1d(sigma: float, layers: int) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """
    Geometric partition of [0, 1] graded toward both endpoints.

    The interval is cut at its midpoint and each half carries the geometric
    partition toward its outer endpoint.

    Returns:
        Breakpoints and, per interval, its layer number j >= 1 counted from the
        nearest endpoint
    """
    half = 0.5 * geometric_partition_1d(sigma, layers)
    breaks = np.concatenate((half, 1.0 - half[-2::-1]))
    n_half = len(half) - 1
    left = tuple(range(1, n_half + 1))
    return breaks, left + left[::-1]


class TaggedArc(NamedTuple):
    """Straight piece of a boundary with its boundary condition"""

    start: Point2
    end: Point2
    tag: BoundaryTag

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.end.x - self.start.x, self.end.y - self.start.y])

    @property
    def length(self) -> float:
        return float(np.hypot(*self.vector))

    def point(self, t: Union[float, np.ndarray]) -> np.ndarray:
        """Points at arc fractions t."""
        t = np.asarray(t, dtype=float)
        return self.start.as_array() + t[..., None] * self.vector

    def parameter(self, p: np.ndarray) -> float:
        v = self.vector
        return float(np.dot(np.asarray(p) - self.start.as_array(), v) / np.dot(v, v))

    def contains_segment(self, a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
        """True when both endpoints lie on the arc."""
        v = self.vector
        length = np.hypot(*v)
        for p in (a, b):
            d = np.asarray(p) - self.start.as_array()
            if abs(v[0] * d[1] - v[1] * d[0]) / length > tol:
                return False
            t = np.dot(d, v) / length**2
            if t < -tol or t > 1.0 + tol:
                return False
        return True

    def same_curve(self, other: "TaggedArc", tol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.start, other.start, atol=tol)
            and np.allclose(self.end, other.end, atol=tol)
        )


# Local edges (as pairs of local vertex indices) per element kind
_LOCAL_EDGES = {
    ElementKind.TRIANGLE: ((0, 1), (1, 2), (2, 0)),
    ElementKind.PARALLELOGRAM: ((0, 1), (1, 2), (2, 3), (3, 0)),
}

_REFERENCE_VERTICES = {
    ElementKind.TRIANGLE: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    ElementKind.PARALLELOGRAM: np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
}


def local_edges(kind: ElementKind) -> Tuple[Tuple[int, int], ...]:
    return _LOCAL_EDGES[kind]


def reference_vertices(kind: ElementKind) -> np.ndarray:
    return _REFERENCE_VERTICES[kind]


def reference_edge_points(kind: ElementKind, edge: int, t: np.ndarray) -> np.ndarray:
    """Reference coordinates of the points at fractions t along local edge `edge`."""
    a_idx, b_idx = _LOCAL_EDGES[kind][edge]
    ref = _REFERENCE_VERTICES[kind]
    t = np.asarray(t, dtype=float)
    return ref[a_idx] + t[:, None] * (ref[b_idx] - ref[a_idx])


@dataclass(frozen=True, eq=False)
class Element:
    """
    Affine triangle or parallelogram of the FE mesh.

    Vertices are counter-clockwise. Polynomial degrees are not stored here;
    they live in a DegreeVector keyed by element index.
    """

    kind: ElementKind
    vertex_ids: Tuple[int, ...]
    vertices: np.ndarray
    kappa: float = 1.0
    layer_index: Optional[int] = None

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "vertex_ids", tuple(int(i) for i in self.vertex_ids))
        if self.kind not in _LOCAL_EDGES:
            raise ParameterError(f"Unsupported element kind {self.kind}")
        nv = len(_LOCAL_EDGES[self.kind])
        if verts.shape != (nv, 2) or len(self.vertex_ids) != nv:
            raise ParameterError(f"A {self.kind.value} needs {nv} vertices")
        if not np.all(np.isfinite(verts)):
            raise ParameterError("Element vertices must be finite")
        if not self.kappa > 0.0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if self.kind is ElementKind.PARALLELOGRAM:
            defect = verts[0] - verts[1] + verts[2] - verts[3]
            if np.max(np.abs(defect)) > 1e-12 * max(self.diameter, 1.0):
                raise ParameterError("Quadrilateral is not a parallelogram")
        if self.jacobian_det <= 0.0:
            raise ParameterError("Element is degenerate or clockwise oriented")

    @property
    def affine_map(self) -> Tuple[np.ndarray, np.ndarray]:
        """Matrix B and offset b with F_K(xi) = B xi + b."""
        v = self.vertices
        B = np.column_stack((v[1] - v[0], v[-1] - v[0]))
        return B, v[0].copy()

    @property
    def jacobian_det(self) -> float:
        B, _ = self.affine_map
        return float(B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0])

    @property
    def area(self) -> float:
        det = abs(self.jacobian_det)
        return 0.5 * det if self.kind is ElementKind.TRIANGLE else det

    @property
    def diameter(self) -> float:
        v = self.vertices
        diff = v[:, None, :] - v[None, :, :]
        return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))

    @property
    def edge_lengths(self) -> np.ndarray:
        v = self.vertices
        return np.array([np.hypot(*(v[b] - v[a])) for a, b in _LOCAL_EDGES[self.kind]])

    @property
    def rho(self) -> float:
        """Diameter of the largest inscribed circle."""
        if self.kind is ElementKind.TRIANGLE:
            return 4.0 * self.area / float(np.sum(self.edge_lengths))
        return self.area / float(np.max(self.edge_lengths))

    @property
    def shape_ratio(self) -> float:
        return self.diameter / self.rho

    def to_physical(self, ref: np.ndarray) -> np.ndarray:
        B, b = self.affine_map
        return np.asarray(ref, dtype=float) @ B.T + b

    def to_reference(self, points: np.ndarray) -> np.ndarray:
        B, b = self.affine_map
        return np.linalg.solve(B, (np.asarray(points, dtype=float) - b).T).T

    def edge_endpoints(self, edge: int) -> Tuple[np.ndarray, np.ndarray]:
        a, b = _LOCAL_EDGES[self.kind][edge]
        return self.vertices[a], self.vertices[b]

    def edge_normal(self, edge: int) -> np.ndarray:
        """Outward unit normal of a local edge."""
        a, b = self.edge_endpoints(edge)
        t = b - a
        return np.array([t[1], -t[0]]) / np.hypot(*t)

    def corner_map(self, corner: int, ref: np.ndarray) -> np.ndarray:
        """
        Affine map of the reference element anchored at local vertex `corner`.

        The reference origin goes to the corner and the reference axes follow the
        two edges leaving it, keeping the orientation.
        """
        v = self.vertices
        nv = len(v)
        c = v[corner]
        e1 = v[(corner + 1) % nv] - c
        if self.kind is ElementKind.TRIANGLE:
            e2 = v[(corner + 2) % nv] - c
        else:
            e2 = v[(corner - 1) % nv] - c
        ref = np.asarray(ref, dtype=float)
        return c + ref[:, :1] * e1 + ref[:, 1:2] * e2


class VertexPool:
    """Deduplicating vertex store keyed by rounded coordinates."""

    def __init__(self, initial: Optional[np.ndarray] = None):
        self._coords: List[np.ndarray] = []
        self._index: Dict[Tuple[int, int], int] = {}
        if initial is not None:
            for p in np.asarray(initial, dtype=float):
                self.add(p)

    @staticmethod
    def _key(p: np.ndarray) -> Tuple[int, int]:
        return (int(round(p[0] * VERTEX_KEY_SCALE)), int(round(p[1] * VERTEX_KEY_SCALE)))

    def add(self, p: np.ndarray) -> int:
        p = np.asarray(p, dtype=float)
        key = self._key(p)
        idx = self._index.get(key)
        if idx is None:
            idx = len(self._coords)
            self._index[key] = idx
            self._coords.append(p.copy())
        return idx

    def __len__(self) -> int:
        return len(self._coords)

    def coords(self, ids: Iterable[int]) -> np.ndarray:
        return np.array([self._coords[i] for i in ids])

    def array(self) -> np.ndarray:
        return np.array(self._coords).reshape(-1, 2)


def _make_element(
    pool: VertexPool,
    kind: ElementKind,
    points: np.ndarray,
    kappa: float = 1.0,
    layer: Optional[int] = None,
) -> Element:
    ids = tuple(pool.add(p) for p in points)
    return Element(kind, ids, pool.coords(ids), kappa, layer)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """
    Conforming mesh of the FE subdomain.

    `arcs` describe the complete boundary of the subdomain; every boundary edge
    takes the tag of the arc it lies on.
    """

    vertices: np.ndarray
    elements: Tuple[Element, ...]
    arcs: Tuple[TaggedArc, ...]
    corners: Tuple[Point2, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "corners", tuple(Point2(*c) for c in self.corners))
        if not self.elements:
            raise ParameterError("A mesh needs at least one element")
        nv = len(self.vertices)
        for el in self.elements:
            if min(el.vertex_ids) < 0 or max(el.vertex_ids) >= nv:
                raise ConsistencyError("Element references an unknown vertex")

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def h_max(self) -> float:
        return max(el.diameter for el in self.elements)

    @property
    def total_area(self) -> float:
        return float(sum(el.area for el in self.elements))

    @cached_property
    def edge_map(self) -> Dict[Tuple[int, int], List[Tuple[int, int]]]:
        """Sorted global vertex pair -> list of (element, local edge)."""
        edges: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
        for eid, el in enumerate(self.elements):
            for le, (a, b) in enumerate(_LOCAL_EDGES[el.kind]):
                va, vb = el.vertex_ids[a], el.vertex_ids[b]
                key = (va, vb) if va < vb else (vb, va)
                edges.setdefault(key, []).append((eid, le))
        return edges

    @cached_property
    def edge_tags(self) -> Dict[Tuple[int, int], BoundaryTag]:
        """Tags of boundary edges lying on a boundary arc."""
        tags: Dict[Tuple[int, int], BoundaryTag] = {}
        for key, users in self.edge_map.items():
            if len(users) != 1:
                continue
            a, b = self.vertices[key[0]], self.vertices[key[1]]
            for arc in self.arcs:
                if arc.contains_segment(a, b):
                    tags[key] = arc.tag
                    break
        return tags

    def boundary_edges(self, tag: BoundaryTag) -> List[Tuple[int, int]]:
        """(element, local edge) of all boundary edges with the given tag."""
        found = [self.edge_map[key][0] for key, t in self.edge_tags.items() if t is tag]
        return sorted(found)

    @property
    def layer_tags(self) -> Tuple[Optional[int], ...]:
        return tuple(el.layer_index for el in self.elements)

    def with_elements(self, pool: VertexPool, elements: Sequence[Element]) -> "Mesh2D":
        return Mesh2D(pool.array(), tuple(elements), self.arcs, self.corners)


def check_regular(
    mesh: Mesh2D, tau: float = DEFAULT_SHAPE_TAU, expected_area: Optional[float] = None
) -> None:
    """
    Verify conformity and shape regularity.

    A hanging node leaves edges used by a single element away from the boundary
    arcs, so counting edge users detects non-conforming meshes.

    Raises:
        ConsistencyError: When the mesh is not regular
    """
    perimeter = 0.0
    for key, users in mesh.edge_map.items():
        if len(users) > 2:
            raise ConsistencyError(f"Edge {key} is shared by {len(users)} elements")
        if len(users) == 1:
            if key not in mesh.edge_tags:
                p, q = mesh.vertices[key[0]], mesh.vertices[key[1]]
                raise ConsistencyError(
                    f"Edge {tuple(p)}-{tuple(q)} is neither interior nor on the boundary "
                    "(hanging node)"
                )
            perimeter += float(np.hypot(*(mesh.vertices[key[1]] - mesh.vertices[key[0]])))
    arc_length = sum(arc.length for arc in mesh.arcs)
    if mesh.arcs and abs(perimeter - arc_length) > 1e-9 * arc_length:
        raise ConsistencyError(
            f"Boundary edges cover length {perimeter:.12g}, arcs have {arc_length:.12g}"
        )
    worst = max(el.shape_ratio for el in mesh.elements)
    if worst > tau:
        raise ConsistencyError(f"Shape regularity violated: h/rho = {worst:.3g} > {tau:.3g}")
    if expected_area is not None:
        area = mesh.total_area
        if abs(area - expected_area) > 1e-12 * expected_area:
            raise ConsistencyError(f"Mesh area {area!r} differs from {expected_area!r}")


def refine_uniform(mesh: Mesh2D, levels: int = 1) -> Mesh2D:
    """Split every element into four by edge midpoints, `levels` times."""
    if levels < 0:
        raise ParameterError("levels must be non-negative")
    for _ in range(levels):
        pool = VertexPool(mesh.vertices)
        children: List[Element] = []
        for el in mesh.elements:
            v = el.vertices
            if el.kind is ElementKind.TRIANGLE:
                m01, m12, m20 = (v[0] + v[1]) / 2, (v[1] + v[2]) / 2, (v[2] + v[0]) / 2
                parts = [
                    (v[0], m01, m20),
                    (m01, v[1], m12),
                    (m20, m12, v[2]),
                    (m01, m12, m20),
                ]
            else:
                m01, m12 = (v[0] + v[1]) / 2, (v[1] + v[2]) / 2
                m23, m30 = (v[2] + v[3]) / 2, (v[3] + v[0]) / 2
                c = v.mean(axis=0)
                parts = [
                    (v[0], m01, c, m30),
                    (m01, v[1], m12, c),
                    (c, m12, v[2], m23),
                    (m30, c, m23, v[3]),
                ]
            for pts in parts:
                children.append(_make_element(pool, el.kind, np.array(pts), el.kappa))
        mesh = mesh.with_elements(pool, children)
    return mesh


def _square_corner_pattern(sigma: float, n: int) -> List[Tuple[ElementKind, np.ndarray, int]]:
    """Geometric refinement of the unit square toward the origin."""
    s = [sigma**k for k in range(n + 2)]
    tri, par = ElementKind.TRIANGLE, ElementKind.PARALLELOGRAM
    cells: List[Tuple[ElementKind, np.ndarray, int]] = []

    def mirrored(pts):
        return np.asarray(pts, dtype=float)[::-1, ::-1]

    for k in range(n):
        s0, s1, s2 = s[k], s[k + 1], s[k + 2]
        layer = n - k
        cells.append((par, np.array([(s1, s1), (s0, s1), (s0, s0), (s1, s0)]), layer))
        if k < n - 1:
            strip = [
                [(s1, 0.0), (s0, 0.0), (s1, s2)],
                [(s1, s2), (s0, 0.0), (s0, s1)],
                [(s1, s2), (s0, s1), (s1, s1)],
            ]
            for pts in strip:
                cells.append((tri, np.array(pts), layer))
                cells.append((tri, mirrored(pts), layer))
        else:
            pts = [(s1, 0.0), (s0, 0.0), (s0, s1), (s1, s1)]
            cells.append((par, np.array(pts), layer))
            cells.append((par, mirrored(pts), layer))
    sn = s[n]
    cells.append((par, np.array([(0.0, 0.0), (sn, 0.0), (sn, sn), (0.0, sn)]), 0))
    return cells


def _triangle_corner_pattern(sigma: float, n: int) -> List[Tuple[ElementKind, np.ndarray, int]]:
    """Geometric refinement of the unit triangle toward the origin."""
    s = [sigma**k for k in range(n + 1)]
    tri = ElementKind.TRIANGLE
    cells: List[Tuple[ElementKind, np.ndarray, int]] = []
    for k in range(n):
        s0, s1 = s[k], s[k + 1]
        layer = n - k
        cells.append((tri, np.array([(s1, 0.0), (s0, 0.0), (0.0, s0)]), layer))
        cells.append((tri, np.array([(s1, 0.0), (0.0, s0), (0.0, s1)]), layer))
    sn = s[n]
    cells.append((tri, np.array([(0.0, 0.0), (sn, 0.0), (0.0, sn)]), 0))
    return cells


def corner_pattern(
    kind: ElementKind, sigma: float, layers: int
) -> List[Tuple[ElementKind, np.ndarray, int]]:
    """
    Reference sub-elements of a geometric refinement toward the reference origin.

    Returns (kind, reference vertices, layer) triples; layer 0 is the terminal
    element touching the corner and layer n the outermost ring.
    """
    geometric_partition_1d(sigma, layers)
    if kind is ElementKind.PARALLELOGRAM:
        return _square_corner_pattern(sigma, layers)
    if kind is ElementKind.TRIANGLE:
        return _triangle_corner_pattern(sigma, layers)
    raise ParameterError(f"No corner pattern for {kind}")


def _close_hanging_nodes(
    pool: VertexPool, elements: List[Element], candidates: np.ndarray, candidate_ids: List[int]
) -> List[Element]:
    """Fan-triangulate elements that received a vertex inside one of their edges."""
    closed: List[Element] = []
    for el in elements:
        v = el.vertices
        polygon: List[int] = []
        hanging: List[int] = []
        for le, (a, b) in enumerate(_LOCAL_EDGES[el.kind]):
            polygon.append(el.vertex_ids[a])
            if len(candidate_ids) == 0:
                continue
            pa, pb = v[a], v[b]
            t_vec = pb - pa
            length2 = float(np.dot(t_vec, t_vec))
            d = candidates - pa
            cross = np.abs(t_vec[0] * d[:, 1] - t_vec[1] * d[:, 0]) / math.sqrt(length2)
            t = d @ t_vec / length2
            on_edge = np.nonzero((cross < 1e-10) & (t > 1e-10) & (t < 1.0 - 1e-10))[0]
            if len(on_edge) > 1:
                raise ConsistencyError(
                    f"Edge {tuple(pa)}-{tuple(pb)} carries {len(on_edge)} hanging nodes"
                )
            if len(on_edge) == 1:
                hid = candidate_ids[on_edge[0]]
                polygon.append(hid)
                hanging.append(hid)
        if not hanging:
            closed.append(el)
            continue
        start = polygon.index(hanging[0])
        ring = polygon[start:] + polygon[:start]
        for i in range(1, len(ring) - 1):
            ids = (ring[0], ring[i], ring[i + 1])
            closed.append(Element(ElementKind.TRIANGLE, ids, pool.coords(ids), el.kappa, None))
        logger.debug("Closed %d hanging node(s) by splitting a %s", len(hanging), el.kind.value)
    return closed


def refine_geometric_corner(
    mesh: Mesh2D, corner: Union[Point2, Sequence[float]], grading: GradingParams
) -> Mesh2D:
    """
    Grade the mesh geometrically toward a corner.

    Every element having the corner as a vertex is replaced by the layered
    pattern; neighbours that receive hanging nodes are split into triangles.

    Raises:
        ParameterError: If the corner is not a mesh vertex
        ConsistencyError: If the closure cannot restore conformity
    """
    c = _as_point_array(corner)
    touching: Dict[int, int] = {}
    for eid, el in enumerate(mesh.elements):
        dist = np.hypot(*(el.vertices - c).T)
        hit = np.nonzero(dist < GEOMETRY_TOL * 100)[0]
        if len(hit):
            touching[eid] = int(hit[0])
    if not touching:
        raise ParameterError(f"Corner {tuple(c)} is not a vertex of the mesh")

    n_old = mesh.n_vertices
    pool = VertexPool(mesh.vertices)
    refined: List[Element] = []
    untouched: List[Element] = []
    for eid, el in enumerate(mesh.elements):
        if eid not in touching:
            untouched.append(el)
            continue
        for kind, ref_pts, layer in corner_pattern(el.kind, grading.sigma, grading.layers):
            phys = el.corner_map(touching[eid], ref_pts)
            refined.append(_make_element(pool, kind, phys, el.kappa, layer))

    new_ids = list(range(n_old, len(pool)))
    candidates = pool.coords(new_ids) if new_ids else np.zeros((0, 2))
    closed = _close_hanging_nodes(pool, untouched, candidates, new_ids)
    result = mesh.with_elements(pool, refined + closed)
    logger.debug(
        "Graded %d element(s) at %s: sigma=%s, layers=%d, %d elements total",
        len(touching),
        tuple(c),
        grading.sigma,
        grading.layers,
        result.n_elements,
    )
    return result


@dataclass(frozen=True)
class Panel:
    """Straight boundary element of the BE boundary"""

    start: np.ndarray
    end: np.ndarray
    tag: BoundaryTag
    arc_index: int
    layer_index: Optional[int] = None

    @property
    def vector(self) -> np.ndarray:
        return self.end - self.start

    @property
    def length(self) -> float:
        return float(np.hypot(*self.vector))

    @property
    def tangent(self) -> np.ndarray:
        return self.vector / self.length

    @property
    def outward_normal(self) -> np.ndarray:
        t = self.tangent
        return np.array([t[1], -t[0]])

    def point(self, t: Union[float, np.ndarray]) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.start + t[..., None] * self.vector

    def parameter(self, points: np.ndarray) -> np.ndarray:
        v = self.vector
        return (np.asarray(points) - self.start) @ v / float(np.dot(v, v))


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """
    Closed counter-clockwise polygon of panels around the BE subdomain.

    Panel i ends where panel i+1 starts; panel i starts at loop vertex i.
    """

    panels: Tuple[Panel, ...]
    arcs: Tuple[TaggedArc, ...]

    def __post_init__(self):
        object.__setattr__(self, "panels", tuple(self.panels))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        if not self.panels:
            raise ParameterError("A boundary mesh needs at least one panel")
        for i, panel in enumerate(self.panels):
            if not panel.length > 0.0:
                raise ParameterError(f"Panel {i} has zero length")
            nxt = self.panels[(i + 1) % len(self.panels)]
            if np.max(np.abs(panel.end - nxt.start)) > GEOMETRY_TOL * 100:
                raise ConsistencyError(f"Panels {i} and {i + 1} are not connected")
            arc = self.arcs[panel.arc_index]
            if not arc.contains_segment(panel.start, panel.end):
                raise ConsistencyError(f"Panel {i} leaves its arc")
        if self.signed_area <= 0.0:
            raise ConsistencyError("Boundary polygon must be counter-clockwise")

    @property
    def n_panels(self) -> int:
        return len(self.panels)

    @property
    def vertices(self) -> np.ndarray:
        return np.array([p.start for p in self.panels])

    @property
    def signed_area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        area = 0.5 * np.sum(cross)
        return np.array(
            [np.sum((v[:, 0] + w[:, 0]) * cross), np.sum((v[:, 1] + w[:, 1]) * cross)]
        ) / (6.0 * area)

    @property
    def diameter(self) -> float:
        v = self.vertices
        diff = v[:, None, :] - v[None, :, :]
        return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))

    @property
    def h_max(self) -> float:
        return max(p.length for p in self.panels)

    @property
    def interface_arcs(self) -> Tuple[TaggedArc, ...]:
        return tuple(a for a in self.arcs if a.tag is BoundaryTag.INTERFACE)

    @property
    def layer_tags(self) -> Tuple[Optional[int], ...]:
        return tuple(p.layer_index for p in self.panels)

    def transformed(self, scale: float, center: np.ndarray) -> "BoundaryMesh":
        """Copy mapped by x -> center + scale * (x - center)."""

        def f(p):
            return center + scale * (np.asarray(p, dtype=float) - center)

        arcs = tuple(
            TaggedArc(Point2(*f(a.start.as_array())), Point2(*f(a.end.as_array())), a.tag)
            for a in self.arcs
        )
        panels = tuple(replace(p, start=f(p.start), end=f(p.end)) for p in self.panels)
        return BoundaryMesh(panels, arcs)


def build_boundary_mesh(
    arcs: Sequence[TaggedArc],
    fractions: Sequence[np.ndarray],
    layers: Optional[Sequence[Sequence[Optional[int]]]] = None,
) -> BoundaryMesh:
    """
    Panels from breakpoints given as fractions of each arc.

    Args:
        arcs: Counter-clockwise arcs of the BE boundary
        fractions: Per arc, increasing breakpoints from 0 to 1
        layers: Optional per arc, per panel layer numbers
    """
    if len(fractions) != len(arcs):
        raise ParameterError("Need one breakpoint list per arc")
    panels: List[Panel] = []
    for ai, (arc, fr) in enumerate(zip(arcs, fractions)):
        fr = np.asarray(fr, dtype=float)
        if fr[0] != 0.0 or fr[-1] != 1.0 or np.any(np.diff(fr) <= 0.0):
            raise ParameterError(f"Breakpoints of arc {ai} must increase from 0 to 1")
        pts = arc.point(fr)
        pts[0] = arc.start.as_array()
        pts[-1] = arc.end.as_array()
        for j in range(len(fr) - 1):
            layer = None if layers is None else layers[ai][j]
            panels.append(Panel(pts[j], pts[j + 1], arc.tag, ai, layer))
    return BoundaryMesh(tuple(panels), tuple(arcs))


def uniform_boundary_mesh(arcs: Sequence[TaggedArc], h: float) -> BoundaryMesh:
    return build_boundary_mesh(arcs, [uniform_partition_1d(a.length, h) for a in arcs])


def graded_boundary_mesh(arcs: Sequence[TaggedArc], sigma: float, layers: int) -> BoundaryMesh:
    """Every arc split in two halves, each graded toward its arc endpoint."""
    breaks, tags = two_sided_partition_1d(sigma, layers)
    return build_boundary_mesh(arcs, [breaks] * len(arcs), [tags] * len(arcs))


def _cartesian_mesh(
    xs: np.ndarray, ys: np.ndarray, keep, arcs: Sequence[TaggedArc], corners, kappa: float
) -> Mesh2D:
    pool = VertexPool()
    elements: List[Element] = []
    for j in range(len(ys) - 1):
        for i in range(len(xs) - 1):
            cx, cy = 0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])
            if not keep(cx, cy):
                continue
            pts = np.array(
                [(xs[i], ys[j]), (xs[i + 1], ys[j]), (xs[i + 1], ys[j + 1]), (xs[i], ys[j + 1])]
            )
            elements.append(_make_element(pool, ElementKind.PARALLELOGRAM, pts, kappa))
    return Mesh2D(pool.array(), tuple(elements), tuple(arcs), tuple(corners))


def _breaks(blocks: Sequence[Tuple[float, float, float]]) -> np.ndarray:
    parts = [a + (b - a) * uniform_partition_1d(b - a, h) for a, b, h in blocks]
    return np.unique(np.concatenate(parts).round(15))


def _arc(a: Tuple[float, float], b: Tuple[float, float], tag: BoundaryTag) -> TaggedArc:
    return TaggedArc(Point2(*a), Point2(*b), tag)


def build_square_decomposition(
    fe_h: float = 0.25,
    be_h: float = 0.2,
    strip_h: Optional[float] = 0.5,
    kappa: float = 1.0,
) -> Tuple[Mesh2D, BoundaryMesh]:
    """
    Square [-1,1]^2 with the BE block [-1,0]x[-1/2,1/2] on its left side.

    The FE part is meshed by rectangles of width fe_h; the strips above and
    below the BE block use height strip_h (fe_h when None). The defaults give
    32 elements and 20 panels with 12 FE and 15 BE elements on the interface.

    Raises:
        ParameterError: For non-positive mesh sizes
    """
    strip_h = fe_h if strip_h is None else strip_h
    for name, h in (("fe_h", fe_h), ("be_h", be_h), ("strip_h", strip_h)):
        if not h > 0.0:
            raise ParameterError(f"{name} must be positive, got {h}")
    D, N, I = BoundaryTag.DIRICHLET, BoundaryTag.NEUMANN, BoundaryTag.INTERFACE
    xs = _breaks([(-1.0, 0.0, fe_h), (0.0, 1.0, fe_h)])
    ys = _breaks([(-1.0, -0.5, strip_h), (-0.5, 0.5, fe_h), (0.5, 1.0, strip_h)])
    fe_arcs = [
        _arc((-1.0, -1.0), (1.0, -1.0), N),
        _arc((1.0, -1.0), (1.0, 1.0), N),
        _arc((1.0, 1.0), (-1.0, 1.0), N),
        _arc((-1.0, 1.0), (-1.0, 0.5), D),
        _arc((-1.0, -0.5), (-1.0, -1.0), D),
        _arc((-1.0, -0.5), (0.0, -0.5), I),
        _arc((0.0, -0.5), (0.0, 0.5), I),
        _arc((0.0, 0.5), (-1.0, 0.5), I),
    ]
    corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (0.0, -0.5), (0.0, 0.5)]
    mesh = _cartesian_mesh(
        xs, ys, lambda x, y: not (x < 0.0 and abs(y) < 0.5), fe_arcs, corners, kappa
    )
    be_arcs = [
        _arc((-1.0, -0.5), (0.0, -0.5), I),
        _arc((0.0, -0.5), (0.0, 0.5), I),
        _arc((0.0, 0.5), (-1.0, 0.5), I),
        _arc((-1.0, 0.5), (-1.0, -0.5), D),
    ]
    boundary = uniform_boundary_mesh(be_arcs, be_h)
    logger.debug(
        "Square decomposition: %d elements, %d panels", mesh.n_elements, boundary.n_panels
    )
    return mesh, boundary


LSHAPE_BE_ARCS = {
    1: (
        ((-0.5, -0.5), (0.5, -0.5), BoundaryTag.INTERFACE),
        ((0.5, -0.5), (0.5, 0.0), BoundaryTag.INTERFACE),
        ((0.5, 0.0), (0.0, 0.0), BoundaryTag.DIRICHLET),
        ((0.0, 0.0), (0.0, 0.5), BoundaryTag.DIRICHLET),
        ((0.0, 0.5), (-0.5, 0.5), BoundaryTag.INTERFACE),
        ((-0.5, 0.5), (-0.5, -0.5), BoundaryTag.INTERFACE),
    ),
    2: (
        ((-1.0, -1.0), (0.0, 0.0), BoundaryTag.INTERFACE),
        ((0.0, 0.0), (0.0, 1.0), BoundaryTag.DIRICHLET),
        ((0.0, 1.0), (-1.0, 1.0), BoundaryTag.NEUMANN),
        ((-1.0, 1.0), (-1.0, -1.0), BoundaryTag.NEUMANN),
    ),
}


def build_lshape_decomposition(
    configuration: int,
    fe_h: float = 0.5,
    be_h: float = 0.4,
    kappa: float = 1.0,
) -> Tuple[Mesh2D, BoundaryMesh]:
    """
    L-shaped domain [-1,1]^2 minus [0,1]^2 split into FE and BE parts.

    Configuration 1 puts the reentrant corner inside the BE part
    ([-1/2,1/2]^2 minus [0,1/2]^2); configuration 2 splits the domain along the
    diagonal from (-1,-1) to the origin. For configuration 2, fe_h is the edge
    length targeted by uniform refinement of the two coarse elements.

    Raises:
        ParameterError: For an unknown configuration or non-positive sizes
    """
    if configuration not in LSHAPE_BE_ARCS:
        raise ParameterError(f"Unknown L-shape configuration {configuration!r}")
    for name, h in (("fe_h", fe_h), ("be_h", be_h)):
        if not h > 0.0:
            raise ParameterError(f"{name} must be positive, got {h}")
    D, N, I = BoundaryTag.DIRICHLET, BoundaryTag.NEUMANN, BoundaryTag.INTERFACE
    corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (-1.0, 1.0)]
    if configuration == 1:
        blocks = [(-1.0, -0.5, fe_h), (-0.5, 0.0, fe_h), (0.0, 0.5, fe_h), (0.5, 1.0, fe_h)]
        xs = ys = _breaks(blocks)
        fe_arcs = [
            _arc((-1.0, -1.0), (1.0, -1.0), N),
            _arc((1.0, -1.0), (1.0, 0.0), N),
            _arc((1.0, 0.0), (0.5, 0.0), D),
            _arc((0.0, 0.5), (0.0, 1.0), D),
            _arc((0.0, 1.0), (-1.0, 1.0), N),
            _arc((-1.0, 1.0), (-1.0, -1.0), N),
            _arc((-0.5, -0.5), (0.5, -0.5), I),
            _arc((0.5, -0.5), (0.5, 0.0), I),
            _arc((0.0, 0.5), (-0.5, 0.5), I),
            _arc((-0.5, 0.5), (-0.5, -0.5), I),
        ]

        def keep(x, y):
            return not ((x > 0.0 and y > 0.0) or (abs(x) < 0.5 and abs(y) < 0.5))

        mesh = _cartesian_mesh(xs, ys, keep, fe_arcs, corners, kappa)
    else:
        pool = VertexPool()
        coarse = [
            _make_element(
                pool, ElementKind.TRIANGLE, np.array([(-1.0, -1.0), (0.0, -1.0), (0.0, 0.0)]), kappa
            ),
            _make_element(
                pool,
                ElementKind.PARALLELOGRAM,
                np.array([(0.0, -1.0), (1.0, -1.0), (1.0, 0.0), (0.0, 0.0)]),
                kappa,
            ),
        ]
        fe_arcs = [
            _arc((-1.0, -1.0), (1.0, -1.0), N),
            _arc((1.0, -1.0), (1.0, 0.0), N),
            _arc((1.0, 0.0), (0.0, 0.0), D),
            _arc((0.0, 0.0), (-1.0, -1.0), I),
        ]
        mesh = Mesh2D(pool.array(), tuple(coarse), tuple(fe_arcs), tuple(corners))
        levels = max(0, math.ceil(math.log2(1.0 / fe_h) - 1e-9))
        mesh = refine_uniform(mesh, levels)
    be_arcs = [_arc(a, b, tag) for a, b, tag in LSHAPE_BE_ARCS[configuration]]
    boundary = uniform_boundary_mesh(be_arcs, be_h)
    logger.debug(
        "L-shape configuration %d: %d elements, %d panels",
        configuration,
        mesh.n_elements,
        boundary.n_panels,
    )
    return mesh, boundary


@dataclass(frozen=True)
class TraceInterval:
    """Subinterval of an interface arc with its parent element or panel"""

    arc: int
    t0: float
    t1: float
    parent: int
    local_edge: int = -1


@dataclass(frozen=True, eq=False)
class TracePartition:
    """Ordered partition of the interface arcs into parent-referencing intervals"""

    arcs: Tuple[TaggedArc, ...]
    intervals: Tuple[TraceInterval, ...]

    def breakpoints(self, arc: int) -> np.ndarray:
        own = [iv for iv in self.intervals if iv.arc == arc]
        return np.array([own[0].t0] + [iv.t1 for iv in own])

    def on_arc(self, arc: int) -> List[TraceInterval]:
        return [iv for iv in self.intervals if iv.arc == arc]

    @property
    def total_length(self) -> float:
        return float(sum(a.length for a in self.arcs))

    @classmethod
    def from_breakpoints(
        cls, breaks: Sequence[float], arc: Optional[TaggedArc] = None
    ) -> "TracePartition":
        """Partition of a single arc (default: unit segment) with parents 0, 1, ..."""
        if arc is None:
            arc = _arc((0.0, 0.0), (1.0, 0.0), BoundaryTag.INTERFACE)
        b = np.asarray(breaks, dtype=float)
        intervals = tuple(TraceInterval(0, float(b[i]), float(b[i + 1]), i) for i in range(len(b) - 1))
        return cls((arc,), intervals)


def _validate_coverage(partition: TracePartition, source: str) -> None:
    tol = 1e-10
    for ai in range(len(partition.arcs)):
        own = partition.on_arc(ai)
        if not own:
            raise ConsistencyError(f"{source}: interface arc {ai} is not covered")
        if abs(own[0].t0) > tol or abs(own[-1].t1 - 1.0) > tol:
            raise ConsistencyError(f"{source}: interface arc {ai} is not fully covered")
        for prev, nxt in zip(own[:-1], own[1:]):
            if abs(prev.t1 - nxt.t0) > tol:
                raise ConsistencyError(f"{source}: gap on interface arc {ai} at {prev.t1:.6g}")


def trace_partition(
    source: Union[Mesh2D, BoundaryMesh], interface: Sequence[TaggedArc]
) -> TracePartition:
    """
    Partition of the interface arcs induced by a FE mesh or a panel mesh.

    Parents are element indices (with the local edge) for a Mesh2D and panel
    indices for a BoundaryMesh.

    Raises:
        ConsistencyError: If no interface edges are tagged or the arcs are not covered
    """
    arcs = tuple(interface)
    if not arcs:
        raise ConsistencyError("No interface arcs given")
    found: List[TraceInterval] = []

    def locate(a: np.ndarray, b: np.ndarray, parent: int, local_edge: int) -> None:
        for ai, arc in enumerate(arcs):
            if arc.contains_segment(a, b):
                t0, t1 = arc.parameter(a), arc.parameter(b)
                if t0 > t1:
                    t0, t1 = t1, t0
                found.append(TraceInterval(ai, t0, t1, parent, local_edge))
                return

    if isinstance(source, Mesh2D):
        name = "FE mesh"
        for key, tag in source.edge_tags.items():
            if tag is not BoundaryTag.INTERFACE:
                continue
            eid, le = source.edge_map[key][0]
            a, b = source.elements[eid].edge_endpoints(le)
            locate(a, b, eid, le)
    else:
        name = "boundary mesh"
        for pid, panel in enumerate(source.panels):
            if panel.tag is BoundaryTag.INTERFACE:
                locate(panel.start, panel.end, pid, -1)
    if not found:
        raise ConsistencyError(f"{name} has no edges tagged as interface")
    found.sort(key=lambda iv: (iv.arc, iv.t0))
    partition = TracePartition(arcs, tuple(found))
    _validate_coverage(partition, name)
    return partition


@dataclass(frozen=True)
class OverlaySegment:
    """Common refinement cell of the FE and BE interface partitions"""

    arc: int
    t0: float
    t1: float
    fe_element: int
    fe_edge: int
    be_panel: int
    eta: float = 0.0


@dataclass(frozen=True, eq=False)
class InterfaceOverlay:
    """Merged partition of the interface carrying both parents per segment"""

    arcs: Tuple[TaggedArc, ...]
    segments: Tuple[OverlaySegment, ...]
    total_length: float = field(default=0.0)

    def segment_length(self, seg: OverlaySegment) -> float:
        return (seg.t1 - seg.t0) * self.arcs[seg.arc].length

    def segment_points(self, seg: OverlaySegment, t: np.ndarray) -> np.ndarray:
        """Physical points at local fractions t of a segment."""
        return self.arcs[seg.arc].point(seg.t0 + (seg.t1 - seg.t0) * np.asarray(t))

    @property
    def eta(self) -> np.ndarray:
        return np.array([s.eta for s in self.segments])

    def with_eta(self, values: Sequence[float]) -> "InterfaceOverlay":
        values = list(values)
        if len(values) != len(self.segments):
            raise ConsistencyError("Need one stabilization value per overlay segment")
        segments = tuple(replace(s, eta=float(v)) for s, v in zip(self.segments, values))
        return InterfaceOverlay(self.arcs, segments, self.total_length)


def overlay(part_a: TracePartition, part_b: TracePartition) -> InterfaceOverlay:
    """
    Common refinement of two partitions of the same interface.

    Breakpoints closer than 1e-12 |Gamma_I| are merged. part_a supplies the FE
    parents and part_b the BE parents.

    Raises:
        ConsistencyError: If the partitions live on different curves
    """
    if len(part_a.arcs) != len(part_b.arcs) or not all(
        a.same_curve(b) for a, b in zip(part_a.arcs, part_b.arcs)
    ):
        raise ConsistencyError("Partitions do not cover the same interface")
    total = part_a.total_length
    segments: List[OverlaySegment] = []
    for ai, arc in enumerate(part_a.arcs):
        own_a, own_b = part_a.on_arc(ai), part_b.on_arc(ai)
        tol = 1e-12 * total / arc.length
        merged: List[float] = [0.0]
        for t in np.sort(np.concatenate((part_a.breakpoints(ai), part_b.breakpoints(ai)))):
            if t - merged[-1] > tol and 1.0 - t > tol:
                merged.append(float(t))
        merged.append(1.0)
        ends_a = np.array([iv.t1 for iv in own_a])
        ends_b = np.array([iv.t1 for iv in own_b])
        for t0, t1 in zip(merged[:-1], merged[1:]):
            mid = 0.5 * (t0 + t1)
            pa = own_a[min(int(np.searchsorted(ends_a, mid)), len(own_a) - 1)]
            pb = own_b[min(int(np.searchsorted(ends_b, mid)), len(own_b) - 1)]
            segments.append(OverlaySegment(ai, t0, t1, pa.parent, pa.local_edge, pb.parent))
    logger.debug("Interface overlay with %d segments", len(segments))
    return InterfaceOverlay(part_a.arcs, tuple(segments), total)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def dump_mesh(mesh: Mesh2D, boundary: Optional[BoundaryMesh] = None) -> str:
    """Plain-text dump with VERTICES, ELEMENTS, PANELS and TAGS sections."""
    lines = [f"VERTICES {mesh.n_vertices}"]
    lines += [f"{i} {_fmt(x)} {_fmt(y)}" for i, (x, y) in enumerate(mesh.vertices)]
    lines.append(f"ELEMENTS {mesh.n_elements}")
    for i, el in enumerate(mesh.elements):
        layer = "-" if el.layer_index is None else str(el.layer_index)
        ids = " ".join(str(v) for v in el.vertex_ids)
        lines.append(f"{i} {el.kind.value} {ids} {layer} {_fmt(el.kappa)}")
    panels = boundary.panels if boundary is not None else ()
    lines.append(f"PANELS {len(panels)}")
    for i, p in enumerate(panels):
        coords = " ".join(_fmt(c) for c in (*p.start, *p.end))
        lines.append(f"{i} {coords} {p.tag.value}")
    tags = sorted(mesh.edge_tags.items())
    lines.append(f"TAGS {len(tags)}")
    lines += [f"{a} {b} {tag.value}" for (a, b), tag in tags]
    return "\n".join(lines) + "\n"
