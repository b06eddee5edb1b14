"""
Assembly of the FE stiffness matrix and load vector on the FE subdomain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

try:
    from hp_nitsche_coupling.geometry_mesh import Mesh2D, reference_edge_points
    from hp_nitsche_coupling.hp_spaces import FeSpace
    from hp_nitsche_coupling.models import BoundaryTag, ConsistencyError, ParameterError
    from hp_nitsche_coupling.quadrature import element_rule, gauss_legendre
except ImportError:
    from .geometry_mesh import Mesh2D, reference_edge_points
    from .hp_spaces import FeSpace
    from .models import BoundaryTag, ConsistencyError, ParameterError
    from .quadrature import element_rule, gauss_legendre

# Configure logging
logger = logging.getLogger(__name__)

VolumeFunction = Callable[[np.ndarray], np.ndarray]
FluxFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def pairing_order(p: int, q: int) -> int:
    """Gauss points per direction for a pairing of degrees p and q."""
    return p + q + 2


@dataclass(frozen=True)
class Coefficient:
    """Piecewise constant diffusion coefficient, one value per element"""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) == 0:
            raise ParameterError("Coefficient needs one value per element")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise ParameterError("Coefficient values must be positive and finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mesh(cls, mesh: Mesh2D) -> "Coefficient":
        return cls(np.array([el.kappa for el in mesh.elements]))

    @classmethod
    def constant(cls, n_elements: int, value: float = 1.0) -> "Coefficient":
        return cls(np.full(n_elements, float(value)))

    @property
    def kappa_min(self) -> float:
        return float(self.values.min())

    @property
    def kappa_max(self) -> float:
        return float(self.values.max())

    def __getitem__(self, eid: int) -> float:
        return float(self.values[eid])


def _check_coefficient(space: FeSpace, coefficient: Optional[Coefficient]) -> Coefficient:
    if coefficient is None:
        return Coefficient.from_mesh(space.mesh)
    if len(coefficient.values) != space.mesh.n_elements:
        raise ConsistencyError("Coefficient does not match the number of elements")
    return coefficient


def assemble_stiffness(space: FeSpace, coefficient: Optional[Coefficient] = None) -> csr_matrix:
    """
    Stiffness matrix (kappa grad u, grad v) on the FE subdomain.

    Element contributions are collected in COO format in element order and
    summed on conversion to CSR.
    """
    coefficient = _check_coefficient(space, coefficient)
    rows, cols, data = [], [], []
    for eid, el in enumerate(space.mesh.elements):
        p = space.degrees[eid]
        rule = element_rule(el.kind, p + 2)
        _, grads = space.element_basis(eid, rule.nodes)
        weights = rule.weights * abs(el.jacobian_det)
        local = coefficient[eid] * np.einsum("ipd,jpd,p->ij", grads, grads, weights)
        ids = space.local_dofs(eid)
        keep = np.nonzero(ids >= 0)[0]
        gi = ids[keep]
        rows.append(np.repeat(gi, len(gi)))
        cols.append(np.tile(gi, len(gi)))
        data.append(local[np.ix_(keep, keep)].ravel())
    n = space.n_dofs
    if rows:
        matrix = coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()
    else:
        matrix = csr_matrix((n, n))
    logger.debug("Assembled FE stiffness: %d DOFs, %d nonzeros", n, matrix.nnz)
    return matrix


def assemble_load(
    space: FeSpace,
    f: Optional[VolumeFunction] = None,
    g: Optional[FluxFunction] = None,
) -> np.ndarray:
    """
    Load vector (f, v) plus <g, v> on the Neumann edges of the FE mesh.

    Args:
        space: FE space
        f: Volume source f(points) or None for f = 0
        g: Neumann data g(points, normals) or None for g = 0
    """
    load = np.zeros(space.n_dofs)
    mesh = space.mesh
    if f is not None:
        for eid, el in enumerate(mesh.elements):
            p = space.degrees[eid]
            rule = element_rule(el.kind, p + 3)
            vals, _ = space.element_basis(eid, rule.nodes)
            fx = np.asarray(f(el.to_physical(rule.nodes)), dtype=float)
            _scatter(load, space.local_dofs(eid), vals @ (rule.weights * fx) * abs(el.jacobian_det))
    if g is not None:
        for eid, le in mesh.boundary_edges(BoundaryTag.NEUMANN):
            el = mesh.elements[eid]
            rule = gauss_legendre(space.degrees[eid] + 3)
            ref = reference_edge_points(el.kind, le, rule.nodes)
            pts = el.to_physical(ref)
            a, b = el.edge_endpoints(le)
            length = float(np.hypot(*(b - a)))
            normals = np.broadcast_to(el.edge_normal(le), pts.shape)
            gx = np.asarray(g(pts, normals), dtype=float)
            vals, _ = space.element_basis(eid, ref)
            _scatter(load, space.local_dofs(eid), vals @ (rule.weights * gx) * length)
    return load


def _scatter(target: np.ndarray, ids: np.ndarray, values: np.ndarray) -> None:
    keep = ids >= 0
    np.add.at(target, ids[keep], values[keep])
