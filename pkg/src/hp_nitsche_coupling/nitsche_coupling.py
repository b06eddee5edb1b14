"""
Nitsche coupling across the FE/BE interface.

Blocks are assembled on the overlay of the two interface trace meshes and
indexed in the global numbering: FE DOFs first, BE trace DOFs after them.
The jump is [v] = v_FE - v_BE and the flux is the one-sided FE flux
kappa grad v_FE . n, with n the outward normal of the FE subdomain.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.sparse import coo_matrix, csr_matrix

try:
    from hp_nitsche_coupling.bem_operators import SteklovMatrix
    from hp_nitsche_coupling.fem_assembly import Coefficient, pairing_order
    from hp_nitsche_coupling.geometry_mesh import (
        Element,
        InterfaceOverlay,
        OverlaySegment,
        local_edges,
        reference_edge_points,
    )
    from hp_nitsche_coupling.hp_spaces import BeTraceSpace, FeSpace, reference_basis
    from hp_nitsche_coupling.models import (
        BoundaryTag,
        ConsistencyError,
        ElementKind,
        ParameterError,
    )
    from hp_nitsche_coupling.quadrature import element_rule, gauss_legendre
except ImportError:
    from .bem_operators import SteklovMatrix
    from .fem_assembly import Coefficient, pairing_order
    from .geometry_mesh import (
        Element,
        InterfaceOverlay,
        OverlaySegment,
        local_edges,
        reference_edge_points,
    )
    from .hp_spaces import BeTraceSpace, FeSpace, reference_basis
    from .models import BoundaryTag, ConsistencyError, ElementKind, ParameterError
    from .quadrature import element_rule, gauss_legendre

# Configure logging
logger = logging.getLogger(__name__)

RECOMMENDED_ETA0 = 2.0


def trace_constant(element: Element, interface_edges: Sequence[int], degree: int) -> float:
    """
    Sharp constant G_K of the polynomial trace inequality on the interface part of K.

    G_K = (p+1)(p+2)/2 |J|/|K| on triangles and (p+1)^2 |J|/|K| on
    parallelograms, where J is the union of the given edges.

    Raises:
        ParameterError: If an edge index is not an edge of the element
    """
    n_edges = len(local_edges(element.kind))
    edges = list(interface_edges)
    if not edges or any(not 0 <= e < n_edges for e in edges):
        raise ParameterError(f"Interface edges {edges} are not edges of the {element.kind.value}")
    if degree < 1:
        raise ParameterError(f"Degree must be >= 1, got {degree}")
    length = float(sum(element.edge_lengths[e] for e in set(edges)))
    if element.kind is ElementKind.TRIANGLE:
        factor = (degree + 1) * (degree + 2) / 2.0
    else:
        factor = (degree + 1) ** 2
    return factor * length / element.area


def sharp_trace_ratio(element: Element, edge: int, degree: int) -> float:
    """
    Largest ratio ||psi||^2_{L2(edge)} / ||psi||^2_{L2(K)} over the polynomial space of K.

    Computed as the top eigenvalue of the edge mass matrix relative to the
    element mass matrix.
    """
    kind = element.kind
    vol_rule = element_rule(kind, degree + 2)
    vals, _ = reference_basis(kind, degree, vol_rule.nodes)
    mass = (vals * vol_rule.weights) @ vals.T * abs(element.jacobian_det)
    edge_rule = gauss_legendre(degree + 2)
    evals, _ = reference_basis(kind, degree, reference_edge_points(kind, edge, edge_rule.nodes))
    edge_mass = (evals * edge_rule.weights) @ evals.T * element.edge_lengths[edge]
    return float(eigh(edge_mass, mass, eigvals_only=True)[-1])


def interface_edges_by_element(space: FeSpace) -> Dict[int, List[int]]:
    found: Dict[int, List[int]] = defaultdict(list)
    for eid, le in space.mesh.boundary_edges(BoundaryTag.INTERFACE):
        found[eid].append(le)
    return dict(found)


def compute_stabilization(
    overlay: InterfaceOverlay,
    space: FeSpace,
    eta0: float = RECOMMENDED_ETA0,
    coefficient: Optional[Coefficient] = None,
) -> InterfaceOverlay:
    """
    Overlay carrying eta = eta0 kappa_K G_K on every segment of element K.

    Raises:
        ParameterError: For eta0 <= 0
    """
    if not eta0 > 0.0:
        raise ParameterError(f"eta0 must be positive, got {eta0}")
    if eta0 <= 1.0:
        logger.warning(
            "eta0 = %s does not exceed 1; the discrete problem may be indefinite", eta0
        )
    elif eta0 < RECOMMENDED_ETA0:
        logger.warning("eta0 = %s is below the recommended value %s", eta0, RECOMMENDED_ETA0)
    coefficient = coefficient or Coefficient.from_mesh(space.mesh)
    edges = interface_edges_by_element(space)
    cache: Dict[int, float] = {}
    values = []
    for seg in overlay.segments:
        eid = seg.fe_element
        if eid not in cache:
            if eid not in edges:
                raise ConsistencyError(f"Overlay refers to element {eid} without interface edges")
            g = trace_constant(space.mesh.elements[eid], edges[eid], space.degrees[eid])
            cache[eid] = eta0 * coefficient[eid] * g
        values.append(cache[eid])
    return overlay.with_eta(values)


@dataclass(frozen=True)
class SegmentTraces:
    """FE and BE basis traces at the quadrature points of one overlay segment"""

    weights: np.ndarray
    fe_ids: np.ndarray
    be_ids: np.ndarray
    fe_values: np.ndarray
    fe_flux: np.ndarray
    be_values: np.ndarray
    fe_ref: np.ndarray
    be_t: np.ndarray


def segment_traces(
    overlay: InterfaceOverlay,
    seg: OverlaySegment,
    fe_space: FeSpace,
    be_space: BeTraceSpace,
    coefficient: Coefficient,
) -> SegmentTraces:
    eid, pid = seg.fe_element, seg.be_panel
    el = fe_space.mesh.elements[eid]
    panel = be_space.boundary.panels[pid]
    rule = gauss_legendre(pairing_order(fe_space.degrees[eid], be_space.degrees[pid]))
    pts = overlay.segment_points(seg, rule.nodes)
    ref = el.to_reference(pts)
    fe_vals, fe_grads = fe_space.element_basis(eid, ref)
    normal = el.edge_normal(seg.fe_edge)
    t = panel.parameter(pts)
    be_vals, _ = be_space.panel_basis(pid, t)
    return SegmentTraces(
        weights=rule.weights * overlay.segment_length(seg),
        fe_ids=fe_space.local_dofs(eid),
        be_ids=be_space.local_dofs(pid),
        fe_values=fe_vals,
        fe_flux=coefficient[eid] * (fe_grads @ normal),
        be_values=be_vals,
        fe_ref=ref,
        be_t=t,
    )


def _coupling_ids(tr: SegmentTraces, n_fe: int) -> np.ndarray:
    be = np.where(tr.be_ids >= 0, tr.be_ids + n_fe, -1)
    return np.concatenate((tr.fe_ids, be))


def _accumulate(rows, cols, data, ids: np.ndarray, local: np.ndarray) -> None:
    keep = np.nonzero(ids >= 0)[0]
    gi = ids[keep]
    rows.append(np.repeat(gi, len(gi)))
    cols.append(np.tile(gi, len(gi)))
    data.append(local[np.ix_(keep, keep)].ravel())


def _to_csr(rows, cols, data, n: int) -> csr_matrix:
    if not rows:
        return csr_matrix((n, n))
    return coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


def _check_overlay(overlay: InterfaceOverlay) -> None:
    if not overlay.segments:
        raise ConsistencyError("Interface overlay has no segments")


def assemble_penalty(
    overlay: InterfaceOverlay,
    fe_space: FeSpace,
    be_space: BeTraceSpace,
    coefficient: Optional[Coefficient] = None,
) -> csr_matrix:
    """
    Penalty block <eta [u], [v]> over the interface.

    Raises:
        ConsistencyError: For an empty overlay
    """
    _check_overlay(overlay)
    coefficient = coefficient or Coefficient.from_mesh(fe_space.mesh)
    n_fe = fe_space.n_dofs
    rows, cols, data = [], [], []
    for seg in overlay.segments:
        tr = segment_traces(overlay, seg, fe_space, be_space, coefficient)
        jump = np.vstack((tr.fe_values, -tr.be_values))
        local = (jump * (seg.eta * tr.weights)) @ jump.T
        _accumulate(rows, cols, data, _coupling_ids(tr, n_fe), local)
    return _to_csr(rows, cols, data, n_fe + be_space.n_dofs)


def assemble_flux_coupling(
    overlay: InterfaceOverlay,
    fe_space: FeSpace,
    be_space: BeTraceSpace,
    coefficient: Optional[Coefficient] = None,
) -> csr_matrix:
    """Consistency block -<q(u), [v]> - <[u], q(v)> with the one-sided FE flux q."""
    _check_overlay(overlay)
    coefficient = coefficient or Coefficient.from_mesh(fe_space.mesh)
    n_fe = fe_space.n_dofs
    rows, cols, data = [], [], []
    for seg in overlay.segments:
        tr = segment_traces(overlay, seg, fe_space, be_space, coefficient)
        jump = np.vstack((tr.fe_values, -tr.be_values))
        flux = np.vstack((tr.fe_flux, np.zeros_like(tr.be_values)))
        cross = (flux * tr.weights) @ jump.T
        _accumulate(rows, cols, data, _coupling_ids(tr, n_fe), -(cross + cross.T))
    return _to_csr(rows, cols, data, n_fe + be_space.n_dofs)


@dataclass(frozen=True, eq=False)
class Lifting:
    """Elementwise vector field L(v); elements away from the interface carry zero"""

    fe_space: FeSpace
    degrees: Dict[int, int]
    coefficients: Dict[int, np.ndarray]

    def evaluate(self, eid: int, ref_points: np.ndarray) -> np.ndarray:
        """Field values (n_points, 2) on element eid."""
        if eid not in self.coefficients:
            return np.zeros((len(ref_points), 2))
        kind = self.fe_space.mesh.elements[eid].kind
        vals, _ = reference_basis(kind, self.degrees[eid], ref_points)
        return vals.T @ self.coefficients[eid]


def split_vector(v: np.ndarray, fe_space: FeSpace, be_space: BeTraceSpace) -> Tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    if v.shape != (fe_space.n_dofs + be_space.n_dofs,):
        raise ConsistencyError(
            f"Vector of length {v.shape} does not match {fe_space.n_dofs} + {be_space.n_dofs} DOFs"
        )
    return v[: fe_space.n_dofs], v[fe_space.n_dofs :]


def lifting_apply(
    v: np.ndarray,
    overlay: InterfaceOverlay,
    fe_space: FeSpace,
    be_space: BeTraceSpace,
    degree_drop: int = 0,
) -> Lifting:
    """
    Lifting of the interface jump: (L(v), psi)_K = <[v], psi . n>_{K on Gamma_I}
    for all psi in [R_p'(K)]^2 with p' = max(1, p_K - degree_drop).
    """
    v_fe, v_be = split_vector(v, fe_space, be_space)
    kappa = Coefficient.from_mesh(fe_space.mesh)
    by_element: Dict[int, List[OverlaySegment]] = defaultdict(list)
    for seg in overlay.segments:
        by_element[seg.fe_element].append(seg)
    degrees, coeffs = {}, {}
    for eid, segs in by_element.items():
        el = fe_space.mesh.elements[eid]
        p = max(1, fe_space.degrees[eid] - degree_drop)
        rule = element_rule(el.kind, p + 2)
        theta, _ = reference_basis(el.kind, p, rule.nodes)
        mass = (theta * rule.weights) @ theta.T * abs(el.jacobian_det)
        rhs = np.zeros((theta.shape[0], 2))
        for seg in segs:
            tr = segment_traces(overlay, seg, fe_space, be_space, kappa)
            jump = (
                _local(v_fe, tr.fe_ids) @ tr.fe_values - _local(v_be, tr.be_ids) @ tr.be_values
            )
            basis, _ = reference_basis(el.kind, p, tr.fe_ref)
            normal = el.edge_normal(seg.fe_edge)
            rhs += np.outer(basis @ (tr.weights * jump), normal)
        degrees[eid] = p
        coeffs[eid] = np.linalg.solve(mass, rhs)
    return Lifting(fe_space, degrees, coeffs)


def _local(coeffs: np.ndarray, ids: np.ndarray) -> np.ndarray:
    out = np.zeros(len(ids))
    mask = ids >= 0
    out[mask] = coeffs[ids[mask]]
    return out


class CouplingForms:
    """
    The discrete bilinear form in its assembled version a_hp and in the
    lifting version a_tilde used by the stability analysis.
    """

    def __init__(
        self,
        fe_space: FeSpace,
        be_space: BeTraceSpace,
        overlay: InterfaceOverlay,
        stiffness: csr_matrix,
        steklov: SteklovMatrix,
        coefficient: Optional[Coefficient] = None,
    ):
        self.fe_space = fe_space
        self.be_space = be_space
        self.overlay = overlay
        self.coefficient = coefficient or Coefficient.from_mesh(fe_space.mesh)
        self.stiffness = stiffness
        self.steklov = steklov
        self.penalty = assemble_penalty(overlay, fe_space, be_space, self.coefficient)
        self.flux = assemble_flux_coupling(overlay, fe_space, be_space, self.coefficient)

    @property
    def n_dofs(self) -> int:
        return self.fe_space.n_dofs + self.be_space.n_dofs

    def diagonal_part(self, u: np.ndarray, w: np.ndarray) -> float:
        """(kappa grad u1, grad w1) + <S_hat u2, w2>."""
        u1, u2 = split_vector(u, self.fe_space, self.be_space)
        w1, w2 = split_vector(w, self.fe_space, self.be_space)
        return float(u1 @ (self.stiffness @ w1) + u2 @ self.steklov.S_hat @ w2)

    def a_hp(self, u: np.ndarray, w: np.ndarray) -> float:
        return self.diagonal_part(u, w) + float(u @ (self.flux @ w) + u @ (self.penalty @ w))

    def gradient_lifting_product(self, u: np.ndarray, lifting: Lifting) -> float:
        """(kappa grad u1, L) over the elements carrying the lifting."""
        u1, _ = split_vector(u, self.fe_space, self.be_space)
        total = 0.0
        for eid in lifting.coefficients:
            el = self.fe_space.mesh.elements[eid]
            rule = element_rule(el.kind, max(self.fe_space.degrees[eid], lifting.degrees[eid]) + 2)
            _, grads = self.fe_space.evaluate(u1, eid, rule.nodes)
            field = lifting.evaluate(eid, rule.nodes)
            total += self.coefficient[eid] * float(
                np.sum((grads * field).sum(axis=1) * rule.weights) * abs(el.jacobian_det)
            )
        return total

    def a_tilde(self, u: np.ndarray, w: np.ndarray, degree_drop: int = 0) -> float:
        lift_u = lifting_apply(u, self.overlay, self.fe_space, self.be_space, degree_drop)
        lift_w = lifting_apply(w, self.overlay, self.fe_space, self.be_space, degree_drop)
        return (
            self.diagonal_part(u, w)
            - self.gradient_lifting_product(u, lift_w)
            - self.gradient_lifting_product(w, lift_u)
            + float(u @ (self.penalty @ w))
        )

    def lifting_norm(self, lifting: Lifting) -> float:
        """||kappa^(1/2) L||_{L2}."""
        total = 0.0
        for eid in lifting.coefficients:
            el = self.fe_space.mesh.elements[eid]
            rule = element_rule(el.kind, lifting.degrees[eid] + 2)
            field = lifting.evaluate(eid, rule.nodes)
            total += self.coefficient[eid] * float(
                np.sum((field**2).sum(axis=1) * rule.weights) * abs(el.jacobian_det)
            )
        return float(np.sqrt(total))

    def jump_norm_sq(self, u: np.ndarray, weight_scale: float = 1.0, eta0_shift: float = 0.0) -> float:
        """
        Sum over segments of the weighted squared jump.

        The weight is weight_scale * eta - eta0_shift * kappa * G on each segment.
        """
        u1, u2 = split_vector(u, self.fe_space, self.be_space)
        edges = interface_edges_by_element(self.fe_space)
        total = 0.0
        for seg in self.overlay.segments:
            tr = segment_traces(self.overlay, seg, self.fe_space, self.be_space, self.coefficient)
            jump = _local(u1, tr.fe_ids) @ tr.fe_values - _local(u2, tr.be_ids) @ tr.be_values
            weight = weight_scale * seg.eta
            if eta0_shift:
                eid = seg.fe_element
                g = trace_constant(self.fe_space.mesh.elements[eid], edges[eid], self.fe_space.degrees[eid])
                weight -= eta0_shift * self.coefficient[eid] * g
            total += weight * float(np.sum(tr.weights * jump**2))
        return total

    def coercivity_margin(self, u: np.ndarray, delta: float) -> float:
        """
        a_tilde(u, u) - (delta - 1)/delta ||u||^2 in the norm weighted by
        eta - delta kappa G; non-negative whenever eta > delta kappa G.
        """
        if not delta > 1.0:
            raise ParameterError(f"delta must exceed 1, got {delta}")
        norm_sq = self.diagonal_part(u, u) + self.jump_norm_sq(u, eta0_shift=delta)
        return self.a_tilde(u, u) - (delta - 1.0) / delta * norm_sq


def formulation_gap(forms: CouplingForms, u: np.ndarray, w: np.ndarray, degree_drop: int = 0) -> float:
    """|a_hp(u, w) - a_tilde(u, w)|; zero up to rounding for the full lifting space."""
    return abs(forms.a_hp(u, w) - forms.a_tilde(u, w, degree_drop))
