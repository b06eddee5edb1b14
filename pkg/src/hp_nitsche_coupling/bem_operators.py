"""
Galerkin boundary element operators of the 2D Laplacian on the BE boundary.

Single layer V and double layer K are assembled with test functions in the
flux space and trial functions in the trace space; the hypersingular operator
comes from the integration-by-parts identity <W u, v> = <V u', v'> with
arc-length derivatives. Far panel pairs are integrated in one vectorized pass,
near pairs with singularity-adapted product rules.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

try:
    from hp_nitsche_coupling.geometry_mesh import BoundaryMesh, Panel
    from hp_nitsche_coupling.hp_spaces import (
        BeFluxSpace,
        BeTraceSpace,
        DegreeVector,
        enumerate_flux_dofs,
        enumerate_trace_dofs,
        interpolate,
        interval_basis,
        legendre_basis,
        project_flux,
    )
    from hp_nitsche_coupling.models import (
        BoundaryTag,
        CapacityError,
        ConsistencyError,
        PanelRelation,
        ParameterError,
        SingularEvaluationError,
        UnsupportedFeatureError,
    )
    from hp_nitsche_coupling.quadrature import gauss_legendre, panel_pair_rule
except ImportError:
    from .geometry_mesh import BoundaryMesh, Panel
    from .hp_spaces import (
        BeFluxSpace,
        BeTraceSpace,
        DegreeVector,
        enumerate_flux_dofs,
        enumerate_trace_dofs,
        interpolate,
        interval_basis,
        legendre_basis,
        project_flux,
    )
    from .models import (
        BoundaryTag,
        CapacityError,
        ConsistencyError,
        PanelRelation,
        ParameterError,
        SingularEvaluationError,
        UnsupportedFeatureError,
    )
    from .quadrature import gauss_legendre, panel_pair_rule

# Configure logging
logger = logging.getLogger(__name__)

INV_2PI = 1.0 / (2.0 * math.pi)
# Panel pairs closer than this multiple of the larger panel length are near pairs
FAR_FIELD_RATIO = 1.0
MAX_SUBDIVISION_DEPTH = 16


def kernel_G(x: np.ndarray, y: np.ndarray) -> Union[float, np.ndarray]:
    """
    Fundamental solution -ln|x - y| / (2 pi).

    Raises:
        SingularEvaluationError: If x and y coincide
    """
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0.0):
        raise SingularEvaluationError(np.asarray(x).tolist())
    out = -INV_2PI * np.log(r)
    return float(out) if np.ndim(out) == 0 else out


def kernel_double_layer(x: np.ndarray, y: np.ndarray, normal_y: np.ndarray) -> Union[float, np.ndarray]:
    """Normal derivative of the fundamental solution in y: (x - y).n_y / (2 pi |x - y|^2)."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    if np.any(r2 == 0.0):
        raise SingularEvaluationError(np.asarray(x).tolist())
    n = np.asarray(normal_y, dtype=float)
    out = INV_2PI * (d[..., 0] * n[..., 0] + d[..., 1] * n[..., 1]) / r2
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ScaleTransform:
    """Similarity x -> center + scale (x - center) applied before BE assembly"""

    scale: float
    center: Tuple[float, float]

    @classmethod
    def identity(cls) -> "ScaleTransform":
        return cls(1.0, (0.0, 0.0))

    @classmethod
    def for_boundary(cls, boundary: BoundaryMesh, scale: float = 0.25) -> "ScaleTransform":
        """
        Scaling about the area centroid.

        Raises:
            ParameterError: If the scaled boundary would not have diameter below 1
        """
        if not 0.0 < scale <= 1.0:
            raise ParameterError(f"BE scale must lie in (0, 1], got {scale}")
        diameter = boundary.diameter * scale
        if diameter >= 1.0:
            raise ParameterError(
                f"Scaled BE boundary has diameter {diameter:.3g}; choose a scale below "
                f"{1.0 / boundary.diameter:.3g}"
            )
        c = boundary.centroid
        return cls(float(scale), (float(c[0]), float(c[1])))

    def apply(self, boundary: BoundaryMesh) -> BoundaryMesh:
        if self.scale == 1.0:
            return boundary
        return boundary.transformed(self.scale, np.array(self.center))


@dataclass(frozen=True, eq=False)
class LayerMatrices:
    """
    Galerkin matrices of the layer operators.

    V: flux x flux, K and M: flux (test) x trace (trial), W: trace x trace,
    D: arc-length derivative of trace functions expressed in the flux space.
    """

    V: np.ndarray
    K: np.ndarray
    W: np.ndarray
    M: np.ndarray
    D: np.ndarray
    transform: ScaleTransform


def classify_pair(boundary: BoundaryMesh, a: int, b: int) -> PanelRelation:
    if a == b:
        return PanelRelation.IDENTICAL
    n = boundary.n_panels
    if n > 2 and (abs(a - b) == 1 or abs(a - b) == n - 1):
        return PanelRelation.ADJACENT
    return PanelRelation.DISJOINT


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    v = b - a
    t = np.clip(np.dot(p - a, v) / np.dot(v, v), 0.0, 1.0)
    return float(np.hypot(*(p - a - t * v)))


def segment_distance(a0, a1, b0, b1) -> float:
    """Distance of two non-intersecting segments."""
    return min(
        _point_segment_distance(a0, b0, b1),
        _point_segment_distance(a1, b0, b1),
        _point_segment_distance(b0, a0, a1),
        _point_segment_distance(b1, a0, a1),
    )


def _near_disjoint_rule(A: Panel, B: Panel, order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Composite tensor Gauss rule from bisecting the panels until they separate."""
    g = gauss_legendre(order)
    s_out, t_out, w_out = [], [], []
    stack = [(0.0, 1.0, 0.0, 1.0, 0)]
    while stack:
        s0, s1, t0, t1, depth = stack.pop()
        la, lb = A.length * (s1 - s0), B.length * (t1 - t0)
        dist = segment_distance(A.point(s0), A.point(s1), B.point(t0), B.point(t1))
        if dist >= FAR_FIELD_RATIO * max(la, lb) or depth >= MAX_SUBDIVISION_DEPTH:
            s = s0 + (s1 - s0) * g.nodes
            t = t0 + (t1 - t0) * g.nodes
            ss, tt = np.meshgrid(s, t, indexing="ij")
            ws, wt = np.meshgrid(g.weights * (s1 - s0), g.weights * (t1 - t0), indexing="ij")
            s_out.append(ss.ravel())
            t_out.append(tt.ravel())
            w_out.append((ws * wt).ravel())
        elif la >= lb:
            mid = 0.5 * (s0 + s1)
            stack += [(s0, mid, t0, t1, depth + 1), (mid, s1, t0, t1, depth + 1)]
        else:
            mid = 0.5 * (t0 + t1)
            stack += [(s0, s1, t0, mid, depth + 1), (s0, s1, mid, t1, depth + 1)]
    return np.concatenate(s_out), np.concatenate(t_out), np.concatenate(w_out)


def _pair_blocks(
    boundary: BoundaryMesh, a: int, b: int, pa: int, pb: int, relation: PanelRelation
) -> Tuple[np.ndarray, np.ndarray]:
    """V and K blocks of a near panel pair (test panel a, source panel b)."""
    A, B = boundary.panels[a], boundary.panels[b]
    if relation is PanelRelation.DISJOINT:
        s, t, w = _near_disjoint_rule(A, B, max(10, pa + pb + 4))
        lw, radius = np.zeros_like(w), np.ones_like(w)
    else:
        w_order = pa + pb + 12 if relation is PanelRelation.ADJACENT else None
        rule = panel_pair_rule(relation, pa + pb + 4, w_order)
        s, t = rule.s, rule.t
        w, lw, radius = rule.weights, rule.log_weights, rule.radius
        if relation is PanelRelation.ADJACENT:
            # rule coordinates are measured from the shared vertex
            shared_at_a_end = np.allclose(A.end, B.start)
            s = 1.0 - s if shared_at_a_end else s
            t = t if shared_at_a_end else 1.0 - t
    x, y = A.point(s), B.point(t)
    d = x - y
    r = np.hypot(d[:, 0], d[:, 1])
    psi_a = legendre_basis(pa, s)
    psi_b = legendre_basis(pb, t)
    phi_b, _ = interval_basis(pb, t)
    jac = A.length * B.length
    log_part = w * np.log(r / radius) + lw
    V = -INV_2PI * jac * (psi_a * log_part) @ psi_b.T
    if relation is PanelRelation.IDENTICAL:
        K = np.zeros((pa + 1, pb + 1))
    else:
        dl = INV_2PI * (d @ B.outward_normal) / r**2
        K = jac * (psi_a * (w * dl)) @ phi_b.T
    return V, K


def _padded(values_per_panel, width: int, n_points: int) -> np.ndarray:
    out = np.zeros((len(values_per_panel), width, n_points))
    for i, vals in enumerate(values_per_panel):
        out[i, : vals.shape[0]] = vals
    return out


def assemble_layers(
    boundary: BoundaryMesh,
    trace: BeTraceSpace,
    flux: BeFluxSpace,
    transform: Optional[ScaleTransform] = None,
) -> LayerMatrices:
    """
    Assemble V, K, M, W and the derivative map D.

    Args:
        boundary: Unscaled BE boundary the spaces were built on
        trace: Trace space (trial space of K and M)
        flux: Flux space (test space of K and M, both spaces of V)
        transform: Scaling applied to the geometry before assembly

    Raises:
        ConsistencyError: If the spaces do not belong to the boundary
    """
    if trace.boundary.n_panels != boundary.n_panels or flux.boundary.n_panels != boundary.n_panels:
        raise ConsistencyError("Spaces do not match the boundary mesh")
    if tuple(trace.degrees) != tuple(flux.degrees):
        raise ConsistencyError("Trace and flux spaces must share the degree vector")
    transform = transform or ScaleTransform.identity()
    geo = transform.apply(boundary)
    degrees = flux.degrees
    n_panels = geo.n_panels
    pmax = degrees.max
    width = pmax + 1

    g = gauss_legendre(max(10, pmax + 4))
    starts = np.array([p.start for p in geo.panels])
    vecs = np.array([p.vector for p in geo.panels])
    lengths = np.array([p.length for p in geo.panels])
    normals = np.array([p.outward_normal for p in geo.panels])
    X = starts[:, None, :] + g.nodes[None, :, None] * vecs[:, None, :]
    wq = lengths[:, None] * g.weights[None, :]
    psi = _padded([legendre_basis(p, g.nodes) for p in degrees], width, len(g.nodes))
    phi = _padded([interval_basis(p, g.nodes)[0] for p in degrees], width, len(g.nodes))

    diff = X[:, :, None, None, :] - X[None, None, :, :, :]
    r2 = np.sum(diff**2, axis=-1)
    coincident = r2 <= 1e-28
    r2[coincident] = 1.0
    G = -INV_2PI * 0.5 * np.log(r2)
    DL = INV_2PI * np.einsum("aqbrd,bd->aqbr", diff, normals) / r2
    G[coincident] = 0.0
    DL[coincident] = 0.0
    V_blocks = np.einsum("akq,aq,aqbr,br,blr->akbl", psi, wq, G, wq, psi, optimize=True)
    K_blocks = np.einsum("akq,aq,aqbr,br,blr->akbl", psi, wq, DL, wq, phi, optimize=True)

    n_near = 0
    for a in range(n_panels):
        A = geo.panels[a]
        for b in range(n_panels):
            relation = classify_pair(geo, a, b)
            if relation is PanelRelation.DISJOINT:
                B = geo.panels[b]
                dist = segment_distance(A.start, A.end, B.start, B.end)
                if dist >= FAR_FIELD_RATIO * max(A.length, B.length):
                    continue
            pa, pb = degrees[a], degrees[b]
            V_loc, K_loc = _pair_blocks(geo, a, b, pa, pb, relation)
            V_blocks[a, :, b, :] = 0.0
            K_blocks[a, :, b, :] = 0.0
            V_blocks[a, : pa + 1, b, : pb + 1] = V_loc
            K_blocks[a, : pa + 1, b, : pb + 1] = K_loc
            n_near += 1

    flux_rows = np.full((n_panels, width), -1, dtype=int)
    trace_cols = np.full((n_panels, width), -1, dtype=int)
    for pid in range(n_panels):
        ids = flux.local_dofs(pid)
        flux_rows[pid, : len(ids)] = ids
        tids = trace.local_dofs(pid)
        trace_cols[pid, : len(tids)] = tids
    valid = flux_rows.ravel() >= 0
    scatter = _trace_scatter(trace_cols, trace.n_dofs)

    V_flat = V_blocks.reshape(n_panels * width, n_panels * width)[np.ix_(valid, valid)]
    V = 0.5 * (V_flat + V_flat.T)
    K = K_blocks.reshape(n_panels * width, n_panels * width)[valid] @ scatter

    M_flat = np.zeros((n_panels * width, n_panels * width))
    D_flat = np.zeros_like(M_flat)
    for pid in range(n_panels):
        p = degrees[pid]
        rule = gauss_legendre(p + 2)
        leg = legendre_basis(p, rule.nodes)
        vals, ders = interval_basis(p, rule.nodes)
        rows = slice(pid * width, pid * width + p + 1)
        cols = slice(pid * width, pid * width + p + 1)
        M_flat[rows, cols] = lengths[pid] * (leg * rule.weights) @ vals.T
        k = np.arange(p + 1)
        D_flat[rows, cols] = ((2 * k + 1) / lengths[pid])[:, None] * ((leg * rule.weights) @ ders.T)
    M = M_flat[valid] @ scatter
    D = D_flat[valid] @ scatter
    W = D.T @ V @ D
    W = 0.5 * (W + W.T)
    logger.debug(
        "Assembled layer operators: %d panels, %d flux / %d trace DOFs, %d near pairs",
        n_panels,
        flux.n_dofs,
        trace.n_dofs,
        n_near,
    )
    return LayerMatrices(V=V, K=K, W=W, M=M, D=D, transform=transform)


def _trace_scatter(trace_cols: np.ndarray, n_trace: int) -> np.ndarray:
    """0/1 matrix mapping padded panel-local trace slots to global trace DOFs."""
    flat = trace_cols.ravel()
    scatter = np.zeros((len(flat), n_trace))
    slots = np.nonzero(flat >= 0)[0]
    scatter[slots, flat[slots]] = 1.0
    return scatter


@dataclass(frozen=True, eq=False)
class VFactor:
    """Cholesky factorization of the single layer Galerkin matrix"""

    factor: Tuple[np.ndarray, bool]
    size: int

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self.factor, rhs)


def discrete_V_inverse(V: np.ndarray) -> VFactor:
    """
    Factorize V for the application w -> V^{-1} w.

    Raises:
        CapacityError: If V is not positive definite
    """
    try:
        factor = cho_factor(V, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise CapacityError(
            "Single layer matrix is not positive definite; rescale the BE geometry so that "
            "its diameter is below 1",
            cause=e,
        ) from e
    return VFactor(factor, V.shape[0])


@dataclass(frozen=True, eq=False)
class SteklovMatrix:
    """Discrete Steklov-Poincare matrix on the trace space"""

    S_hat: np.ndarray
    v_factor: VFactor
    layers: LayerMatrices

    def energy(self, coeffs: np.ndarray) -> float:
        """<S_hat u, u>, clipped at zero."""
        return max(float(coeffs @ self.S_hat @ coeffs), 0.0)


def discrete_steklov(layers: LayerMatrices) -> SteklovMatrix:
    """S_hat = W + (K + M/2)^T V^{-1} (K + M/2), symmetrized."""
    factor = discrete_V_inverse(layers.V)
    T = layers.K + 0.5 * layers.M
    S = layers.W + T.T @ factor.solve(T)
    return SteklovMatrix(0.5 * (S + S.T), factor, layers)


def calderon_residual(
    boundary: BoundaryMesh,
    u_trace: Callable[[np.ndarray], np.ndarray],
    u_flux: Callable[[np.ndarray, np.ndarray], np.ndarray],
    degree: int = 1,
) -> float:
    """
    Discrete L2 norm of V phi - (K + 1/2) u for a trace/flux pair.

    Uses the unscaled geometry, the full trace space (no Dirichlet elimination)
    and the panelwise projections of the given data.
    """
    degrees = DegreeVector.uniform(boundary.n_panels, degree)
    trace = enumerate_trace_dofs(boundary, degrees, keep_all=True)
    flux = enumerate_flux_dofs(boundary, degrees)
    layers = assemble_layers(boundary, trace, flux)
    u = interpolate(trace, u_trace)
    phi = project_flux(flux, u_flux)
    residual = layers.V @ phi - (layers.K + 0.5 * layers.M) @ u
    return math.sqrt(float(residual @ (residual / flux.mass_diagonal())))


def newton_rhs(space: BeTraceSpace, f=None) -> np.ndarray:
    """
    BE right-hand side from the volume source in the BE subdomain.

    Only f = 0 is supported (None, 0 or a callable vanishing at sample points).

    Raises:
        UnsupportedFeatureError: For a nonzero source
    """
    if f is None or (np.isscalar(f) and f == 0):
        return np.zeros(space.n_dofs)
    if callable(f):
        samples = space.boundary.vertices
        samples = np.vstack((samples, samples.mean(axis=0)))
        if np.all(np.asarray(f(samples), dtype=float) == 0.0):
            return np.zeros(space.n_dofs)
    raise UnsupportedFeatureError("Volume sources in the BE subdomain are not supported")


def assemble_be_neumann_load(
    space: BeTraceSpace, g: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> np.ndarray:
    """<g, v> over the Neumann panels of the BE boundary (unscaled geometry)."""
    load = np.zeros(space.n_dofs)
    for pid, panel in enumerate(space.boundary.panels):
        if panel.tag is not BoundaryTag.NEUMANN:
            continue
        p = space.degrees[pid]
        rule = gauss_legendre(p + 4)
        pts = panel.point(rule.nodes)
        normals = np.broadcast_to(panel.outward_normal, pts.shape)
        gx = np.asarray(g(pts, normals), dtype=float)
        vals, _ = space.panel_basis(pid, rule.nodes)
        ids = space.local_dofs(pid)
        keep = ids >= 0
        np.add.at(load, ids[keep], (vals @ (rule.weights * gx) * panel.length)[keep])
    return load
