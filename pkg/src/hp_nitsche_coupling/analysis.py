"""
Error measurement in the mesh-dependent energy norm, convergence-rate fits
and the quasi-optimality constant of the Nitsche coupling.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

try:
    from hp_nitsche_coupling.bem_operators import SteklovMatrix
    from hp_nitsche_coupling.fem_assembly import Coefficient, pairing_order
    from hp_nitsche_coupling.geometry_mesh import InterfaceOverlay, OverlaySegment
    from hp_nitsche_coupling.hp_spaces import BeTraceSpace, FeSpace, interpolate
    from hp_nitsche_coupling.models import (
        ConvergenceRecord,
        ErrorBreakdown,
        ParameterError,
        RateFit,
        StudyMode,
    )
    from hp_nitsche_coupling.quadrature import element_rule, gauss_legendre, graded_element_rule
    from hp_nitsche_coupling.system_solver import Solution
except ImportError:
    from .bem_operators import SteklovMatrix
    from .fem_assembly import Coefficient, pairing_order
    from .geometry_mesh import InterfaceOverlay, OverlaySegment
    from .hp_spaces import BeTraceSpace, FeSpace, interpolate
    from .models import ConvergenceRecord, ErrorBreakdown, ParameterError, RateFit, StudyMode
    from .quadrature import element_rule, gauss_legendre, graded_element_rule
    from .system_solver import Solution

# Configure logging
logger = logging.getLogger(__name__)

ScalarField = Callable[[np.ndarray], np.ndarray]

SINGULAR_SIGMA = 0.15
SINGULAR_LAYERS = 20
SINGULAR_TOL = 1e-12
DEFAULT_JUMP_ORDER = 10


class DiscreteJump:
    """Jump u_FE - u_BE of a discrete pair, evaluated on overlay segments"""

    def __init__(self, fe_space: FeSpace, be_space: BeTraceSpace, u_fe: np.ndarray, u_be: np.ndarray):
        self.fe_space = fe_space
        self.be_space = be_space
        self.u_fe = np.asarray(u_fe, dtype=float)
        self.u_be = np.asarray(u_be, dtype=float)

    def order(self, seg: OverlaySegment) -> int:
        return pairing_order(self.fe_space.degrees[seg.fe_element], self.be_space.degrees[seg.be_panel])

    def __call__(self, seg: OverlaySegment, points: np.ndarray) -> np.ndarray:
        el = self.fe_space.mesh.elements[seg.fe_element]
        fe_vals, _ = self.fe_space.evaluate(self.u_fe, seg.fe_element, el.to_reference(points))
        panel = self.be_space.boundary.panels[seg.be_panel]
        return fe_vals - self.be_space.evaluate(self.u_be, seg.be_panel, panel.parameter(points))


def jump_norm(
    overlay: InterfaceOverlay,
    jump: Callable[[OverlaySegment, np.ndarray], np.ndarray],
    order: Optional[int] = None,
) -> float:
    """
    (sum over segments of eta ||jump||^2)^(1/2).

    Args:
        overlay: Interface overlay carrying eta
        jump: Function of (segment, points) returning jump values
        order: Gauss points per segment; by default the order a DiscreteJump
            asks for, or 10 for other callables
    """
    total = 0.0
    for seg in overlay.segments:
        if order is not None:
            n = order
        elif isinstance(jump, DiscreteJump):
            n = jump.order(seg)
        else:
            n = DEFAULT_JUMP_ORDER
        rule = gauss_legendre(n)
        values = np.asarray(jump(seg, overlay.segment_points(seg, rule.nodes)), dtype=float)
        total += seg.eta * overlay.segment_length(seg) * float(np.sum(rule.weights * values**2))
    return math.sqrt(max(total, 0.0))


def pointwise(f: ScalarField) -> Callable[[OverlaySegment, np.ndarray], np.ndarray]:
    """Adapt a function of points to the jump_norm signature."""
    return lambda seg, points: f(points)


def _singular_corner(vertices: np.ndarray, singular_points: np.ndarray) -> Optional[int]:
    for c, v in enumerate(vertices):
        if np.any(np.hypot(*(singular_points - v).T) < SINGULAR_TOL):
            return c
    return None


def fe_energy_error(
    fe_space: FeSpace,
    u_fe: np.ndarray,
    gradient: ScalarField,
    coefficient: Optional[Coefficient] = None,
    singular_points: Sequence[Sequence[float]] = (),
) -> float:
    """
    ||kappa^(1/2) grad(u - U1)|| over the FE mesh.

    Elements with a vertex at one of the singular points use a rule graded
    toward that vertex; the others use Gauss with p + 4 points per direction.
    """
    coefficient = coefficient or Coefficient.from_mesh(fe_space.mesh)
    singular = np.asarray(singular_points, dtype=float).reshape(-1, 2)
    total = 0.0
    n_graded = 0
    for eid, el in enumerate(fe_space.mesh.elements):
        p = fe_space.degrees[eid]
        corner = _singular_corner(el.vertices, singular) if len(singular) else None
        if corner is None:
            rule = element_rule(el.kind, p + 4)
            ref, weights = rule.nodes, rule.weights
        else:
            rule = graded_element_rule(el.kind, SINGULAR_SIGMA, SINGULAR_LAYERS, p + 4)
            ref = el.to_reference(el.corner_map(corner, rule.nodes))
            weights = rule.weights
            n_graded += 1
        _, grads = fe_space.evaluate(u_fe, eid, ref)
        diff = np.asarray(gradient(el.to_physical(ref)), dtype=float) - grads
        total += coefficient[eid] * abs(el.jacobian_det) * float(
            np.sum(weights * np.sum(diff**2, axis=1))
        )
    logger.debug("FE energy error with %d graded elements", n_graded)
    return math.sqrt(max(total, 0.0))


def energy_error(
    solution: Solution,
    exact: ScalarField,
    gradient: ScalarField,
    fe_space: FeSpace,
    be_space: BeTraceSpace,
    overlay: InterfaceOverlay,
    steklov: SteklovMatrix,
    coefficient: Optional[Coefficient] = None,
    singular_points: Sequence[Sequence[float]] = (),
) -> ErrorBreakdown:
    """
    Error of a discrete solution in the energy norm.

    The BE part is the discrete Steklov energy of I u - U2 with I the
    trace interpolant. The exact trace is continuous, so the jump part is
    the jump norm of the discrete solution itself.
    """
    fe = fe_energy_error(fe_space, solution.fe, gradient, coefficient, singular_points)
    be_error = interpolate(be_space, exact) - solution.be
    be = math.sqrt(steklov.energy(be_error))
    jump = jump_norm(overlay, DiscreteJump(fe_space, be_space, solution.fe, solution.be))
    return ErrorBreakdown.from_components(fe, be, jump)


def _check_records(n: int, minimum: int, what: str) -> None:
    if n < minimum:
        raise ParameterError(f"{what} needs at least {minimum} records, got {n}")


def _log_errors(errors: Sequence[float]) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0.0) or not np.all(np.isfinite(e)):
        raise ParameterError("Errors must be positive and finite for a rate fit")
    return np.log(e)


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def _correlation(x: np.ndarray, y: np.ndarray) -> float:
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return 0.0
    return float(abs(np.corrcoef(x, y)[0, 1]))


def algebraic_fit(
    variable: Sequence[float],
    errors: Sequence[float],
    n_dofs: Sequence[float],
    mode: StudyMode = StudyMode.H,
) -> RateFit:
    """
    Least-squares algebraic rate from arrays.

    For h-studies the rate is the slope of log e against log h; for p- and
    hp-studies it is minus the slope against log p. dof_rate is minus the
    slope against log N.
    """
    mode = StudyMode(mode)
    _check_records(len(errors), 3, "An algebraic fit")
    y = _log_errors(errors)
    x = np.log(np.asarray(variable, dtype=float))
    slope = _slope(x, y)
    rate = slope if mode is StudyMode.H else -slope
    log_n = np.log(np.asarray(n_dofs, dtype=float))
    return RateFit(
        rate=rate,
        dof_rate=-_slope(log_n, y),
        correlation=_correlation(x, y),
        variable="h" if mode is StudyMode.H else "p",
        n_records=len(errors),
    )


def fit_algebraic_rate(records: Sequence[ConvergenceRecord], mode: StudyMode) -> RateFit:
    """
    Algebraic convergence rate of err_total along a sweep.

    Raises:
        ParameterError: With fewer than 3 records
    """
    mode = StudyMode(mode)
    _check_records(len(records), 3, "An algebraic fit")
    variable = [r.h_max if mode is StudyMode.H else r.p_max for r in records]
    return algebraic_fit(
        variable, [r.errors.total for r in records], [r.n_dofs for r in records], mode
    )


def exponential_fit(
    n_dofs: Sequence[float],
    errors: Sequence[float],
    dof_root: float,
    variable: Optional[str] = None,
) -> RateFit:
    """Fit log e = c - b N^dof_root; rate is b, correlation is |r| of the fit."""
    if not 0.0 < dof_root <= 1.0:
        raise ParameterError(f"dof_root must lie in (0, 1], got {dof_root}")
    _check_records(len(errors), 4, "An exponential fit")
    y = _log_errors(errors)
    x = np.asarray(n_dofs, dtype=float) ** dof_root
    return RateFit(
        rate=-_slope(x, y) + 0.0,
        correlation=_correlation(x, y),
        variable=variable or f"N^{dof_root:.4g}",
        n_records=len(errors),
    )


def fit_exponential_rate(records: Sequence[ConvergenceRecord], dof_root: float) -> RateFit:
    """
    Exponential rate b in err_total ~ exp(-b N^dof_root).

    Raises:
        ParameterError: With fewer than 4 records
    """
    _check_records(len(records), 4, "An exponential fit")
    return exponential_fit([r.n_dofs for r in records], [r.errors.total for r in records], dof_root)


def running_rate(
    previous: Tuple[float, float, int],
    current: Tuple[float, float, int],
    mode: StudyMode,
) -> Optional[float]:
    """
    Rate between two steps given as (error, h or p, N).

    h-studies use log(e1/e0)/log(h1/h0); p-studies use the same quotient in p
    with the sign flipped; hp-studies use the algebraic rate in N.
    """
    mode = StudyMode(mode)
    e0, v0, n0 = previous
    e1, v1, n1 = current
    if e0 <= 0.0 or e1 <= 0.0:
        return None
    if mode is StudyMode.HP:
        v0, v1 = n0, n1
    if v0 == v1 or v0 <= 0 or v1 <= 0:
        return None
    rate = math.log(e1 / e0) / math.log(v1 / v0)
    return rate if mode is StudyMode.H else -rate


def audit_monotonicity(records: Sequence[ConvergenceRecord], relative_tol: float = 1e-8) -> List[int]:
    """Steps whose total error exceeds the previous one; each is logged as a warning."""
    increases = []
    for prev, cur in zip(records, records[1:]):
        if cur.errors.total > prev.errors.total * (1.0 + relative_tol):
            logger.warning(
                "Total error increased at step %d of %s: %.4e -> %.4e",
                cur.step,
                cur.study,
                prev.errors.total,
                cur.errors.total,
            )
            increases.append(cur.step)
    return increases


def quasi_optimality_constant(delta: float, eta0: float) -> float:
    """
    c = delta/(delta - 1) * (eta0 + 1) / min(eta0 - delta, 1).

    Raises:
        ParameterError: Unless 1 < delta < eta0
    """
    if not (delta > 1.0 and eta0 > delta):
        raise ParameterError(f"Need 1 < delta < eta0, got delta={delta}, eta0={eta0}")
    return delta / (delta - 1.0) * (eta0 + 1.0) / min(eta0 - delta, 1.0)


def optimal_quasi_optimality_constant(
    delta_max: float = 10.0, eta_span: float = 10.0, xatol: float = 1e-12
) -> Tuple[float, float, float]:
    """
    Minimise the quasi-optimality constant over admissible (delta, eta0).

    The inner problem minimises over eta0 in (delta, delta + eta_span) for
    fixed delta, the outer one over delta in (1, delta_max).

    Returns:
        (delta, eta0, constant) at the minimum
    """

    def inner(delta: float):
        res = minimize_scalar(
            lambda eta0: quasi_optimality_constant(delta, eta0),
            bounds=(delta + xatol, delta + eta_span),
            method="bounded",
            options={"xatol": xatol},
        )
        return res.x, res.fun

    outer = minimize_scalar(
        lambda d: inner(d)[1],
        bounds=(1.0 + 1e-6, delta_max),
        method="bounded",
        options={"xatol": xatol},
    )
    eta0, value = inner(outer.x)
    logger.debug("Quasi-optimality minimum %.12f at delta=%.8f, eta0=%.8f", value, outer.x, eta0)
    return float(outer.x), float(eta0), float(value)
