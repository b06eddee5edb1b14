"""
Built-in property suite run by the ``verify`` command.

Each check returns a CheckResult; exceptions inside a check are reported
as failures instead of aborting the suite.
"""

import logging
import math
import time
from typing import Callable, List, Optional

import numpy as np

try:
    from hp_nitsche_coupling.analysis import optimal_quasi_optimality_constant
    from hp_nitsche_coupling.bem_operators import assemble_layers, calderon_residual
    from hp_nitsche_coupling.geometry_mesh import (
        Element,
        Point2,
        TaggedArc,
        build_square_decomposition,
        uniform_boundary_mesh,
    )
    from hp_nitsche_coupling.hp_spaces import (
        DegreeVector,
        enumerate_flux_dofs,
        enumerate_trace_dofs,
        reference_basis,
    )
    from hp_nitsche_coupling.models import (
        BoundaryTag,
        CheckResult,
        ElementKind,
        ExampleName,
        StudyConfig,
        StudyMode,
    )
    from hp_nitsche_coupling.nitsche_coupling import (
        CouplingForms,
        formulation_gap,
        lifting_apply,
        sharp_trace_ratio,
        trace_constant,
    )
    from hp_nitsche_coupling.problems.square_smooth import EXACT
    from hp_nitsche_coupling.quadrature import (
        element_rule,
        gauss_legendre,
        gauss_log_weights,
        triangle_rule,
    )
    from hp_nitsche_coupling.runner import CoupledProblem, assemble_problem, get_registry
except ImportError:
    from .analysis import optimal_quasi_optimality_constant
    from .bem_operators import assemble_layers, calderon_residual
    from .geometry_mesh import (
        Element,
        Point2,
        TaggedArc,
        build_square_decomposition,
        uniform_boundary_mesh,
    )
    from .hp_spaces import (
        DegreeVector,
        enumerate_flux_dofs,
        enumerate_trace_dofs,
        reference_basis,
    )
    from .models import (
        BoundaryTag,
        CheckResult,
        ElementKind,
        ExampleName,
        StudyConfig,
        StudyMode,
    )
    from .nitsche_coupling import (
        CouplingForms,
        formulation_gap,
        lifting_apply,
        sharp_trace_ratio,
        trace_constant,
    )
    from .problems.square_smooth import EXACT
    from .quadrature import element_rule, gauss_legendre, gauss_log_weights, triangle_rule
    from .runner import CoupledProblem, assemble_problem, get_registry

# Configure logging
logger = logging.getLogger(__name__)

SEED = 20240611


def coarse_problem(degree: int = 2, eta0: float = 2.0) -> CoupledProblem:
    """Assembled square_smooth problem on the 32-element/20-panel meshes."""
    config = StudyConfig(
        example=ExampleName.SQUARE_SMOOTH, mode=StudyMode.P, min_p=degree, max_p=degree, eta0=eta0
    )
    builder = get_registry().get_builder(config.example.value)
    return assemble_problem(builder(config, 0), config.eta0, config.be_scale, config.shape_tau)


def random_triangle(rng: np.random.Generator) -> Element:
    """Random counter-clockwise triangle with moderate shape ratio."""
    while True:
        pts = rng.uniform(-1.0, 1.0, size=(3, 2))
        det = (pts[1, 0] - pts[0, 0]) * (pts[2, 1] - pts[0, 1]) - (pts[1, 1] - pts[0, 1]) * (
            pts[2, 0] - pts[0, 0]
        )
        if det < 0:
            pts = pts[[0, 2, 1]]
        if abs(det) > 0.2:
            el = Element(ElementKind.TRIANGLE, (0, 1, 2), pts)
            if el.shape_ratio < 20.0:
                return el


def check_quadrature(quick: bool = False) -> str:
    for n in range(1, 9 if quick else 17):
        rule = gauss_legendre(n)
        k = 2 * n - 1
        if abs(rule.integrate(lambda x: x**k) - 1.0 / (k + 1)) > 1e-13:
            raise AssertionError(f"Gauss rule with {n} points misses degree {k}")
        logs = gauss_log_weights(n)
        for j in range(n):
            value = float(np.dot(logs, rule.nodes**j))
            if abs(value + 1.0 / (j + 1) ** 2) > 1e-12:
                raise AssertionError(f"Log weights with {n} points miss degree {j}")
        tri = triangle_rule(n)
        x, y = tri.nodes[:, 0], tri.nodes[:, 1]
        a = n - 1
        exact = math.factorial(a) * math.factorial(a) / math.factorial(2 * a + 2)
        if abs(float(np.dot(tri.weights, x**a * y**a)) - exact) > 1e-14:
            raise AssertionError(f"Triangle rule with {n} points misses x^{a} y^{a}")
    return "Gauss, Gauss-log and collapsed triangle rules exact"


def check_trace_constants(quick: bool = False) -> str:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    max_p = 3 if quick else 6
    unit = Element(ElementKind.TRIANGLE, (0, 1, 2), np.array([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]))
    for p in range(1, max_p + 1):
        for el in (unit, random_triangle(rng)):
            for edge in range(3):
                g = trace_constant(el, [edge], p)
                worst = max(worst, abs(sharp_trace_ratio(el, edge, p) - g) / g)
    if worst > 1e-8:
        raise AssertionError(f"Sharp ratio deviates from the trace constant by {worst:.2e}")
    samples = 20 if quick else 100
    for p in range(1, max_p + 1):
        el = random_triangle(rng)
        rule = element_rule(el.kind, p + 2)
        vals, _ = reference_basis(el.kind, p, rule.nodes)
        edge_rule = gauss_legendre(p + 2)
        a, b = el.edge_endpoints(0)
        ref_edge = el.to_reference(a + edge_rule.nodes[:, None] * (b - a))
        evals, _ = reference_basis(el.kind, p, ref_edge)
        for _ in range(samples):
            c = rng.standard_normal(vals.shape[0])
            vol = float(np.dot(rule.weights, (c @ vals) ** 2)) * abs(el.jacobian_det)
            edge = float(np.dot(edge_rule.weights, (c @ evals) ** 2)) * el.edge_lengths[0]
            if edge > trace_constant(el, [0], p) * vol * (1.0 + 1e-10):
                raise AssertionError(f"Trace inequality violated for p={p}")
    return f"max relative deviation {worst:.1e}"


def _random_pairs(problem: CoupledProblem, count: int, rng: np.random.Generator):
    n = problem.fe_space.n_dofs + problem.be_space.n_dofs
    for _ in range(count):
        yield rng.standard_normal(n), rng.standard_normal(n)


def _positive_part(forms: CouplingForms, u: np.ndarray) -> float:
    return forms.diagonal_part(u, u) + float(u @ (forms.penalty @ u))


def check_formulation_equivalence(quick: bool = False) -> str:
    problem = coarse_problem()
    forms = problem.forms()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for u, w in _random_pairs(problem, 10 if quick else 100, rng):
        scale = math.sqrt(_positive_part(forms, u) * _positive_part(forms, w))
        worst = max(worst, formulation_gap(forms, u, w) / scale)
    if worst > 1e-10:
        raise AssertionError(f"Relative gap between a_hp and a_tilde is {worst:.2e}")
    return f"max relative gap {worst:.1e}"


def check_lifting_stability(quick: bool = False) -> str:
    eta0 = 2.0
    problem = coarse_problem(eta0=eta0)
    forms = problem.forms()
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for v, _ in _random_pairs(problem, 10 if quick else 100, rng):
        lifting = lifting_apply(v, problem.overlay, problem.fe_space, problem.be_space)
        bound = math.sqrt(forms.jump_norm_sq(v, weight_scale=1.0 / eta0))
        worst = max(worst, forms.lifting_norm(lifting) / bound)
    if worst > 1.0 + 1e-10:
        raise AssertionError(f"Lifting exceeds its stability bound by factor {worst:.6f}")
    return f"max ratio {worst:.4f}"


def check_coercivity(quick: bool = False) -> str:
    problem = coarse_problem(eta0=3.0)
    forms = problem.forms()
    rng = np.random.default_rng(SEED + 2)
    worst = math.inf
    for u, _ in _random_pairs(problem, 10 if quick else 100, rng):
        margin = forms.coercivity_margin(u, delta=2.0) / _positive_part(forms, u)
        worst = min(worst, margin)
    if worst < -1e-10:
        raise AssertionError(f"Coercivity bound violated: relative margin {worst:.2e}")
    return f"min relative margin {worst:.3f}"


def _square_boundary(h: float):
    corners = [(0.0, 0.0), (h, 0.0), (h, h), (0.0, h)]
    arcs = [
        TaggedArc(Point2(*corners[i]), Point2(*corners[(i + 1) % 4]), BoundaryTag.DIRICHLET)
        for i in range(4)
    ]
    return uniform_boundary_mesh(arcs, h)


def check_bem_identities(quick: bool = False) -> str:
    for h in (1.0, 0.5, 0.1):
        boundary = _square_boundary(h)
        degrees = DegreeVector.uniform(boundary.n_panels, 1)
        trace = enumerate_trace_dofs(boundary, degrees, keep_all=True)
        layers = assemble_layers(boundary, trace, enumerate_flux_dofs(boundary, degrees))
        expected = h**2 * (1.5 - math.log(h)) / (2.0 * math.pi)
        if abs(layers.V[0, 0] - expected) > 1e-9 * expected:
            raise AssertionError(f"Single layer self entry off for h={h}")
        if np.abs(layers.W @ np.ones(trace.n_dofs)).max() > 1e-10:
            raise AssertionError("Hypersingular operator does not annihilate constants")

    sizes = [0.5, 0.25, 0.125] if quick else [0.5, 0.25, 0.125, 0.0625]
    residuals = []
    for h in sizes:
        _, boundary = build_square_decomposition(be_h=h)
        residuals.append(calderon_residual(boundary, EXACT.value, EXACT.normal_derivative))
    rate = float(np.polyfit(np.log(sizes), np.log(residuals), 1)[0])
    if rate < 1.5:
        raise AssertionError(f"Calderon residual rate {rate:.2f} below 1.5")
    return f"Calderon residual rate {rate:.2f}"


def check_quasi_optimality(quick: bool = False) -> str:
    delta, eta0, value = optimal_quasi_optimality_constant()
    expected = 2.0 * (2.0 + math.sqrt(3.0))
    if abs(value - expected) > 1e-6:
        raise AssertionError(f"Minimum {value:.8f} differs from {expected:.8f}")
    return f"min {value:.6f} at delta={delta:.4f}, eta0={eta0:.4f}"


CHECKS: List[tuple] = [
    ("quadrature exactness", check_quadrature),
    ("trace-constant sharpness", check_trace_constants),
    ("formulation equivalence", check_formulation_equivalence),
    ("lifting stability", check_lifting_stability),
    ("coercivity witness", check_coercivity),
    ("BEM identities", check_bem_identities),
    ("quasi-optimality minimum", check_quasi_optimality),
]


def run_check(name: str, check: Callable[[bool], str], quick: bool = False) -> CheckResult:
    start = time.perf_counter()
    try:
        detail = check(quick)
        passed = True
    except Exception as e:
        logger.debug("Check %s failed", name, exc_info=True)
        detail = str(e)
        passed = False
    return CheckResult(name=name, passed=passed, detail=detail, seconds=time.perf_counter() - start)


def verify(quick: bool = False, only: Optional[List[str]] = None) -> List[CheckResult]:
    """Run the property suite (a reduced one with quick=True)."""
    results = []
    for name, check in CHECKS:
        if only and name not in only:
            continue
        result = run_check(name, check, quick)
        log = logger.info if result.passed else logger.warning
        log("Check %s: %s (%s)", name, "passed" if result.passed else "FAILED", result.detail)
        results.append(result)
    return results
