"""
Corner singularity shared by both L-shape configurations
"""

from typing import Tuple

import numpy as np

from ..geometry_mesh import (
    LSHAPE_BE_ARCS,
    Point2,
    TaggedArc,
    build_lshape_decomposition,
    graded_boundary_mesh,
)
from ..hp_spaces import DegreeVector, assign_linear_degrees
from ..models import ProblemDefinition, RateBand, StudyConfig, StudyMode
from . import Discretization, ExactSolution, check_step, refined_size, uniform_degrees

ALPHA = 2.0 / 3.0
FE_H = 0.5


def _polar(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x, y = points[:, 0], points[:, 1]
    theta = np.mod(np.arctan2(y, x) - 0.5 * np.pi, 2.0 * np.pi) + 0.5 * np.pi
    return np.hypot(x, y), theta


def exact_value(points: np.ndarray) -> np.ndarray:
    """u = r^(2/3) sin(2/3 (theta - pi/2)) with theta in [pi/2, 2pi]."""
    r, theta = _polar(points)
    return r**ALPHA * np.sin(ALPHA * (theta - 0.5 * np.pi))


def exact_gradient(points: np.ndarray) -> np.ndarray:
    r, theta = _polar(points)
    phase = ALPHA * (theta - 0.5 * np.pi) - theta
    with np.errstate(divide="ignore"):
        factor = np.where(r > 0.0, ALPHA * r ** (ALPHA - 1.0), 0.0)
    return np.column_stack((factor * np.sin(phase), factor * np.cos(phase)))


EXACT = ExactSolution(exact_value, exact_gradient, singular_points=((0.0, 0.0),))


def definition(name: str, description: str, dof_root: float, bands: bool) -> ProblemDefinition:
    rates = (
        {StudyMode.H: RateBand(low=0.56, high=0.76), StudyMode.P: RateBand(low=1.1, high=1.6)}
        if bands
        else {}
    )
    return ProblemDefinition(
        name=name,
        description=description,
        modes=(StudyMode.H, StudyMode.P, StudyMode.HP),
        dof_root=dof_root,
        expected_rates=rates,
        min_correlation=0.97,
    )


def be_arcs(configuration: int) -> Tuple[TaggedArc, ...]:
    return tuple(TaggedArc(Point2(*a), Point2(*b), tag) for a, b, tag in LSHAPE_BE_ARCS[configuration])


def build_uniform(configuration: int, config: StudyConfig, step: int) -> Discretization:
    """h- and p-versions on uniform meshes."""
    check_step(config, step)
    if config.mode is StudyMode.P:
        fe_h, degree = FE_H, config.min_p + step
    else:
        fe_h, degree = refined_size(FE_H, step), config.degree
    mesh, boundary = build_lshape_decomposition(
        configuration, fe_h=fe_h, be_h=config.fe_be_ratio * fe_h
    )
    fe_degrees, be_degrees = uniform_degrees(mesh, boundary, degree)
    return Discretization(
        mesh, boundary, fe_degrees, be_degrees, EXACT, label=f"h={fe_h:g} p={degree}"
    )


def graded_boundary(configuration: int, config: StudyConfig, layers: int):
    """BE mesh graded toward every arc endpoint with a linear degree vector."""
    grading = config.grading_be(layers)
    boundary = graded_boundary_mesh(be_arcs(configuration), grading.sigma, grading.layers)
    degrees = assign_linear_degrees(boundary.layer_tags, grading.slope, dimension=1)
    return boundary, degrees


def fe_layers(config: StudyConfig, step: int) -> int:
    check_step(config, step)
    return config.min_layers + step


def degree_vector(count: int, degree: int) -> DegreeVector:
    return DegreeVector.uniform(count, degree)
