"""
Smooth solution on the square with a BE block on its left side
"""

import logging

import numpy as np

from ..geometry_mesh import build_square_decomposition
from ..models import ProblemDefinition, StudyConfig, StudyMode, UnsupportedFeatureError
from . import Discretization, ExactSolution, check_step, refined_size, uniform_degrees

logger = logging.getLogger(__name__)

FE_H = 0.25
STRIP_H = 0.5


def exact_value(points: np.ndarray) -> np.ndarray:
    """u = (x + 1) / ((x + 1)^2 + (y + 2)^2)."""
    a = points[:, 0] + 1.0
    b = points[:, 1] + 2.0
    return a / (a**2 + b**2)


def exact_gradient(points: np.ndarray) -> np.ndarray:
    a = points[:, 0] + 1.0
    b = points[:, 1] + 2.0
    rho2 = (a**2 + b**2) ** 2
    return np.column_stack(((b**2 - a**2) / rho2, -2.0 * a * b / rho2))


EXACT = ExactSolution(exact_value, exact_gradient)

problem_definition = ProblemDefinition(
    name="square_smooth",
    description="Harmonic u = (x+1)/((x+1)^2+(y+2)^2) on [-1,1]^2, BE block [-1,0]x[-1/2,1/2]",
    modes=(StudyMode.P, StudyMode.H),
    dof_root=0.5,
    expected_rates={},
    min_correlation=0.99,
    exponential_modes=(StudyMode.P,),
)


def square_smooth_builder(config: StudyConfig, step: int) -> Discretization:
    """
    p-version: fixed 32-element/20-panel meshes with degree min_p + step.
    h-version: all mesh sizes halved per step at the fixed degree.
    """
    check_step(config, step)
    if config.mode is StudyMode.HP:
        raise UnsupportedFeatureError("square_smooth has no geometric hp-version")
    if config.mode is StudyMode.P:
        fe_h, strip_h, degree = FE_H, STRIP_H, config.min_p + step
    else:
        fe_h, strip_h, degree = refined_size(FE_H, step), refined_size(STRIP_H, step), config.degree
    mesh, boundary = build_square_decomposition(
        fe_h=fe_h, be_h=config.fe_be_ratio * fe_h, strip_h=strip_h
    )
    fe_degrees, be_degrees = uniform_degrees(mesh, boundary, degree)
    logger.debug("square_smooth step %d: h=%s, p=%d", step, fe_h, degree)
    return Discretization(
        mesh,
        boundary,
        fe_degrees,
        be_degrees,
        EXACT,
        label=f"h={fe_h:g} p={degree}",
    )
