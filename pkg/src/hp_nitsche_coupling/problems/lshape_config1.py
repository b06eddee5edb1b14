"""
L-shape with the reentrant corner encapsulated in the BE subdomain
"""

import logging

from ..geometry_mesh import build_lshape_decomposition
from ..models import StudyConfig, StudyMode
from . import Discretization
from ._lshape import EXACT, build_uniform, definition, degree_vector, fe_layers, graded_boundary

logger = logging.getLogger(__name__)

CONFIGURATION = 1

problem_definition = definition(
    "lshape_config1",
    "u = r^(2/3) sin(2/3 (theta - pi/2)) on the L-shape, singular corner inside the BE block",
    dof_root=0.5,
    bands=False,
)


def lshape_config1_builder(config: StudyConfig, step: int) -> Discretization:
    """
    The hp-version grades only the BE mesh; the FE mesh stays fixed and
    carries the largest BE degree uniformly.
    """
    if config.mode is not StudyMode.HP:
        return build_uniform(CONFIGURATION, config, step)
    layers = fe_layers(config, step)
    boundary, be_degrees = graded_boundary(CONFIGURATION, config, layers)
    mesh, _ = build_lshape_decomposition(CONFIGURATION)
    fe_degrees = degree_vector(mesh.n_elements, be_degrees.max)
    logger.debug(
        "lshape_config1 hp step %d: %d layers, %d panels, p_max=%d",
        step,
        layers,
        boundary.n_panels,
        be_degrees.max,
    )
    return Discretization(
        mesh,
        boundary,
        fe_degrees,
        be_degrees,
        EXACT,
        sigma=config.sigma_be,
        mu=config.mu_be,
        layers=layers,
        label=f"n={layers}",
    )
