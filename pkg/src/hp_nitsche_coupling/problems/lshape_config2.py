"""
L-shape split along the diagonal from (-1,-1) to the reentrant corner
"""

import logging

from ..geometry_mesh import Point2, build_lshape_decomposition, refine_geometric_corner
from ..hp_spaces import assign_linear_degrees
from ..models import StudyConfig, StudyMode
from . import Discretization
from ._lshape import EXACT, build_uniform, definition, fe_layers, graded_boundary

logger = logging.getLogger(__name__)

CONFIGURATION = 2
CORNER = Point2(0.0, 0.0)

problem_definition = definition(
    "lshape_config2",
    "u = r^(2/3) sin(2/3 (theta - pi/2)) on the L-shape split at the diagonal",
    dof_root=1.0 / 3.0,
    bands=True,
)


def lshape_config2_builder(config: StudyConfig, step: int) -> Discretization:
    """
    The hp-version grades both meshes toward the reentrant corner, starting
    from the two-element coarse FE mesh.
    """
    if config.mode is not StudyMode.HP:
        return build_uniform(CONFIGURATION, config, step)
    layers = fe_layers(config, step)
    coarse, _ = build_lshape_decomposition(CONFIGURATION, fe_h=1.0)
    grading = config.grading_fe(layers)
    mesh = refine_geometric_corner(coarse, CORNER, grading)
    fe_degrees = assign_linear_degrees(mesh.layer_tags, grading.slope, n_layers=layers)
    boundary, be_degrees = graded_boundary(CONFIGURATION, config, layers)
    logger.debug(
        "lshape_config2 hp step %d: %d elements, %d panels, p_max=%d",
        step,
        mesh.n_elements,
        boundary.n_panels,
        max(fe_degrees.max, be_degrees.max),
    )
    return Discretization(
        mesh,
        boundary,
        fe_degrees,
        be_degrees,
        EXACT,
        sigma=config.sigma_fe,
        mu=config.mu_fe,
        layers=layers,
        label=f"n={layers}",
    )
