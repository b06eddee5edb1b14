"""
Benchmark problems.

Every module in this package exports a ``problem_definition`` and one
``*_builder(config, step)`` function returning the Discretization of a sweep
step. Modules are discovered at runtime by the autoloader.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

try:
    from hp_nitsche_coupling.geometry_mesh import BoundaryMesh, Mesh2D
    from hp_nitsche_coupling.hp_spaces import DegreeVector
    from hp_nitsche_coupling.models import ParameterError, StudyConfig, StudyMode
except ImportError:
    from ..geometry_mesh import BoundaryMesh, Mesh2D
    from ..hp_spaces import DegreeVector
    from ..models import ParameterError, StudyConfig, StudyMode


@dataclass(frozen=True)
class ExactSolution:
    """Harmonic exact solution with its gradient"""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    singular_points: Tuple[Tuple[float, float], ...] = ()

    def normal_derivative(self, points: np.ndarray, normals: np.ndarray) -> np.ndarray:
        return np.sum(self.gradient(points) * normals, axis=1)


@dataclass(frozen=True, eq=False)
class Discretization:
    """Meshes, degree vectors and exact solution of one sweep step"""

    mesh: Mesh2D
    boundary: BoundaryMesh
    fe_degrees: DegreeVector
    be_degrees: DegreeVector
    exact: ExactSolution
    sigma: float = 1.0
    mu: float = 0.0
    layers: int = 0
    label: str = field(default="")

    @property
    def p_max(self) -> int:
        return max(self.fe_degrees.max, self.be_degrees.max)


def sweep_length(config: StudyConfig) -> int:
    """Number of steps of the sweep described by config."""
    if config.mode is StudyMode.P:
        return config.max_p - config.min_p + 1
    if config.mode is StudyMode.HP:
        return config.max_layers - config.min_layers + 1
    return config.max_refinements


def check_step(config: StudyConfig, step: int) -> None:
    n = sweep_length(config)
    if not 0 <= step < n:
        raise ParameterError(f"Step {step} outside the sweep of {n} steps")


def uniform_degrees(mesh: Mesh2D, boundary: BoundaryMesh, degree: int) -> Tuple[DegreeVector, DegreeVector]:
    return (
        DegreeVector.uniform(mesh.n_elements, degree),
        DegreeVector.uniform(boundary.n_panels, degree),
    )


def refined_size(h0: float, step: int) -> float:
    return h0 / 2**step


__all__ = [
    "Discretization",
    "ExactSolution",
    "check_step",
    "refined_size",
    "sweep_length",
    "uniform_degrees",
]
