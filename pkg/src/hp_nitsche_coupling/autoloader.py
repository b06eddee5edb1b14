"""
Problem autoloader - dynamically discovers benchmark problems from the problems package
"""

import importlib
import logging
import os
import pkgutil
from typing import Callable, Dict, List, Optional

try:
    from hp_nitsche_coupling.models import ParameterError, ProblemDefinition, StudyConfig
    from hp_nitsche_coupling.problems import Discretization
except ImportError:
    from .models import ParameterError, ProblemDefinition, StudyConfig
    from .problems import Discretization

# Configure logging
logger = logging.getLogger(__name__)

# Type for problem builder function
ProblemBuilder = Callable[[StudyConfig, int], Discretization]


class ProblemRegistry:
    """
    Registry for problem definitions and their builders.

    Maintains the discovered benchmark problems keyed by name.
    """

    def __init__(self):
        self.problems: List[ProblemDefinition] = []
        self.builders: Dict[str, ProblemBuilder] = {}
        logger.debug("ProblemRegistry initialized")

    def register(self, definition: ProblemDefinition, builder: ProblemBuilder) -> None:
        """
        Register a problem definition with its builder.

        Args:
            definition: Problem metadata
            builder: Function building the discretization of a sweep step
        """
        if not isinstance(definition, ProblemDefinition):
            raise TypeError("definition must be a ProblemDefinition instance")
        if not callable(builder):
            raise TypeError("builder must be callable")
        if definition.name in self.builders:
            raise ValueError(f"Problem '{definition.name}' is already registered")

        self.problems.append(definition)
        self.builders[definition.name] = builder
        logger.debug("Registered problem: %s", definition.name)

    @property
    def names(self) -> List[str]:
        return sorted(self.builders)

    def get_builder(self, name: str) -> Optional[ProblemBuilder]:
        builder = self.builders.get(name)
        if builder is None:
            logger.warning("No builder found for problem: %s", name)
        return builder

    def get_definition(self, name: str) -> ProblemDefinition:
        """
        Definition of a registered problem.

        Raises:
            ParameterError: If no problem of that name is registered
        """
        for definition in self.problems:
            if definition.name == name:
                return definition
        raise ParameterError(f"Unknown problem '{name}'; available: {', '.join(self.names)}")


def discover_problems(package: str = "hp_nitsche_coupling.problems") -> ProblemRegistry:
    """
    Discover all problems with their builders from the problems package.

    Each problem module should export:
    - problem_definition: ProblemDefinition or dict with problem metadata
    - *_builder: Function (config, step) -> Discretization

    Modules whose name starts with an underscore are helpers and are skipped.

    Returns:
        ProblemRegistry containing all discovered problems

    Raises:
        ImportError: If the problems package cannot be imported
    """
    logger.debug("Starting problem discovery")
    registry = ProblemRegistry()

    try:
        problems_package = importlib.import_module(package)
    except ImportError as e:
        logger.error("Failed to import problems package: %s", e)
        raise

    if hasattr(problems_package, "__path__"):
        problems_dir = problems_package.__path__[0]
    else:
        problems_dir = os.path.dirname(problems_package.__file__)

    loaded_count = 0
    failed_count = 0

    for _, module_name, _ in pkgutil.iter_modules([problems_dir]):
        if module_name.startswith("_"):
            logger.debug("Skipping module: %s", module_name)
            continue

        try:
            module = importlib.import_module(f"{package}.{module_name}")

            if not hasattr(module, "problem_definition"):
                logger.warning("Module %s has no problem_definition, skipping", module_name)
                continue

            definition = getattr(module, "problem_definition")
            if isinstance(definition, dict):
                definition = ProblemDefinition(**definition)

            builder = None
            for attr_name in dir(module):
                if attr_name.endswith("_builder") and callable(getattr(module, attr_name)):
                    builder = getattr(module, attr_name)
                    break

            if builder is None:
                logger.warning("Problem %s in %s has no builder function", definition.name, module_name)
                failed_count += 1
                continue

            registry.register(definition, builder)
            loaded_count += 1
            logger.debug("Loaded problem: %s from %s", definition.name, module_name)

        except Exception as e:
            logger.error("Failed to load problem %s: %s", module_name, e, exc_info=True)
            failed_count += 1
            continue

    logger.debug("Problem discovery complete: %d loaded, %d failed", loaded_count, failed_count)
    return registry
