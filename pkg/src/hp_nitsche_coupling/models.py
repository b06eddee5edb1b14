"""
Core types, enums and errors for the hp FE/BE Nitsche coupling solver
"""

from __future__ import annotations

import math
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ElementKind(str, Enum):
    """Reference element shapes"""

    INTERVAL = "interval"
    TRIANGLE = "triangle"
    PARALLELOGRAM = "parallelogram"


class BoundaryTag(str, Enum):
    """Boundary condition label of a mesh edge or panel"""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    INTERFACE = "interface"


class PanelRelation(str, Enum):
    """Geometric relation of two boundary panels"""

    IDENTICAL = "identical"
    ADJACENT = "adjacent"
    DISJOINT = "disjoint"


class ExampleName(str, Enum):
    """Shipped benchmark problems"""

    SQUARE_SMOOTH = "square_smooth"
    LSHAPE_CONFIG1 = "lshape_config1"
    LSHAPE_CONFIG2 = "lshape_config2"


class StudyMode(str, Enum):
    """Refinement strategy of a convergence study"""

    H = "h"
    P = "p"
    HP = "hp"


class GradingParams(BaseModel):
    """
    Geometric grading toward a corner.

    Element sizes shrink like sigma**layer toward the corner; polynomial
    degrees grow linearly with slope away from it.
    """

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(0.5, description="Grading ratio", gt=0.0, lt=1.0)
    layers: int = Field(0, description="Number of geometric layers", ge=0)
    slope: float = Field(1.0, description="Slope of the linear degree vector", gt=0.0)


class StudyConfig(BaseModel):
    """
    Configuration of a convergence study.

    Every field has a default, so an empty config file selects the smooth square
    problem with the p-version at eta0 = 2.
    """

    model_config = ConfigDict(frozen=True)

    example: ExampleName = Field(
        ExampleName.SQUARE_SMOOTH, description="Benchmark problem to solve"
    )
    mode: StudyMode = Field(StudyMode.P, description="Refinement strategy")
    eta0: float = Field(2.0, description="Nitsche stabilization factor", gt=0.0)
    sigma_fe: float = Field(0.5, description="Grading ratio of the FE mesh", gt=0.0, lt=1.0)
    sigma_be: float = Field(0.5, description="Grading ratio of the BE mesh", gt=0.0, lt=1.0)
    mu_fe: float = Field(1.0, description="Degree slope on the FE mesh", gt=0.0)
    mu_be: float = Field(1.0, description="Degree slope on the BE mesh", gt=0.0)
    min_layers: int = Field(1, description="First number of layers in hp studies", ge=0)
    max_layers: int = Field(6, description="Last number of layers in hp studies", ge=0)
    min_p: int = Field(1, description="First degree in p studies", ge=1)
    max_p: int = Field(6, description="Last degree in p studies", ge=1)
    max_refinements: int = Field(5, description="Number of steps in h studies", ge=1)
    degree: int = Field(1, description="Fixed polynomial degree of h studies", ge=1)
    fe_be_ratio: float = Field(
        0.8,
        description="BE panel size over FE element size on the interface (h2/h1)",
        gt=0.0,
    )
    shape_tau: float = Field(60.0, description="Bound on h_K / rho_K", gt=1.0)
    be_scale: float = Field(
        0.25, description="Scale applied to the BE geometry before assembly", gt=0.0, le=1.0
    )
    output: Optional[Path] = Field(None, description="CSV output path")

    @field_validator("fe_be_ratio", mode="before")
    @classmethod
    def parse_ratio(cls, v: Any) -> float:
        """Accept rationals written as 'a/b' as well as plain numbers."""
        if isinstance(v, str):
            try:
                v = float(Fraction(v.strip()))
            except (ValueError, ZeroDivisionError) as e:
                raise ValueError(f"Invalid rational '{v}'") from e
        return v

    @model_validator(mode="after")
    def check_ranges(self) -> "StudyConfig":
        """Validate the sweep bounds."""
        if self.min_p > self.max_p:
            raise ValueError("min_p must not exceed max_p")
        if self.min_layers > self.max_layers:
            raise ValueError("min_layers must not exceed max_layers")
        return self

    def grading_fe(self, layers: int) -> GradingParams:
        return GradingParams(sigma=self.sigma_fe, layers=layers, slope=self.mu_fe)

    def grading_be(self, layers: int) -> GradingParams:
        return GradingParams(sigma=self.sigma_be, layers=layers, slope=self.mu_be)


class ErrorBreakdown(BaseModel):
    """
    Components of the energy-norm error.

    total is the root of the sum of squares of the three components.
    """

    model_config = ConfigDict(frozen=True)

    fe_energy: float = Field(description="kappa-weighted H1 seminorm error on the FE domain", ge=0.0)
    be_energy: float = Field(description="Discrete Steklov energy of the trace error", ge=0.0)
    jump: float = Field(description="eta-weighted interface jump norm", ge=0.0)
    total: float = Field(description="Root of the sum of squares", ge=0.0)

    @classmethod
    def from_components(cls, fe_energy: float, be_energy: float, jump: float) -> "ErrorBreakdown":
        return cls(
            fe_energy=fe_energy,
            be_energy=be_energy,
            jump=jump,
            total=math.sqrt(fe_energy**2 + be_energy**2 + jump**2),
        )

    @model_validator(mode="after")
    def check_total(self) -> "ErrorBreakdown":
        expected = math.sqrt(self.fe_energy**2 + self.be_energy**2 + self.jump**2)
        if abs(self.total - expected) > 1e-12 * max(expected, 1e-300):
            raise ValueError("total must be the root of the sum of squares of the components")
        return self


class ConvergenceRecord(BaseModel):
    """One row of a convergence study"""

    model_config = ConfigDict(frozen=True)

    study: str = Field(description="Study identifier, e.g. 'square_smooth-p'")
    step: int = Field(description="Zero-based step of the sweep", ge=0)
    n_dofs: int = Field(description="Total number of degrees of freedom", ge=0)
    n_fe: int = Field(description="FE degrees of freedom", ge=0)
    n_be: int = Field(description="BE trace degrees of freedom", ge=0)
    h_max: float = Field(description="Largest FE element diameter", gt=0.0)
    p_max: int = Field(description="Largest polynomial degree", ge=1)
    sigma: float = Field(description="Grading ratio (1 for uniform meshes)", gt=0.0, le=1.0)
    mu: float = Field(description="Degree slope (0 for uniform degrees)", ge=0.0)
    layers: int = Field(0, description="Number of geometric layers", ge=0)
    errors: ErrorBreakdown
    wall_time: float = Field(0.0, description="Seconds spent on the step", ge=0.0)
    residual: float = Field(0.0, description="Relative algebraic residual", ge=0.0)
    rate_running: Optional[float] = Field(
        None, description="Rate between this record and the previous one"
    )

    @model_validator(mode="after")
    def check_dofs(self) -> "ConvergenceRecord":
        if self.n_dofs != self.n_fe + self.n_be:
            raise ValueError("n_dofs must equal n_fe + n_be")
        return self


class RateBand(BaseModel):
    """Expected interval for a fitted rate"""

    model_config = ConfigDict(frozen=True)

    low: float
    high: float

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


class ProblemDefinition(BaseModel):
    """
    Metadata of a benchmark problem.

    Discovered from the problems package together with its builder function.
    """

    name: str = Field(description="Unique name of the problem")
    description: str = Field(description="Human-readable description")
    modes: Tuple[StudyMode, ...] = Field(description="Supported study modes")
    dof_root: float = Field(
        0.5, description="Exponent of N in the exponential hp fit", gt=0.0, le=1.0
    )
    expected_rates: Dict[StudyMode, RateBand] = Field(
        default_factory=dict, description="Expected algebraic rate bands per mode"
    )
    min_correlation: float = Field(
        0.97, description="Required correlation of the exponential fit", ge=0.0, le=1.0
    )
    exponential_modes: Tuple[StudyMode, ...] = Field(
        (StudyMode.HP,), description="Modes whose errors are expected to decay exponentially"
    )

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        """Validate that the name refers to a shipped example."""
        if not v or not v.strip():
            raise ValueError("Problem name cannot be empty")
        if v not in {e.value for e in ExampleName}:
            raise ValueError(f"Unknown problem name '{v}'")
        return v


class RateFit(BaseModel):
    """Result of a least-squares rate fit"""

    model_config = ConfigDict(frozen=True)

    rate: float = Field(description="Fitted rate (algebraic order or exponential b)")
    dof_rate: Optional[float] = Field(None, description="Algebraic rate with respect to N")
    correlation: Optional[float] = Field(None, description="Absolute correlation coefficient")
    variable: str = Field(description="Independent variable of the fit")
    n_records: int = Field(ge=0)


class CheckResult(BaseModel):
    """Outcome of one property check of the verify command"""

    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


# Error types
class CouplingError(Exception):
    """
    Base error for the coupling solver.

    Args:
        message: Error message describing what went wrong
        cause: Optional underlying exception that caused this error
    """

    def __init__(self, message: str, cause: Optional[Exception] = None):
        super().__init__(message)
        self.cause = cause
        self.message = message

    def __str__(self) -> str:
        """String representation of the error."""
        if self.cause:
            return f"{self.message} (caused by: {self.cause})"
        return self.message


class ParameterError(CouplingError, ValueError):
    """Invalid numerical parameter or argument"""

    pass


class ConsistencyError(CouplingError):
    """Inconsistent meshes, partitions or block dimensions"""

    pass


class SingularEvaluationError(CouplingError, ValueError):
    """
    Kernel evaluated on its singularity.

    Args:
        point: Coordinates at which source and target coincide
    """

    def __init__(self, point: Any):
        self.point = point
        super().__init__(f"Kernel evaluated at coincident points {point}")


class CapacityError(CouplingError):
    """Single layer Galerkin matrix is not positive definite"""

    pass


class SolverError(CouplingError):
    """
    Singular global system.

    Args:
        message: Error message
        smallest_pivot: Magnitude of the smallest pivot found by the factorization
    """

    def __init__(self, message: str, smallest_pivot: float):
        self.smallest_pivot = smallest_pivot
        super().__init__(f"{message} (smallest pivot {smallest_pivot:.3e})")


class UnsupportedFeatureError(CouplingError):
    """Requested feature lies outside the supported problem class"""

    pass


class ConfigError(CouplingError):
    """Malformed configuration file or CSV input"""

    pass


CSV_COLUMNS: List[str] = [
    "step",
    "N",
    "N_FE",
    "N_BE",
    "h_max",
    "p_max",
    "sigma",
    "mu",
    "err_total",
    "err_fe",
    "err_be",
    "err_jump",
    "rate_running",
]
