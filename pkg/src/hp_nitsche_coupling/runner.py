"""
Orchestration of single solves, convergence studies and CSV summaries.
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import pandas as pd
from scipy.sparse import csr_matrix

try:
    from hp_nitsche_coupling.analysis import (
        algebraic_fit,
        audit_monotonicity,
        energy_error,
        exponential_fit,
        running_rate,
    )
    from hp_nitsche_coupling.autoloader import ProblemRegistry, discover_problems
    from hp_nitsche_coupling.bem_operators import (
        ScaleTransform,
        SteklovMatrix,
        assemble_be_neumann_load,
        assemble_layers,
        discrete_steklov,
        newton_rhs,
    )
    from hp_nitsche_coupling.fem_assembly import Coefficient, assemble_load, assemble_stiffness
    from hp_nitsche_coupling.geometry_mesh import (
        DEFAULT_SHAPE_TAU,
        InterfaceOverlay,
        check_regular,
        dump_mesh,
        overlay,
        trace_partition,
    )
    from hp_nitsche_coupling.hp_spaces import (
        BeTraceSpace,
        FeSpace,
        dump_dofs,
        enumerate_flux_dofs,
        enumerate_fe_dofs,
        enumerate_trace_dofs,
    )
    from hp_nitsche_coupling.models import (
        CSV_COLUMNS,
        BoundaryTag,
        ConfigError,
        ConvergenceRecord,
        ErrorBreakdown,
        ProblemDefinition,
        RateBand,
        RateFit,
        StudyConfig,
        StudyMode,
        UnsupportedFeatureError,
    )
    from hp_nitsche_coupling.nitsche_coupling import (
        CouplingForms,
        assemble_flux_coupling,
        assemble_penalty,
        compute_stabilization,
    )
    from hp_nitsche_coupling.problems import Discretization, sweep_length
    from hp_nitsche_coupling.system_solver import (
        BlockSystem,
        Solution,
        assemble_global,
        dump_system,
        galerkin_residual,
        solve,
    )
except ImportError:
    from .analysis import (
        algebraic_fit,
        audit_monotonicity,
        energy_error,
        exponential_fit,
        running_rate,
    )
    from .autoloader import ProblemRegistry, discover_problems
    from .bem_operators import (
        ScaleTransform,
        SteklovMatrix,
        assemble_be_neumann_load,
        assemble_layers,
        discrete_steklov,
        newton_rhs,
    )
    from .fem_assembly import Coefficient, assemble_load, assemble_stiffness
    from .geometry_mesh import (
        DEFAULT_SHAPE_TAU,
        InterfaceOverlay,
        check_regular,
        dump_mesh,
        overlay,
        trace_partition,
    )
    from .hp_spaces import (
        BeTraceSpace,
        FeSpace,
        dump_dofs,
        enumerate_flux_dofs,
        enumerate_fe_dofs,
        enumerate_trace_dofs,
    )
    from .models import (
        CSV_COLUMNS,
        BoundaryTag,
        ConfigError,
        ConvergenceRecord,
        ErrorBreakdown,
        ProblemDefinition,
        RateBand,
        RateFit,
        StudyConfig,
        StudyMode,
        UnsupportedFeatureError,
    )
    from .nitsche_coupling import (
        CouplingForms,
        assemble_flux_coupling,
        assemble_penalty,
        compute_stabilization,
    )
    from .problems import Discretization, sweep_length
    from .system_solver import (
        BlockSystem,
        Solution,
        assemble_global,
        dump_system,
        galerkin_residual,
        solve,
    )

# Configure logging
logger = logging.getLogger(__name__)

_registry: Optional[ProblemRegistry] = None


def get_registry() -> ProblemRegistry:
    """Problem registry, discovered on first use."""
    global _registry
    if _registry is None:
        _registry = discover_problems()
    return _registry


@dataclass(frozen=True, eq=False)
class CoupledProblem:
    """All assembled objects of one discretization"""

    discretization: Discretization
    fe_space: FeSpace
    be_space: BeTraceSpace
    coefficient: Coefficient
    overlay: InterfaceOverlay
    steklov: SteklovMatrix
    stiffness: csr_matrix
    system: BlockSystem

    def forms(self) -> CouplingForms:
        """Bilinear forms of the assembled problem for the stability checks."""
        return CouplingForms(
            self.fe_space,
            self.be_space,
            self.overlay,
            self.stiffness,
            self.steklov,
            self.coefficient,
        )


@dataclass(frozen=True, eq=False)
class StepResult:
    """Solved step with its error record"""

    problem: CoupledProblem
    solution: Solution
    record: ConvergenceRecord


def assemble_problem(
    disc: Discretization,
    eta0: float = 2.0,
    be_scale: float = 0.25,
    shape_tau: float = DEFAULT_SHAPE_TAU,
) -> CoupledProblem:
    """
    Build spaces, operators and the global system of a discretization.

    The FE mesh must be conforming with h_K / rho_K <= shape_tau. The BE
    operators are assembled on the geometry scaled by be_scale about the
    centroid of the BE boundary.

    Raises:
        ConsistencyError: If the FE mesh is not regular
    """
    mesh, boundary, exact = disc.mesh, disc.boundary, disc.exact
    check_regular(mesh, shape_tau)
    fe_space = enumerate_fe_dofs(mesh, disc.fe_degrees)
    be_space = enumerate_trace_dofs(boundary, disc.be_degrees)
    flux_space = enumerate_flux_dofs(boundary, disc.be_degrees)
    coefficient = Coefficient.from_mesh(mesh)

    transform = ScaleTransform.for_boundary(boundary, be_scale)
    steklov = discrete_steklov(assemble_layers(boundary, be_space, flux_space, transform))

    arcs = boundary.interface_arcs
    ov = overlay(trace_partition(mesh, arcs), trace_partition(boundary, arcs))
    ov = compute_stabilization(ov, fe_space, eta0, coefficient)
    logger.debug("Interface overlay: %d segments", len(ov.segments))

    coupling = assemble_penalty(ov, fe_space, be_space, coefficient) + assemble_flux_coupling(
        ov, fe_space, be_space, coefficient
    )
    fe_load = assemble_load(fe_space, g=exact.normal_derivative)
    be_load = newton_rhs(be_space)
    if any(p.tag is BoundaryTag.NEUMANN for p in boundary.panels):
        be_load = be_load + assemble_be_neumann_load(be_space, exact.normal_derivative)
    stiffness = assemble_stiffness(fe_space, coefficient)
    system = assemble_global(
        stiffness,
        steklov.S_hat,
        coupling,
        fe_load,
        be_load,
        n_fe_outer=fe_space.n_outer,
        n_be_interface=be_space.n_interface,
    )
    return CoupledProblem(disc, fe_space, be_space, coefficient, ov, steklov, stiffness, system)


def solve_step(
    config: StudyConfig,
    step: int,
    registry: Optional[ProblemRegistry] = None,
    dump_dir: Optional[Union[str, Path]] = None,
    previous: Optional[ConvergenceRecord] = None,
) -> StepResult:
    """
    Build, solve and measure one step of the configured sweep.

    Raises:
        UnsupportedFeatureError: If the example does not support the mode
        ConsistencyError: If the FE mesh exceeds config.shape_tau
    """
    registry = registry or get_registry()
    example = config.example.value
    definition = registry.get_definition(example)
    if config.mode not in definition.modes:
        raise UnsupportedFeatureError(f"{example} does not support the {config.mode.value}-version")
    builder = registry.get_builder(example)

    start = time.perf_counter()
    disc = builder(config, step)
    problem = assemble_problem(disc, config.eta0, config.be_scale, config.shape_tau)
    solution = solve(problem.system)
    residual = galerkin_residual(problem.system, solution)
    errors = energy_error(
        solution,
        disc.exact.value,
        disc.exact.gradient,
        problem.fe_space,
        problem.be_space,
        problem.overlay,
        problem.steklov,
        problem.coefficient,
        disc.exact.singular_points,
    )
    elapsed = time.perf_counter() - start

    n_fe, n_be = problem.fe_space.n_dofs, problem.be_space.n_dofs
    rate = None
    if previous is not None:
        rate = running_rate(
            (previous.errors.total, _sweep_variable(previous, config.mode), previous.n_dofs),
            (errors.total, disc.mesh.h_max if config.mode is StudyMode.H else disc.p_max, n_fe + n_be),
            config.mode,
        )
    record = ConvergenceRecord(
        study=f"{example}-{config.mode.value}",
        step=step,
        n_dofs=n_fe + n_be,
        n_fe=n_fe,
        n_be=n_be,
        h_max=disc.mesh.h_max,
        p_max=disc.p_max,
        sigma=disc.sigma,
        mu=disc.mu,
        layers=disc.layers,
        errors=errors,
        wall_time=elapsed,
        residual=residual,
        rate_running=rate,
    )
    logger.info(
        "%s step %d (%s): N=%d (FE %d, BE %d), error %.4e, %s, %.2fs",
        record.study,
        step,
        disc.label,
        record.n_dofs,
        n_fe,
        n_be,
        errors.total,
        solution.factorization,
        elapsed,
    )
    if dump_dir is not None:
        write_dumps(problem, dump_dir)
    return StepResult(problem, solution, record)


def _sweep_variable(record: ConvergenceRecord, mode: StudyMode) -> float:
    return record.h_max if mode is StudyMode.H else record.p_max


def write_dumps(problem: CoupledProblem, directory: Union[str, Path]) -> Path:
    """Mesh, DOF maps and global system as plain text files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    disc = problem.discretization
    (directory / "mesh.txt").write_text(dump_mesh(disc.mesh, disc.boundary))
    (directory / "fe_dofs.txt").write_text(dump_dofs(problem.fe_space))
    (directory / "be_dofs.txt").write_text(dump_dofs(problem.be_space))
    dump_system(problem.system, directory)
    return directory


def run_study(config: StudyConfig, registry: Optional[ProblemRegistry] = None) -> List[ConvergenceRecord]:
    """
    Run every step of the configured sweep and write the CSV if an output path is set.

    Solver failures propagate; records of finished steps are not written then.
    """
    registry = registry or get_registry()
    steps = sweep_length(config)
    logger.info(
        "Running %s %s-version: %d steps, eta0=%s",
        config.example.value,
        config.mode.value,
        steps,
        config.eta0,
    )
    records: List[ConvergenceRecord] = []
    for step in range(steps):
        previous = records[-1] if records else None
        records.append(solve_step(config, step, registry, previous=previous).record)
    audit_monotonicity(records)
    if config.output is not None:
        write_csv(records, config.output)
    return records


def records_to_frame(records: List[ConvergenceRecord]) -> pd.DataFrame:
    rows = [
        {
            "step": r.step,
            "N": r.n_dofs,
            "N_FE": r.n_fe,
            "N_BE": r.n_be,
            "h_max": r.h_max,
            "p_max": r.p_max,
            "sigma": r.sigma,
            "mu": r.mu,
            "err_total": r.errors.total,
            "err_fe": r.errors.fe_energy,
            "err_be": r.errors.be_energy,
            "err_jump": r.errors.jump,
            "rate_running": r.rate_running,
        }
        for r in records
    ]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_csv(records: List[ConvergenceRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_to_frame(records).to_csv(path, index=False, float_format="%.12e")
    logger.info("Wrote %d records to %s", len(records), path)
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """
    Load a study CSV.

    Raises:
        ConfigError: If the file is missing, empty or lacks required columns
    """
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as e:
        raise ConfigError(f"CSV file not found: {path}", cause=e) from e
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ConfigError(f"Cannot parse CSV file {path}", cause=e) from e
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError(f"CSV file {path} lacks columns: {', '.join(missing)}")
    if frame.empty:
        raise ConfigError(f"CSV file {path} has no records")
    if (frame["N"] != frame["N_FE"] + frame["N_BE"]).any():
        raise ConfigError(f"CSV file {path} has rows with N != N_FE + N_BE")
    return frame


def records_from_frame(frame: pd.DataFrame, study: str = "csv") -> List[ConvergenceRecord]:
    records = []
    for row in frame.itertuples(index=False):
        rate = None if pd.isna(row.rate_running) else float(row.rate_running)
        records.append(
            ConvergenceRecord(
                study=study,
                step=int(row.step),
                n_dofs=int(row.N),
                n_fe=int(row.N_FE),
                n_be=int(row.N_BE),
                h_max=float(row.h_max),
                p_max=int(row.p_max),
                sigma=float(row.sigma),
                mu=float(row.mu),
                errors=ErrorBreakdown(
                    fe_energy=float(row.err_fe),
                    be_energy=float(row.err_be),
                    jump=float(row.err_jump),
                    total=float(row.err_total),
                ),
                rate_running=rate,
            )
        )
    return records


def infer_mode(frame: pd.DataFrame) -> StudyMode:
    """h when only h varies, p when only p varies, hp otherwise."""
    h_varies = frame["h_max"].nunique() > 1
    p_varies = frame["p_max"].nunique() > 1
    if h_varies and not p_varies:
        return StudyMode.H
    if p_varies and not h_varies:
        return StudyMode.P
    return StudyMode.HP


@dataclass(frozen=True)
class StudySummary:
    """Fitted rates of one study with the verdicts against the expectations"""

    mode: StudyMode
    n_records: int
    algebraic: Optional[RateFit] = None
    exponential: Optional[RateFit] = None
    band: Optional[RateBand] = None
    min_correlation: Optional[float] = None

    @property
    def algebraic_passed(self) -> Optional[bool]:
        if self.algebraic is None or self.band is None:
            return None
        return self.band.contains(self.algebraic.rate)

    @property
    def exponential_passed(self) -> Optional[bool]:
        if self.exponential is None or self.min_correlation is None:
            return None
        return self.exponential.rate > 0.0 and (self.exponential.correlation or 0.0) > self.min_correlation

    @property
    def passed(self) -> Optional[bool]:
        verdicts = [v for v in (self.algebraic_passed, self.exponential_passed) if v is not None]
        return all(verdicts) if verdicts else None


def summarize(
    frame: pd.DataFrame,
    definition: Optional[ProblemDefinition] = None,
    mode: Optional[StudyMode] = None,
) -> StudySummary:
    """
    Fit rates to the records of a study.

    h- and p-studies get an algebraic fit (from three records). hp-studies,
    and p-studies of problems listing p among their exponential modes, get
    an exponential fit (from four records) against N^dof_root or p.
    """
    mode = StudyMode(mode) if mode is not None else infer_mode(frame)
    errors = frame["err_total"].to_numpy(dtype=float)
    n = len(errors)
    algebraic = exponential = None
    if mode is not StudyMode.HP and n >= 3:
        variable = frame["h_max"] if mode is StudyMode.H else frame["p_max"]
        algebraic = algebraic_fit(variable.to_numpy(dtype=float), errors, frame["N"].to_numpy(), mode)
    exponential_modes = definition.exponential_modes if definition else (StudyMode.HP,)
    if mode in exponential_modes and n >= 4:
        if mode is StudyMode.HP:
            root = definition.dof_root if definition else 0.5
            exponential = exponential_fit(frame["N"].to_numpy(dtype=float), errors, root)
        else:
            exponential = exponential_fit(frame["p_max"].to_numpy(dtype=float), errors, 1.0, "p")
    band = definition.expected_rates.get(mode) if definition else None
    return StudySummary(
        mode=mode,
        n_records=n,
        algebraic=algebraic,
        exponential=exponential,
        band=band,
        min_correlation=definition.min_correlation if definition and exponential else None,
    )
