"""
Rich rendering of solve results, study tables, rate summaries and checks
"""

import logging
from typing import List, Optional, Sequence

from rich.console import Console
from rich.table import Table

try:
    from hp_nitsche_coupling.models import CheckResult, ConvergenceRecord, StudyMode
    from hp_nitsche_coupling.runner import StudySummary
except ImportError:
    from .models import CheckResult, ConvergenceRecord, StudyMode
    from .runner import StudySummary

# Configure logging
logger = logging.getLogger(__name__)


def _sci(x: Optional[float]) -> str:
    return "-" if x is None else f"{x:.4e}"


def _verdict(passed: Optional[bool]) -> str:
    if passed is None:
        return "-"
    return "[green]pass[/green]" if passed else "[red]FAIL[/red]"


def record_table(record: ConvergenceRecord) -> Table:
    """Error breakdown of a single solve."""
    table = Table(title=f"{record.study} step {record.step}")
    table.add_column("Quantity")
    table.add_column("Value", justify="right")
    rows = [
        ("N (FE + BE)", f"{record.n_dofs} ({record.n_fe} + {record.n_be})"),
        ("h_max", f"{record.h_max:.4g}"),
        ("p_max", str(record.p_max)),
        ("FE energy error", _sci(record.errors.fe_energy)),
        ("BE energy error", _sci(record.errors.be_energy)),
        ("Jump error", _sci(record.errors.jump)),
        ("Total error", _sci(record.errors.total)),
        ("Relative residual", _sci(record.residual)),
        ("Wall time [s]", f"{record.wall_time:.2f}"),
    ]
    for name, value in rows:
        table.add_row(name, value)
    return table


def study_table(records: Sequence[ConvergenceRecord]) -> Table:
    """One row per sweep step."""
    title = records[0].study if records else "study"
    table = Table(title=title)
    for name in ("step", "N", "N_FE", "N_BE", "h_max", "p_max", "err_total", "rate"):
        table.add_column(name, justify="right")
    for r in records:
        rate = "-" if r.rate_running is None else f"{r.rate_running:.3f}"
        table.add_row(
            str(r.step),
            str(r.n_dofs),
            str(r.n_fe),
            str(r.n_be),
            f"{r.h_max:.4g}",
            str(r.p_max),
            _sci(r.errors.total),
            rate,
        )
    return table


def summary_lines(summary: StudySummary) -> List[str]:
    """Plain-text lines of a rate summary, e.g. 'h-rate 0.667'."""
    lines = [f"mode {summary.mode.value}, {summary.n_records} records"]
    fit = summary.algebraic
    if fit is not None:
        lines.append(f"{fit.variable}-rate {fit.rate:.3f}")
        if fit.dof_rate is not None:
            lines.append(f"N-rate {fit.dof_rate:.3f}")
        if summary.band is not None:
            lines.append(f"expected band [{summary.band.low:g}, {summary.band.high:g}]")
    exp = summary.exponential
    if exp is not None:
        lines.append(f"exponential b {exp.rate:.4f} vs {exp.variable}, correlation {exp.correlation:.4f}")
    if summary.mode is StudyMode.HP and exp is None:
        lines.append("too few records for an exponential fit")
    return lines


def summary_table(summary: StudySummary) -> Table:
    table = Table(title=f"Rate summary ({summary.mode.value}-version)")
    table.add_column("Fit")
    table.add_column("Value", justify="right")
    table.add_column("Correlation", justify="right")
    table.add_column("Verdict", justify="center")
    if summary.algebraic is not None:
        fit = summary.algebraic
        table.add_row(f"{fit.variable}-rate", f"{fit.rate:.3f}", f"{fit.correlation:.4f}", _verdict(summary.algebraic_passed))
        table.add_row("N-rate", f"{fit.dof_rate:.3f}", "-", "-")
    if summary.exponential is not None:
        exp = summary.exponential
        table.add_row(
            f"b vs {exp.variable}", f"{exp.rate:.4f}", f"{exp.correlation:.4f}", _verdict(summary.exponential_passed)
        )
    return table


def checks_table(results: Sequence[CheckResult]) -> Table:
    table = Table(title="Property checks")
    table.add_column("Check")
    table.add_column("Result", justify="center")
    table.add_column("Detail")
    table.add_column("Time [s]", justify="right")
    for result in results:
        table.add_row(result.name, _verdict(result.passed), result.detail, f"{result.seconds:.2f}")
    return table


def render(table: Table, console: Optional[Console] = None) -> None:
    (console or Console()).print(table)
