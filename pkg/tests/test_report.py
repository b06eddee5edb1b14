"""Tests for report.py - rich tables of records, studies, summaries and checks
"""

import pytest
from rich.console import Console

from hp_nitsche_coupling.models import CheckResult, StudyMode
from hp_nitsche_coupling.report import (
    checks_table,
    record_table,
    render,
    study_table,
    summary_lines,
    summary_table,
)
from hp_nitsche_coupling.runner import get_registry, records_to_frame, summarize


def rendered(table):
    console = Console(record=True, width=160)
    render(table, console)
    return console.export_text()


@pytest.fixture
def h_summary(h_study_records):
    return summarize(records_to_frame(h_study_records), get_registry().get_definition("lshape_config2"))


class TestTables:
    """Tests for the rendered tables"""

    def test_record_table(self, make_record):
        text = rendered(record_table(make_record(step=3, total=0.5)))
        assert "square_smooth-p step 3" in text
        assert "50 (40 + 10)" in text
        assert "5.0000e-01" in text

    def test_study_table(self, h_study_records):
        text = rendered(study_table(h_study_records))
        assert "err_total" in text
        assert text.count("\n") > len(h_study_records)
        assert "0.03125" in text

    def test_empty_study_table(self):
        assert "study" in rendered(study_table([]))

    def test_summary_table(self, h_summary):
        text = rendered(summary_table(h_summary))
        assert "h-rate" in text
        assert "0.667" in text
        assert "pass" in text

    def test_checks_table(self):
        results = [
            CheckResult(name="quadrature exactness", passed=True, detail="exact", seconds=0.1),
            CheckResult(name="BEM identities", passed=False, detail="rate 0.9"),
        ]
        text = rendered(checks_table(results))
        assert "quadrature exactness" in text
        assert "FAIL" in text
        assert "rate 0.9" in text


class TestSummaryLines:
    """Tests for the plain-text summary"""

    def test_h_summary(self, h_summary):
        lines = summary_lines(h_summary)
        assert lines[0] == "mode h, 5 records"
        assert "h-rate 0.667" in lines
        assert "expected band [0.56, 0.76]" in lines
        assert any(line.startswith("N-rate") for line in lines)

    def test_hp_without_fit(self, h_study_records):
        summary = summarize(records_to_frame(h_study_records[:3]), mode=StudyMode.HP)
        assert "too few records for an exponential fit" in summary_lines(summary)
