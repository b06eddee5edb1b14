"""
Tests for models.py - Core types, enums and errors
"""

import pytest
from pydantic import ValidationError

from hp_nitsche_coupling.models import (
    CSV_COLUMNS,
    CheckResult,
    ConfigError,
    ConvergenceRecord,
    CouplingError,
    ErrorBreakdown,
    ExampleName,
    GradingParams,
    ParameterError,
    ProblemDefinition,
    RateBand,
    SingularEvaluationError,
    SolverError,
    StudyConfig,
    StudyMode,
)


class TestEnums:
    """Tests for the string enums"""

    def test_study_mode_values(self):
        """Test mode values used on the command line"""
        assert StudyMode.H == "h"
        assert StudyMode("hp") is StudyMode.HP

    def test_example_names(self):
        """Test the shipped example names"""
        assert {e.value for e in ExampleName} == {"square_smooth", "lshape_config1", "lshape_config2"}


class TestGradingParams:
    """Tests for GradingParams model"""

    def test_defaults(self):
        grading = GradingParams()
        assert (grading.sigma, grading.layers, grading.slope) == (0.5, 0, 1.0)

    @pytest.mark.parametrize("sigma", [0.0, 1.0, 1.5])
    def test_sigma_range(self, sigma):
        """Test sigma must lie strictly between 0 and 1"""
        with pytest.raises(ValidationError):
            GradingParams(sigma=sigma)

    def test_frozen(self):
        grading = GradingParams()
        with pytest.raises(ValidationError):
            grading.layers = 3


class TestStudyConfig:
    """Tests for StudyConfig model"""

    def test_defaults(self):
        """Test an empty config selects the smooth square p-version"""
        config = StudyConfig()
        assert config.example is ExampleName.SQUARE_SMOOTH
        assert config.mode is StudyMode.P
        assert config.eta0 == 2.0
        assert config.be_scale == 0.25
        assert config.output is None

    def test_rational_ratio(self):
        """Test fe_be_ratio accepts 'a/b' strings"""
        assert StudyConfig(fe_be_ratio="4/5").fe_be_ratio == pytest.approx(0.8)
        assert StudyConfig(fe_be_ratio=" 2 ").fe_be_ratio == 2.0

    @pytest.mark.parametrize("ratio", ["a/b", "1/0"])
    def test_invalid_rational(self, ratio):
        with pytest.raises(ValidationError, match="Invalid rational"):
            StudyConfig(fe_be_ratio=ratio)

    def test_degree_bounds(self):
        with pytest.raises(ValidationError, match="min_p must not exceed max_p"):
            StudyConfig(min_p=4, max_p=2)

    def test_layer_bounds(self):
        with pytest.raises(ValidationError, match="min_layers"):
            StudyConfig(min_layers=5, max_layers=2)

    @pytest.mark.parametrize("field,value", [("eta0", 0.0), ("be_scale", 1.5), ("shape_tau", 1.0)])
    def test_ranges(self, field, value):
        with pytest.raises(ValidationError):
            StudyConfig(**{field: value})

    def test_gradings(self):
        config = StudyConfig(sigma_fe=0.2, mu_fe=1.5, sigma_be=0.3, mu_be=2.0)
        assert config.grading_fe(4) == GradingParams(sigma=0.2, layers=4, slope=1.5)
        assert config.grading_be(2).sigma == 0.3


class TestErrorBreakdown:
    """Tests for ErrorBreakdown model"""

    def test_from_components(self):
        errors = ErrorBreakdown.from_components(3.0, 4.0, 12.0)
        assert errors.total == pytest.approx(13.0)

    def test_inconsistent_total(self):
        with pytest.raises(ValidationError, match="root of the sum of squares"):
            ErrorBreakdown(fe_energy=1.0, be_energy=1.0, jump=1.0, total=3.0)

    def test_negative_component(self):
        with pytest.raises(ValidationError):
            ErrorBreakdown.from_components(-1.0, 0.0, 0.0)


class TestConvergenceRecord:
    """Tests for ConvergenceRecord model"""

    def test_dof_sum(self, make_record):
        record = make_record(n_fe=40, n_be=10)
        assert record.n_dofs == 50
        assert record.errors.total == pytest.approx(1.0)
        assert record.rate_running is None

    def test_dof_mismatch(self):
        with pytest.raises(ValidationError, match="n_fe \\+ n_be"):
            ConvergenceRecord(
                study="x",
                step=0,
                n_dofs=10,
                n_fe=5,
                n_be=4,
                h_max=0.5,
                p_max=1,
                sigma=1.0,
                mu=0.0,
                errors=ErrorBreakdown.from_components(1.0, 0.0, 0.0),
            )

    def test_csv_columns(self):
        assert CSV_COLUMNS[:4] == ["step", "N", "N_FE", "N_BE"]
        assert "err_jump" in CSV_COLUMNS
        assert CSV_COLUMNS[-1] == "rate_running"


class TestProblemDefinition:
    """Tests for ProblemDefinition model"""

    def test_valid(self):
        definition = ProblemDefinition(
            name="lshape_config2",
            description="L-shape",
            modes=(StudyMode.H, StudyMode.HP),
            expected_rates={StudyMode.H: RateBand(low=0.5, high=0.8)},
        )
        assert definition.dof_root == 0.5
        assert definition.exponential_modes == (StudyMode.HP,)
        assert definition.expected_rates[StudyMode.H].contains(0.8)
        assert not definition.expected_rates[StudyMode.H].contains(0.81)

    @pytest.mark.parametrize("name", ["", "   "])
    def test_empty_name(self, name):
        with pytest.raises(ValidationError, match="cannot be empty"):
            ProblemDefinition(name=name, description="d", modes=(StudyMode.H,))

    def test_unknown_name(self):
        with pytest.raises(ValidationError, match="Unknown problem name"):
            ProblemDefinition(name="cube", description="d", modes=(StudyMode.H,))


class TestErrors:
    """Tests for the error hierarchy"""

    def test_base_error_with_cause(self):
        cause = KeyError("eta")
        error = ConfigError("Bad file", cause=cause)
        assert isinstance(error, CouplingError)
        assert "caused by" in str(error)
        assert error.message == "Bad file"

    def test_parameter_error_is_value_error(self):
        with pytest.raises(ValueError):
            raise ParameterError("bad")

    def test_singular_evaluation(self):
        error = SingularEvaluationError((0.5, 0.25))
        assert error.point == (0.5, 0.25)
        assert "coincident" in str(error)

    def test_solver_error_pivot(self):
        error = SolverError("Singular", smallest_pivot=1e-20)
        assert error.smallest_pivot == 1e-20
        assert "1.000e-20" in str(error)

    def test_check_result(self):
        result = CheckResult(name="BEM identities", passed=True)
        assert result.detail == ""
        assert result.seconds == 0.0
