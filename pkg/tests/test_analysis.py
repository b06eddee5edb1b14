"""Tests for analysis.py - energy errors, rate fits and the quasi-optimality constant
"""

import logging
import math

import numpy as np
import pytest

from hp_nitsche_coupling.analysis import (
    DiscreteJump,
    algebraic_fit,
    audit_monotonicity,
    energy_error,
    exponential_fit,
    fe_energy_error,
    fit_algebraic_rate,
    fit_exponential_rate,
    jump_norm,
    optimal_quasi_optimality_constant,
    pointwise,
    quasi_optimality_constant,
    running_rate,
)
from hp_nitsche_coupling.hp_spaces import interpolate
from hp_nitsche_coupling.models import ParameterError, StudyMode
from hp_nitsche_coupling.problems.square_smooth import EXACT
from hp_nitsche_coupling.system_solver import Solution, solve


class TestEnergyError:
    """Tests for the error components"""

    def test_fe_error_of_zero_against_constant_gradient(self, coarse_p2):
        """The FE part of the square has area 3"""
        space = coarse_p2.fe_space
        error = fe_energy_error(space, np.zeros(space.n_dofs), lambda p: np.tile([1.0, 0.0], (len(p), 1)))
        assert error == pytest.approx(math.sqrt(3.0), rel=1e-12)

    def test_graded_rule_at_singular_vertex(self, coarse_p2):
        space = coarse_p2.fe_space
        error = fe_energy_error(
            space,
            np.zeros(space.n_dofs),
            lambda p: np.tile([0.0, 2.0], (len(p), 1)),
            singular_points=[(0.0, 0.5)],
        )
        assert error == pytest.approx(2.0 * math.sqrt(3.0), rel=1e-10)

    def test_fe_error_vanishes_for_reproduced_function(self, coarse_p2):
        space = coarse_p2.fe_space
        coeffs = interpolate(space, lambda p: p[:, 0] + 1.0)
        error = fe_energy_error(space, coeffs, lambda p: np.tile([1.0, 0.0], (len(p), 1)))
        assert error == pytest.approx(0.0, abs=1e-10)

    def test_jump_norm_of_unit_function(self, coarse_p2):
        """Interface length 2 with eta = 36 and length 1 with eta = 72"""
        value = jump_norm(coarse_p2.overlay, pointwise(lambda p: np.ones(len(p))))
        assert value == pytest.approx(12.0, rel=1e-12)

    def test_discrete_jump_of_continuous_pair(self, coarse_p2):
        fe = interpolate(coarse_p2.fe_space, lambda p: p[:, 0] + 1.0)
        be = interpolate(coarse_p2.be_space, lambda p: p[:, 0] + 1.0)
        jump = DiscreteJump(coarse_p2.fe_space, coarse_p2.be_space, fe, be)
        assert jump_norm(coarse_p2.overlay, jump) == pytest.approx(0.0, abs=1e-10)

    def test_breakdown_of_discrete_solution(self, coarse_p2):
        problem = coarse_p2
        solution = solve(problem.system)
        errors = energy_error(
            solution,
            EXACT.value,
            EXACT.gradient,
            problem.fe_space,
            problem.be_space,
            problem.overlay,
            problem.steklov,
        )
        assert 0.0 < errors.total < 0.05
        assert errors.total == pytest.approx(
            math.sqrt(errors.fe_energy**2 + errors.be_energy**2 + errors.jump**2)
        )

    def test_zero_solution_error_is_norm_of_exact(self, coarse_p2):
        problem = coarse_p2
        zero = Solution(np.zeros(problem.fe_space.n_dofs), np.zeros(problem.be_space.n_dofs))
        errors = energy_error(
            zero,
            EXACT.value,
            EXACT.gradient,
            problem.fe_space,
            problem.be_space,
            problem.overlay,
            problem.steklov,
        )
        assert errors.jump == 0.0
        assert errors.fe_energy > 0.1


class TestRateFits:
    """Tests for algebraic and exponential fits"""

    def test_algebraic_h_rate(self, h_study_records):
        fit = fit_algebraic_rate(h_study_records, StudyMode.H)
        assert fit.rate == pytest.approx(2.0 / 3.0, rel=1e-10)
        assert fit.correlation == pytest.approx(1.0)
        assert fit.variable == "h"
        assert fit.n_records == 5

    def test_algebraic_p_rate(self):
        p = np.array([1.0, 2.0, 3.0, 4.0])
        fit = algebraic_fit(p, p**-1.5, 10 * p**2, StudyMode.P)
        assert fit.rate == pytest.approx(1.5, rel=1e-10)
        assert fit.dof_rate == pytest.approx(0.75, rel=1e-10)
        assert fit.variable == "p"

    def test_algebraic_needs_three_records(self, h_study_records):
        with pytest.raises(ParameterError, match="at least 3"):
            fit_algebraic_rate(h_study_records[:2], StudyMode.H)

    def test_nonpositive_errors(self):
        with pytest.raises(ParameterError, match="positive and finite"):
            algebraic_fit([0.5, 0.25, 0.125], [1.0, 0.0, 0.1], [1, 2, 3])

    def test_exponential_fit(self):
        n = np.array([16.0, 36.0, 64.0, 100.0, 144.0])
        errors = 3.0 * np.exp(-0.8 * np.sqrt(n))
        fit = exponential_fit(n, errors, 0.5)
        assert fit.rate == pytest.approx(0.8, rel=1e-10)
        assert fit.correlation == pytest.approx(1.0)
        assert fit.variable == "N^0.5"

    def test_exponential_cube_root(self):
        n = np.array([8.0, 27.0, 64.0, 125.0])
        fit = exponential_fit(n, np.exp(-2.0 * np.cbrt(n)), 1.0 / 3.0)
        assert fit.rate == pytest.approx(2.0, rel=1e-8)

    def test_exponential_needs_four_records(self, h_study_records):
        with pytest.raises(ParameterError, match="at least 4"):
            fit_exponential_rate(h_study_records[:3], 0.5)

    @pytest.mark.parametrize("root", [0.0, 1.5])
    def test_exponential_invalid_root(self, root):
        with pytest.raises(ParameterError, match="dof_root"):
            exponential_fit([1, 2, 3, 4], [1.0, 0.5, 0.25, 0.125], root)

    def test_constant_errors(self):
        fit = exponential_fit([1, 2, 3, 4], [0.1] * 4, 0.5)
        assert fit.rate == 0.0
        assert fit.correlation == 0.0


class TestRunningRate:
    """Tests for the rate between consecutive steps"""

    def test_h_mode(self):
        assert running_rate((1.0, 0.5, 10), (0.5, 0.25, 40), StudyMode.H) == pytest.approx(1.0)

    def test_p_mode(self):
        assert running_rate((1.0, 1, 10), (0.25, 2, 20), StudyMode.P) == pytest.approx(2.0)

    def test_hp_mode_uses_dofs(self):
        assert running_rate((1.0, 1, 10), (0.1, 2, 100), StudyMode.HP) == pytest.approx(1.0)

    def test_undefined(self):
        assert running_rate((0.0, 0.5, 10), (0.5, 0.25, 40), StudyMode.H) is None
        assert running_rate((1.0, 2, 10), (0.5, 2, 40), StudyMode.P) is None


class TestMonotonicity:
    """Tests for the error increase audit"""

    def test_reports_increase(self, make_record, caplog):
        records = [make_record(0, 1.0), make_record(1, 0.5), make_record(2, 0.6), make_record(3, 0.1)]
        with caplog.at_level(logging.WARNING, logger="hp_nitsche_coupling.analysis"):
            assert audit_monotonicity(records) == [2]
        assert "increased at step 2" in caplog.text

    def test_decreasing(self, h_study_records):
        assert audit_monotonicity(list(reversed(h_study_records)))
        assert audit_monotonicity(h_study_records) == []


class TestQuasiOptimality:
    """Tests for the quasi-optimality constant"""

    def test_value(self):
        assert quasi_optimality_constant(2.0, 3.0) == pytest.approx(8.0)

    @pytest.mark.parametrize("delta,eta0", [(1.0, 3.0), (2.0, 2.0), (3.0, 2.0)])
    def test_inadmissible(self, delta, eta0):
        with pytest.raises(ParameterError, match="1 < delta < eta0"):
            quasi_optimality_constant(delta, eta0)

    def test_minimum(self):
        delta, eta0, value = optimal_quasi_optimality_constant()
        assert value == pytest.approx(2.0 * (2.0 + math.sqrt(3.0)), abs=1e-6)
        assert delta == pytest.approx(1.0 + math.sqrt(3.0), abs=1e-4)
        assert eta0 == pytest.approx(2.0 + math.sqrt(3.0), abs=1e-4)
