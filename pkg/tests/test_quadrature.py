"""Tests for quadrature.py - reference, graded and singular panel-pair rules
"""

import math

import numpy as np
import pytest
from scipy import integrate

from hp_nitsche_coupling.models import ElementKind, PanelRelation, ParameterError
from hp_nitsche_coupling.quadrature import (
    element_rule,
    gauss_legendre,
    gauss_log_weights,
    graded_element_rule,
    graded_rule,
    graded_square_rule,
    graded_triangle_rule,
    panel_pair_rule,
    square_rule,
    triangle_rule,
)


class TestIntervalRules:
    """Tests for Gauss and Gauss-log rules on [0, 1]"""

    @pytest.mark.parametrize("n", [1, 3, 7])
    def test_gauss_exact_degree(self, n):
        rule = gauss_legendre(n)
        for k in range(2 * n):
            assert rule.integrate(lambda x: x**k) == pytest.approx(1.0 / (k + 1), rel=1e-13)

    @pytest.mark.parametrize("n", [0, -2, 1.5])
    def test_invalid_order(self, n):
        with pytest.raises(ParameterError, match="positive integer"):
            gauss_legendre(n)

    def test_rule_arrays_are_read_only(self):
        rule = gauss_legendre(4)
        with pytest.raises(ValueError):
            rule.weights[0] = 1.0

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_log_weights_moments(self, n):
        """sum l_i x_i^k equals int x^k ln x = -1/(k+1)^2"""
        nodes = gauss_legendre(n).nodes
        weights = gauss_log_weights(n)
        for k in range(n):
            assert np.dot(weights, nodes**k) == pytest.approx(-1.0 / (k + 1) ** 2, rel=1e-11)

    def test_graded_rule_polynomials(self):
        rule = graded_rule(0.5, 3, 4)
        assert rule.size == 4 * 4
        assert np.sum(rule.weights) == pytest.approx(1.0)
        assert rule.integrate(lambda x: x**7) == pytest.approx(0.125, rel=1e-13)

    def test_graded_rule_resolves_endpoint_singularity(self):
        rule = graded_rule(0.15, 12, 8)
        assert rule.integrate(lambda x: x**-0.5) == pytest.approx(2.0, rel=1e-6)

    def test_graded_rule_invalid_sigma(self):
        with pytest.raises(ParameterError, match="sigma"):
            graded_rule(1.2, 3, 4)


class TestElementRules:
    """Tests for rules on the reference triangle and square"""

    def test_triangle_monomial(self):
        """int x^2 y^3 over the unit triangle is 2! 3! / 7!"""
        rule = triangle_rule(4)
        value = rule.integrate(lambda p: p[:, 0] ** 2 * p[:, 1] ** 3)
        assert value == pytest.approx(1.0 / 420.0, rel=1e-13)

    def test_triangle_exponential(self):
        """int exp(x + 2y) over the unit triangle is (e - 1)^2 / 2"""
        value = triangle_rule(8).integrate(lambda p: np.exp(p[:, 0] + 2.0 * p[:, 1]))
        assert value == pytest.approx(0.5 * (math.e - 1.0) ** 2, rel=1e-12)

    def test_square_monomial(self):
        value = square_rule(4).integrate(lambda p: p[:, 0] ** 3 * p[:, 1] ** 5)
        assert value == pytest.approx(1.0 / 24.0, rel=1e-13)

    @pytest.mark.parametrize(
        "kind,area",
        [(ElementKind.TRIANGLE, 0.5), (ElementKind.PARALLELOGRAM, 1.0), (ElementKind.INTERVAL, 1.0)],
    )
    def test_element_rule_measures(self, kind, area):
        assert np.sum(element_rule(kind, 3).weights) == pytest.approx(area)

    def test_nodes_inside_triangle(self):
        nodes = triangle_rule(6).nodes
        assert np.all(nodes >= 0.0)
        assert np.all(nodes.sum(axis=1) <= 1.0)


class TestGradedElementRules:
    """Tests for rules graded toward the reference origin"""

    def test_graded_triangle_polynomial(self):
        rule = graded_triangle_rule(0.5, 3, 4)
        value = rule.integrate(lambda p: p[:, 0] * p[:, 1])
        assert value == pytest.approx(1.0 / 24.0, rel=1e-13)

    def test_graded_triangle_corner_singularity(self):
        """int 1/|x| over the unit triangle is sqrt(2) asinh(1)"""
        rule = graded_triangle_rule(0.5, 4, 12)
        value = rule.integrate(lambda p: 1.0 / np.hypot(p[:, 0], p[:, 1]))
        assert value == pytest.approx(math.sqrt(2.0) * math.asinh(1.0), rel=1e-7)

    def test_graded_square_polynomial(self):
        rule = graded_square_rule(0.5, 2, 4)
        assert np.sum(rule.weights) == pytest.approx(1.0)
        assert rule.integrate(lambda p: p[:, 0] * p[:, 1] ** 2) == pytest.approx(1.0 / 6.0)

    def test_graded_square_nodes_inside(self):
        nodes = graded_square_rule(0.5, 3, 5).nodes
        assert np.all((nodes >= 0.0) & (nodes <= 1.0))

    def test_graded_square_singular_gradient(self):
        """|grad r^(2/3)|^2 = (4/9) r^(-2/3) is integrable at the corner"""
        exact, _ = integrate.dblquad(
            lambda y, x: (4.0 / 9.0) * (x * x + y * y) ** (-1.0 / 3.0),
            0.0,
            1.0,
            0.0,
            1.0,
            epsabs=1e-11,
            epsrel=1e-10,
        )
        rule = graded_element_rule(ElementKind.PARALLELOGRAM, 0.15, 10, 10)
        value = rule.integrate(lambda p: (4.0 / 9.0) * np.hypot(p[:, 0], p[:, 1]) ** (-2.0 / 3.0))
        assert value == pytest.approx(exact, rel=1e-6)


class TestPanelPairRule:
    """Tests for product rules on panel pairs"""

    @staticmethod
    def _log_integral(rule, f, distance):
        values = f(rule.s, rule.t)
        return float(
            np.sum(rule.weights * values * np.log(distance(rule.s, rule.t) / rule.radius))
            + np.sum(rule.log_weights * values)
        )

    def test_identical_panels(self):
        """int int ln|s - t| over the unit square is -3/2"""
        rule = panel_pair_rule(PanelRelation.IDENTICAL, 4)
        value = self._log_integral(rule, lambda s, t: np.ones_like(s), lambda s, t: np.abs(s - t))
        assert value == pytest.approx(-1.5, rel=1e-12)

    def test_identical_panels_linear_weight(self):
        rule = panel_pair_rule(PanelRelation.IDENTICAL, 6)
        value = self._log_integral(rule, lambda s, t: s + t, lambda s, t: np.abs(s - t))
        assert value == pytest.approx(-1.5, rel=1e-12)

    def test_adjacent_collinear_panels(self):
        """Coordinates from the shared vertex give the distance s + t"""
        rule = panel_pair_rule(PanelRelation.ADJACENT, 6)
        value = self._log_integral(rule, lambda s, t: np.ones_like(s), lambda s, t: s + t)
        assert value == pytest.approx(2.0 * math.log(2.0) - 1.5, abs=1e-10)

    def test_adjacent_right_angle(self):
        """Panels meeting at a right angle: int int ln sqrt(s^2 + t^2) = (ln 2 - 3 + pi/2) / 2"""
        exact = 0.5 * (math.log(2.0) - 3.0 + 0.5 * math.pi)
        rule = panel_pair_rule(PanelRelation.ADJACENT, 8)
        value = self._log_integral(rule, lambda s, t: np.ones_like(s), lambda s, t: np.hypot(s, t))
        assert value == pytest.approx(exact, abs=1e-9)

    def test_disjoint_is_tensor_gauss(self):
        rule = panel_pair_rule(PanelRelation.DISJOINT, 5)
        assert rule.size == 25
        assert np.all(rule.log_weights == 0.0)
        assert np.sum(rule.weights) == pytest.approx(1.0)

    def test_relation_from_string(self):
        rule = panel_pair_rule("identical", 3)
        assert rule.relation is PanelRelation.IDENTICAL

    def test_invalid_order(self):
        with pytest.raises(ParameterError, match="order"):
            panel_pair_rule(PanelRelation.ADJACENT, 0)
