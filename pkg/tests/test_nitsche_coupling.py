"""Tests for nitsche_coupling.py - trace constants, stabilization, coupling blocks and liftings
"""

import logging
import math

import numpy as np
import pytest

from hp_nitsche_coupling.geometry_mesh import Element, InterfaceOverlay
from hp_nitsche_coupling.hp_spaces import interpolate
from hp_nitsche_coupling.models import ConsistencyError, ElementKind, ParameterError
from hp_nitsche_coupling.nitsche_coupling import (
    RECOMMENDED_ETA0,
    assemble_flux_coupling,
    assemble_penalty,
    compute_stabilization,
    formulation_gap,
    interface_edges_by_element,
    lifting_apply,
    sharp_trace_ratio,
    split_vector,
    trace_constant,
)


def linear_state(problem):
    """FE and BE interpolants of x + 1, which vanishes on the Dirichlet side x = -1"""
    fe = interpolate(problem.fe_space, lambda p: p[:, 0] + 1.0)
    be = interpolate(problem.be_space, lambda p: p[:, 0] + 1.0)
    return np.concatenate((fe, be))


class TestTraceConstant:
    """Tests for the polynomial trace inequality constant"""

    def test_unit_triangle(self, unit_triangle):
        assert trace_constant(unit_triangle, [0], 1) == pytest.approx(6.0)
        assert trace_constant(unit_triangle, [1], 1) == pytest.approx(6.0 * math.sqrt(2.0))

    def test_two_edges_add_lengths(self, unit_triangle):
        assert trace_constant(unit_triangle, [0, 2], 1) == pytest.approx(12.0)

    def test_repeated_edge_counted_once(self, unit_triangle):
        assert trace_constant(unit_triangle, [0, 0], 2) == trace_constant(unit_triangle, [0], 2)

    def test_unit_square(self, unit_square):
        assert trace_constant(unit_square, [0], 1) == pytest.approx(4.0)

    def test_small_square(self):
        el = Element(
            ElementKind.PARALLELOGRAM,
            (0, 1, 2, 3),
            np.array([(0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)]),
        )
        assert trace_constant(el, [3], 2) == pytest.approx(18.0)

    @pytest.mark.parametrize("edges", [[], [3], [-1]])
    def test_invalid_edges(self, unit_triangle, edges):
        with pytest.raises(ParameterError, match="are not edges"):
            trace_constant(unit_triangle, edges, 1)

    def test_invalid_degree(self, unit_triangle):
        with pytest.raises(ParameterError, match="Degree"):
            trace_constant(unit_triangle, [0], 0)

    @pytest.mark.parametrize("degree", [1, 2, 4])
    @pytest.mark.parametrize("edge", [0, 1, 2])
    def test_sharp_on_triangles(self, unit_triangle, degree, edge):
        g = trace_constant(unit_triangle, [edge], degree)
        assert sharp_trace_ratio(unit_triangle, edge, degree) == pytest.approx(g, rel=1e-9)

    @pytest.mark.parametrize("degree", [1, 3])
    def test_sharp_on_parallelograms(self, degree):
        el = Element(
            ElementKind.PARALLELOGRAM,
            (0, 1, 2, 3),
            np.array([(0.0, 0.0), (2.0, 0.0), (2.5, 1.0), (0.5, 1.0)]),
        )
        for edge in range(4):
            g = trace_constant(el, [edge], degree)
            assert sharp_trace_ratio(el, edge, degree) == pytest.approx(g, rel=1e-9)


class TestStabilization:
    """Tests for the elementwise stabilization parameter"""

    def test_values_on_coarse_problem(self, coarse_p2):
        """Strip elements (0.25 x 0.5) get 36, the 0.25 x 0.25 elements right of the block get 72"""
        eta = np.asarray(coarse_p2.overlay.eta)
        assert set(np.round(eta, 10)) == {36.0, 72.0}

    def test_scales_with_eta0(self, coarse_p2, coarse_p2_eta3):
        ratio = np.asarray(coarse_p2_eta3.overlay.eta) / np.asarray(coarse_p2.overlay.eta)
        np.testing.assert_allclose(ratio, 1.5)

    def test_constant_per_element(self, coarse_p2):
        by_element = {}
        for seg in coarse_p2.overlay.segments:
            by_element.setdefault(seg.fe_element, set()).add(seg.eta)
        assert all(len(values) == 1 for values in by_element.values())

    @pytest.mark.parametrize("eta0", [0.0, -1.0])
    def test_rejects_non_positive(self, coarse_p2, eta0):
        with pytest.raises(ParameterError, match="eta0"):
            compute_stabilization(coarse_p2.overlay, coarse_p2.fe_space, eta0)

    def test_warns_below_one(self, coarse_p2, caplog):
        with caplog.at_level(logging.WARNING, logger="hp_nitsche_coupling.nitsche_coupling"):
            compute_stabilization(coarse_p2.overlay, coarse_p2.fe_space, 0.8)
        assert "does not exceed 1" in caplog.text

    def test_warns_below_recommended(self, coarse_p2, caplog):
        with caplog.at_level(logging.WARNING, logger="hp_nitsche_coupling.nitsche_coupling"):
            compute_stabilization(coarse_p2.overlay, coarse_p2.fe_space, 1.5)
        assert "below the recommended" in caplog.text

    def test_no_warning_at_recommended(self, coarse_p2, caplog):
        with caplog.at_level(logging.WARNING, logger="hp_nitsche_coupling.nitsche_coupling"):
            compute_stabilization(coarse_p2.overlay, coarse_p2.fe_space, RECOMMENDED_ETA0)
        assert caplog.text == ""

    def test_interface_edges(self, coarse_p2):
        edges = interface_edges_by_element(coarse_p2.fe_space)
        assert len(edges) == 12
        assert all(len(local) == 1 for local in edges.values())


class TestCouplingBlocks:
    """Tests for the penalty and flux coupling matrices"""

    def test_shapes_and_symmetry(self, coarse_p2):
        forms = coarse_p2.forms()
        n = forms.n_dofs
        for block in (forms.penalty, forms.flux):
            assert block.shape == (n, n)
            assert abs(block - block.T).max() < 1e-12

    def test_penalty_semidefinite(self, coarse_p2):
        penalty = coarse_p2.forms().penalty.toarray()
        assert np.linalg.eigvalsh(penalty).min() > -1e-10

    def test_continuous_state_has_no_jump(self, coarse_p2):
        forms = coarse_p2.forms()
        u = linear_state(coarse_p2)
        np.testing.assert_allclose(forms.penalty @ u, 0.0, atol=1e-11)
        assert forms.jump_norm_sq(u) == pytest.approx(0.0, abs=1e-22)

    def test_flux_of_continuous_state(self, coarse_p2):
        """With [u] = 0 only -<q(u), [v]> remains, tested by v = u"""
        forms = coarse_p2.forms()
        u = linear_state(coarse_p2)
        assert u @ (forms.flux @ u) == pytest.approx(0.0, abs=1e-11)

    def test_empty_overlay(self, coarse_p2):
        empty = InterfaceOverlay(arcs=coarse_p2.overlay.arcs, segments=())
        for assemble in (assemble_penalty, assemble_flux_coupling):
            with pytest.raises(ConsistencyError, match="no segments"):
                assemble(empty, coarse_p2.fe_space, coarse_p2.be_space)

    def test_split_vector(self, coarse_p2):
        n_fe = coarse_p2.fe_space.n_dofs
        v = np.arange(n_fe + coarse_p2.be_space.n_dofs, dtype=float)
        fe, be = split_vector(v, coarse_p2.fe_space, coarse_p2.be_space)
        assert len(fe) == n_fe
        assert be[0] == n_fe

    def test_split_vector_length(self, coarse_p2):
        with pytest.raises(ConsistencyError, match="does not match"):
            split_vector(np.zeros(3), coarse_p2.fe_space, coarse_p2.be_space)


class TestLiftingForms:
    """Tests for the lifting operator and the two versions of the bilinear form"""

    def test_zero_jump_gives_zero_lifting(self, coarse_p2):
        u = linear_state(coarse_p2)
        lifting = lifting_apply(u, coarse_p2.overlay, coarse_p2.fe_space, coarse_p2.be_space)
        assert coarse_p2.forms().lifting_norm(lifting) == pytest.approx(0.0, abs=1e-10)

    def test_lifting_vanishes_away_from_interface(self, coarse_p2, rng):
        v = rng.standard_normal(coarse_p2.forms().n_dofs)
        lifting = lifting_apply(v, coarse_p2.overlay, coarse_p2.fe_space, coarse_p2.be_space)
        assert len(lifting.coefficients) == 12
        away = next(
            eid for eid in range(coarse_p2.fe_space.mesh.n_elements) if eid not in lifting.coefficients
        )
        assert not np.any(lifting.evaluate(away, np.array([[0.2, 0.3]])))

    def test_formulation_gap(self, coarse_p2, rng):
        forms = coarse_p2.forms()
        for _ in range(3):
            u, w = rng.standard_normal((2, forms.n_dofs))
            scale = abs(forms.diagonal_part(u, u)) + abs(forms.diagonal_part(w, w))
            assert formulation_gap(forms, u, w) < 1e-10 * scale

    def test_reduced_lifting_space_changes_form(self, coarse_p2, rng):
        forms = coarse_p2.forms()
        u, w = rng.standard_normal((2, forms.n_dofs))
        scale = abs(forms.diagonal_part(u, u)) + abs(forms.diagonal_part(w, w))
        assert formulation_gap(forms, u, w, degree_drop=1) > 1e-8 * scale

    def test_lifting_stability(self, coarse_p2, rng):
        forms = coarse_p2.forms()
        for _ in range(3):
            v = rng.standard_normal(forms.n_dofs)
            lifting = lifting_apply(v, coarse_p2.overlay, coarse_p2.fe_space, coarse_p2.be_space)
            bound = math.sqrt(forms.jump_norm_sq(v, weight_scale=1.0 / 2.0))
            assert forms.lifting_norm(lifting) <= bound * (1.0 + 1e-10)

    def test_coercivity_margin(self, coarse_p2_eta3, rng):
        forms = coarse_p2_eta3.forms()
        for _ in range(3):
            u = rng.standard_normal(forms.n_dofs)
            assert forms.coercivity_margin(u, delta=2.0) >= -1e-10 * forms.diagonal_part(u, u)

    @pytest.mark.parametrize("delta", [1.0, 0.5])
    def test_coercivity_needs_delta_above_one(self, coarse_p2, delta):
        forms = coarse_p2.forms()
        with pytest.raises(ParameterError, match="delta must exceed 1"):
            forms.coercivity_margin(np.zeros(forms.n_dofs), delta)

    def test_a_hp_is_symmetric(self, coarse_p2, rng):
        forms = coarse_p2.forms()
        u, w = rng.standard_normal((2, forms.n_dofs))
        assert forms.a_hp(u, w) == pytest.approx(forms.a_hp(w, u), rel=1e-12)
