"""Tests for fem_assembly.py - stiffness matrix, load vector and coefficients
"""

import numpy as np
import pytest

from hp_nitsche_coupling.fem_assembly import (
    Coefficient,
    assemble_load,
    assemble_stiffness,
    pairing_order,
)
from hp_nitsche_coupling.geometry_mesh import Element, Mesh2D, Point2, TaggedArc
from hp_nitsche_coupling.hp_spaces import DegreeVector, enumerate_fe_dofs, interpolate
from hp_nitsche_coupling.models import (
    BoundaryTag,
    ConsistencyError,
    ElementKind,
    ParameterError,
)


class TestCoefficient:
    """Tests for the piecewise constant diffusion coefficient"""

    def test_from_mesh(self, square_meshes):
        mesh, _ = square_meshes
        kappa = Coefficient.from_mesh(mesh)
        assert kappa.kappa_min == kappa.kappa_max == 1.0
        assert len(kappa.values) == mesh.n_elements

    @pytest.mark.parametrize("values", [[1.0, -2.0], [1.0, 0.0], [np.inf]])
    def test_rejects_invalid_values(self, values):
        with pytest.raises(ParameterError, match="positive and finite"):
            Coefficient(np.array(values))

    def test_rejects_empty(self):
        with pytest.raises(ParameterError, match="one value per element"):
            Coefficient(np.array([]))

    def test_values_are_read_only(self):
        kappa = Coefficient.constant(3, 2.0)
        with pytest.raises(ValueError):
            kappa.values[0] = 5.0

    def test_size_mismatch(self, square_meshes):
        mesh, _ = square_meshes
        space = enumerate_fe_dofs(mesh, DegreeVector.uniform(mesh.n_elements, 1))
        with pytest.raises(ConsistencyError, match="number of elements"):
            assemble_stiffness(space, Coefficient.constant(2))


class TestStiffness:
    """Tests for the stiffness matrix"""

    def test_unit_square_bilinear(self, single_square_mesh):
        """Classical Q1 element matrix of the Laplacian"""
        space = enumerate_fe_dofs(single_square_mesh, DegreeVector((1,)))
        K = assemble_stiffness(space).toarray()
        expected = np.array(
            [
                [4.0, -1.0, -2.0, -1.0],
                [-1.0, 4.0, -1.0, -2.0],
                [-2.0, -1.0, 4.0, -1.0],
                [-1.0, -2.0, -1.0, 4.0],
            ]
        ) / 6.0
        np.testing.assert_allclose(K, expected, atol=1e-14)

    def test_unit_triangle_linear(self, unit_triangle):
        mesh = Mesh2D(unit_triangle.vertices, (unit_triangle,), ())
        space = enumerate_fe_dofs(mesh, DegreeVector((1,)))
        K = assemble_stiffness(space).toarray()
        expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        np.testing.assert_allclose(K, expected, atol=1e-14)

    def test_coefficient_scales_matrix(self, single_square_mesh):
        space = enumerate_fe_dofs(single_square_mesh, DegreeVector((3,)))
        K1 = assemble_stiffness(space).toarray()
        K3 = assemble_stiffness(space, Coefficient.constant(1, 3.0)).toarray()
        np.testing.assert_allclose(K3, 3.0 * K1, atol=1e-13)

    def test_symmetric_with_constant_kernel(self, lshape_split_meshes):
        mesh, _ = lshape_split_meshes
        space = enumerate_fe_dofs(mesh, DegreeVector.uniform(mesh.n_elements, 3), False)
        K = assemble_stiffness(space).toarray()
        np.testing.assert_allclose(K, K.T, atol=1e-13)
        ones = interpolate(space, lambda p: np.ones(len(p)))
        np.testing.assert_allclose(K @ ones, 0.0, atol=1e-12)

    def test_energy_of_interpolant(self, lshape_split_meshes):
        """u^T K u equals int |grad u|^2 for a reproduced quadratic"""
        mesh, _ = lshape_split_meshes
        space = enumerate_fe_dofs(mesh, DegreeVector.uniform(mesh.n_elements, 2), False)
        coeffs = interpolate(space, lambda p: p[:, 0] ** 2 + p[:, 1])
        energy = coeffs @ assemble_stiffness(space) @ coeffs
        # int over triangle (x in [-1,0], y in [-1,x]) and square [0,1]x[-1,0] of 4x^2 + 1
        expected = 5.0 / 6.0 + 7.0 / 3.0
        assert energy == pytest.approx(expected, rel=1e-12)

    def test_positive_definite_after_dirichlet_elimination(self, square_meshes):
        mesh, _ = square_meshes
        space = enumerate_fe_dofs(mesh, DegreeVector.uniform(mesh.n_elements, 2))
        K = assemble_stiffness(space).toarray()
        assert np.linalg.eigvalsh(K).min() > 0.0

    def test_pairing_order(self):
        assert pairing_order(2, 3) == 7


class TestLoad:
    """Tests for volume and Neumann loads"""

    def test_volume_load_integrates_source(self, single_square_mesh):
        space = enumerate_fe_dofs(single_square_mesh, DegreeVector((2,)))
        load = assemble_load(space, f=lambda p: np.ones(len(p)))
        coeffs = interpolate(space, lambda p: p[:, 0] ** 2 + p[:, 1])
        assert load @ coeffs == pytest.approx(1.0 / 3.0 + 0.5, rel=1e-13)

    def test_zero_data_gives_zero_load(self, square_meshes):
        mesh, _ = square_meshes
        space = enumerate_fe_dofs(mesh, DegreeVector.uniform(mesh.n_elements, 1))
        assert not np.any(assemble_load(space))

    def test_neumann_flux_of_normal_component(self, square_meshes):
        """Only the right side x = 1 has n_x != 0 among the Neumann edges"""
        mesh, _ = square_meshes
        space = enumerate_fe_dofs(mesh, DegreeVector.uniform(mesh.n_elements, 1))
        load = assemble_load(space, g=lambda pts, normals: normals[:, 0])
        assert load.sum() == pytest.approx(2.0, rel=1e-13)

    def test_neumann_load_on_parallelogram(self):
        """Outward normals of a slanted element are used on its Neumann edge"""
        verts = np.array([(0.0, 0.0), (1.0, 0.0), (1.5, 1.0), (0.5, 1.0)])
        el = Element(ElementKind.PARALLELOGRAM, (0, 1, 2, 3), verts)
        arcs = [
            TaggedArc(Point2(*verts[i]), Point2(*verts[(i + 1) % 4]), BoundaryTag.NEUMANN)
            for i in range(4)
        ]
        mesh = Mesh2D(verts, (el,), arcs)
        space = enumerate_fe_dofs(mesh, DegreeVector((1,)))
        load = assemble_load(space, g=lambda pts, normals: normals[:, 0])
        # closed boundary: int n_x ds = 0
        assert load.sum() == pytest.approx(0.0, abs=1e-14)
        load_x = assemble_load(space, g=lambda pts, normals: pts[:, 0] * normals[:, 0])
        # divergence theorem: int x n_x ds = area
        assert load_x.sum() == pytest.approx(el.area, rel=1e-13)
