#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Script for testing P1 assembly, mean-zero solves and norms
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import logging
import unittest

import numpy as np

from ddhom.coefficient import CoefficientSpec, constant_field, generate_coefficient
from ddhom.errors import AdmissibilityError, SolverError
from ddhom.fem import (FEFunction, LinearForm, assemble_stiffness, assemble_load, assemble_flux_load,
                       assemble_flux_loads, energy_error, gradients, l2_error, l2_norm, mass_matrix,
                       prolongate, prolongation_matrix, solve_mean_zero, solve_model_problem, solve_homogenized)
from ddhom.mesh import build_mesh_hierarchy


# ------------------------------------------------------------------------------
# Configuration
# ------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


def sine(x1, x2):
    return np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)


def sine_load(x1, x2):
    return 8 * np.pi ** 2 * sine(x1, x2)


def bump(x1, x2):
    return np.exp(-((x1 - 0.3) ** 2 + (x2 - 0.6) ** 2) / 0.02)


# ------------------------------------------------------------------------------
# Tests
# ------------------------------------------------------------------------------

class TestAssembly(unittest.TestCase):

    def test_stiffness(self):
        mesh = build_mesh_hierarchy(2, 4, 16)
        A = generate_coefficient(CoefficientSpec('checkerboard'), mesh)
        K = assemble_stiffness(mesh, A)
        self.assertEqual(K.shape, (256, 256))
        self.assertTrue(np.allclose(K.row_sums(), 0, atol=1e-12))
        self.assertEqual(abs(K.matrix - K.matrix.T).max(), 0)
        self.assertTrue(np.all(K.diagonal() > 0))

    def test_five_point_stencil(self):
        mesh = build_mesh_hierarchy(2, 4, 8)
        K = assemble_stiffness(mesh, constant_field(mesh, 1.0)).matrix
        self.assertTrue(np.allclose(K.diagonal(), 4.0))
        self.assertAlmostEqual(K[0, 1], -1.0)
        self.assertAlmostEqual(K[0, 8], -1.0)
        self.assertAlmostEqual(K[0, 7], -1.0)  # periodic neighbour
        self.assertAlmostEqual(K[0, 9], 0.0)

    def test_energy(self):
        mesh = build_mesh_hierarchy(2, 4, 32)
        K = assemble_stiffness(mesh, constant_field(mesh, 1.0))
        u = FEFunction.interpolate(mesh, lambda x1, x2: np.sin(2 * np.pi * x1))
        self.assertAlmostEqual(K.energy(u) / (2 * np.pi ** 2), 1.0, delta=0.02)
        self.assertAlmostEqual(energy_error(u, FEFunction.zeros(mesh), K), np.sqrt(K.energy(u)))

    def test_mass(self):
        mesh = build_mesh_hierarchy(2, 4, 8)
        M = mass_matrix(mesh)
        ones = np.ones(mesh.fine_node_count)
        self.assertAlmostEqual(ones @ (M @ ones), 1.0)
        u = FEFunction.interpolate(mesh, lambda x1, x2: 2.0 + 0 * x1)
        self.assertAlmostEqual(l2_norm(u), 0.0)

    def test_flux_loads(self):
        mesh = build_mesh_hierarchy(2, 4, 8)
        A = generate_coefficient(CoefficientSpec('laminate'), mesh)
        loads = assemble_flux_loads(mesh, A)
        self.assertEqual(loads.shape, (64, 8))
        self.assertTrue(np.allclose(np.asarray(loads.sum(axis=0)).ravel(), 0, atol=1e-14))
        for j in (1, 2):
            total = assemble_flux_load(mesh, A, None, j)
            summed = sum(assemble_flux_load(mesh, A, Q, j).values for Q in range(mesh.square_count))
            self.assertTrue(np.allclose(summed, total.values))
            column = loads[:, 2 * 3 + (j - 1)].toarray().ravel()
            self.assertTrue(np.allclose(column, assemble_flux_load(mesh, A, 3, j).values))
        self.assertRaises(AdmissibilityError, lambda: assemble_flux_load(mesh, A, 0, 3))
        self.assertRaises(IndexError, lambda: assemble_flux_load(mesh, A, 4, 1))

    def test_load(self):
        mesh = build_mesh_hierarchy(2, 4, 8)
        b = assemble_load(mesh, lambda x1, x2: 1.0 + x1)
        self.assertTrue(b.is_compatible())
        raw = assemble_load(mesh, lambda x1, x2: 1.0 + 0 * x1, compatible=False)
        self.assertAlmostEqual(raw.total(), 1.0)
        nodal = assemble_load(mesh, np.ones(mesh.fine_node_count), compatible=False)
        self.assertTrue(np.allclose(nodal.values, raw.values))
        self.assertRaises(AdmissibilityError, lambda: assemble_load(mesh, np.ones(3)))

    def test_gradients(self):
        mesh = build_mesh_hierarchy(2, 4, 8)
        u = FEFunction.interpolate(mesh, lambda x1, x2: x1)
        grad = u.gradient()
        ix = (np.arange(len(mesh.fine_triangles)) // 2) % mesh.n_fine
        inside = ix < mesh.n_fine - 1
        self.assertTrue(np.allclose(grad[inside, 0], 1.0))
        self.assertTrue(np.allclose(grad[inside, 1], 0.0))
        block = np.column_stack((u.values, 2 * u.values))
        self.assertEqual(gradients(mesh, block).shape, (len(mesh.fine_triangles), 2, 2))


class TestSolvers(unittest.TestCase):

    def test_poisson(self):
        mesh = build_mesh_hierarchy(2, 4, 32)
        u = solve_model_problem(mesh, constant_field(mesh, 1.0), sine_load, tol=1e-10)
        exact = FEFunction.interpolate(mesh, sine)
        self.assertAlmostEqual(u.mean(), 0.0)
        self.assertLess(l2_error(u, exact), 0.01)

    def test_incompatible(self):
        mesh = build_mesh_hierarchy(2, 4, 8)
        K = assemble_stiffness(mesh, constant_field(mesh, 1.0))
        self.assertRaises(AdmissibilityError, lambda: solve_mean_zero(K, LinearForm(np.ones(64), mesh)))
        zero = solve_mean_zero(K, np.zeros(64))
        self.assertTrue(np.array_equal(zero.values, np.zeros(64)))

    def test_max_iters(self):
        mesh = build_mesh_hierarchy(2, 4, 16)
        # not a Fourier mode of the stencil, so one CG step cannot converge
        K = assemble_stiffness(mesh, generate_coefficient(CoefficientSpec('checkerboard'), mesh))
        b = assemble_load(mesh, bump)
        with self.assertRaises(SolverError) as cm:
            solve_mean_zero(K, b, tol=1e-12, max_iters=1)
        self.assertGreater(cm.exception.residual, 1e-12)
        self.assertEqual(cm.exception.exit_code, 3)

    def test_homogenized(self):
        mesh = build_mesh_hierarchy(2, 4, 16)
        u0 = solve_homogenized(mesh, 2 * np.eye(2), sine_load, tol=1e-10)
        u = solve_model_problem(mesh, constant_field(mesh, 2.0), sine_load, tol=1e-10)
        self.assertTrue(np.allclose(u0.values, u.values))
        u1 = solve_homogenized(mesh, np.eye(2), sine_load, tol=1e-10)
        self.assertTrue(np.allclose(2 * u0.values, u1.values, atol=1e-8))
        self.assertRaises(AdmissibilityError, lambda: solve_homogenized(mesh, np.ones((3, 3)), sine_load))


class TestFunctions(unittest.TestCase):

    def test_prolongation(self):
        ones = np.ones(64)
        self.assertTrue(np.allclose(prolongate(ones, 8, 16), 1.0))
        self.assertEqual(abs(prolongation_matrix(8, 8) - np.eye(64)).max(), 0)
        self.assertRaises(AdmissibilityError, lambda: prolongation_matrix(8, 12))

    def test_cross_mesh_error(self):
        coarse = build_mesh_hierarchy(2, 4, 8)
        fine = build_mesh_hierarchy(2, 4, 16)
        u = FEFunction.interpolate(coarse, sine)
        v = FEFunction(prolongate(u.values, 8, 16), fine)
        self.assertAlmostEqual(l2_error(u, v), 0.0)
        self.assertAlmostEqual(l2_error(v, u), 0.0)
        self.assertGreater(l2_error(FEFunction.interpolate(fine, sine), u), 0.0)

    def test_fe_function(self):
        mesh = build_mesh_hierarchy(2, 4, 8)
        u = FEFunction.interpolate(mesh, lambda x1, x2: 1.0 + x1)
        self.assertAlmostEqual(u.normalized().mean(), 0.0)
        self.assertTrue(np.allclose((2 * u - u).values, u.values))
        self.assertRaises(AdmissibilityError, lambda: FEFunction(np.zeros(3), mesh))
        other = FEFunction.zeros(build_mesh_hierarchy(2, 4, 16))
        self.assertRaises(AdmissibilityError, lambda: u + other)


# ------------------------------------------------------------------------------
# Main
# ------------------------------------------------------------------------------

if __name__ == "__main__":
    unittest.main()
