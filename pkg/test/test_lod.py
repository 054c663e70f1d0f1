#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Script for testing the localized orthogonal decomposition
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import logging
import unittest

import numpy as np

from ddhom.coefficient import CoefficientSpec, generate_coefficient
from ddhom.fem import FEFunction, assemble_load, assemble_stiffness
from ddhom.interpolation import build_interpolator
from ddhom.lod import (build_basis_correctors, build_element_correctors, build_multiscale_basis, element_forms,
                       lod_errors, lod_solve, p1_basis, reference_solution, solve_p1_coarse, sum_element_correctors)
from ddhom.mesh import build_mesh_hierarchy
from ddhom.schwarz import build_schwarz_operator, estimate_spectrum


# ------------------------------------------------------------------------------
# Configuration
# ------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


def sine_load(x1, x2):
    return 8 * np.pi ** 2 * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)


# ------------------------------------------------------------------------------
# Tests
# ------------------------------------------------------------------------------

class TestLOD(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mesh = build_mesh_hierarchy(4, 8, 16)
        cls.A = generate_coefficient(CoefficientSpec('random_field', seed=7, contrast=10), cls.mesh)
        cls.K = assemble_stiffness(cls.mesh, cls.A)
        cls.interpolator = build_interpolator(cls.mesh)
        cls.op = build_schwarz_operator(cls.mesh, cls.A, cls.interpolator, cls.K)
        estimate_spectrum(cls.op, n_iters=60)
        cls.u_ref = reference_solution(cls.mesh, cls.K, sine_load, tol=1e-10)

    def test_element_forms(self):
        mesh = self.mesh
        F = element_forms(mesh, self.A).toarray()
        self.assertEqual(F.shape, (mesh.fine_node_count, 3 * len(mesh.coarse_triangles)))
        # the three local hats sum to one on every coarse triangle
        per_triangle = F.reshape(mesh.fine_node_count, -1, 3).sum(axis=2)
        self.assertTrue(np.allclose(per_triangle, 0, atol=1e-12))
        summed = np.zeros((mesh.fine_node_count, mesh.coarse_node_count))
        for T, nodes in enumerate(mesh.coarse_triangles):
            for a, z in enumerate(nodes):
                summed[:, z] += F[:, 3 * T + a]
        expected = (self.K.matrix @ self.interpolator.coarse_embedding).toarray()
        self.assertTrue(np.allclose(summed, expected, atol=1e-12))

    def test_element_correctors(self):
        mesh = self.mesh
        elements = build_element_correctors(mesh, self.A, self.op, 2)
        basis = build_basis_correctors(mesh, self.op, 2)
        self.assertTrue(np.allclose(sum_element_correctors(mesh, elements), basis.level(2), atol=1e-10))
        self.assertEqual(len(elements.columns), 3 * len(mesh.coarse_triangles))

    def test_level_zero(self):
        basis = build_multiscale_basis(self.mesh, self.op, 0)
        E = self.interpolator.coarse_embedding.toarray()
        self.assertTrue(np.array_equal(basis.phi, E))
        p1 = p1_basis(self.mesh, self.K, self.interpolator)
        self.assertTrue(np.allclose(basis.stiffness, p1.stiffness))
        u, _ = lod_solve(basis, sine_load)
        u_p1, _ = solve_p1_coarse(self.mesh, self.K, self.interpolator, sine_load)
        self.assertTrue(np.allclose(u.values, u_p1.values))

    def test_basis(self):
        basis = build_multiscale_basis(self.mesh, self.op, 2)
        self.assertEqual(len(basis), self.mesh.coarse_node_count)
        self.assertEqual(basis.ell, 2)
        # the corrections of a partition of unity cancel
        self.assertTrue(np.allclose(basis.phi.sum(axis=1), 1.0, atol=1e-10))
        self.assertGreater(basis.smallest_eigenvalue(), 0)
        self.assertTrue(np.allclose(basis.stiffness, basis.stiffness.T))
        self.assertIsInstance(basis.function(3), FEFunction)

    def test_basis_interpolation(self):
        basis = build_multiscale_basis(self.mesh, self.op, 2)
        C = self.interpolator.matrix_IH
        # I_H phi_z = lambda_z because every correction lies in W
        self.assertTrue(np.allclose(C @ basis.phi, np.eye(len(basis)), rtol=0, atol=1e-11))
        self.assertTrue(np.allclose(C @ basis.corrections, 0, rtol=0, atol=1e-11))

    def test_error_decreases_in_ell(self):
        correctors = build_basis_correctors(self.mesh, self.op, 3, keep_history=True)
        errors = [lod_errors(build_multiscale_basis(self.mesh, self.op, ell, correctors), sine_load, self.u_ref, self.K)[0]
                  for ell in range(4)]
        for coarse, fine in zip(errors, errors[1:]):
            self.assertLess(fine, coarse)

    def test_galerkin_orthogonality(self):
        basis = build_multiscale_basis(self.mesh, self.op, 2)
        u, coeffs = lod_solve(basis, sine_load)
        self.assertEqual(coeffs[-1], 0.0)
        self.assertAlmostEqual(u.mean(), 0.0)
        defect = basis.phi.T @ (self.K.matrix @ (self.u_ref.values - u.values))
        scale = np.abs(basis.phi.T @ assemble_load(self.mesh, sine_load).values).max()
        self.assertLessEqual(np.abs(defect).max(), 1e-6 * scale)

    def test_errors(self):
        basis = build_multiscale_basis(self.mesh, self.op, 2)
        energy, l2 = lod_errors(basis, sine_load, self.u_ref, self.K)
        self.assertGreaterEqual(energy, 0)
        self.assertGreaterEqual(l2, 0)
        # the Galerkin solution is the energy-best approximation in its space
        u, _ = lod_solve(basis, sine_load)
        other = FEFunction(basis.phi @ np.linspace(0, 1, len(basis)), self.mesh).normalized()
        self.assertLessEqual(energy, np.sqrt(self.K.energy(self.u_ref - other)) + 1e-12)
        self.assertAlmostEqual(energy, np.sqrt(self.K.energy(self.u_ref - u)))


class TestLaminate(unittest.TestCase):

    def test_lod_beats_p1(self):
        mesh = build_mesh_hierarchy(4, 16, 64)
        A = generate_coefficient(CoefficientSpec('laminate', a_minus=1, a_plus=4, axis=1), mesh)
        K = assemble_stiffness(mesh, A)
        interpolator = build_interpolator(mesh)
        op = build_schwarz_operator(mesh, A, interpolator, K)
        estimate_spectrum(op, n_iters=40)
        u_ref = reference_solution(mesh, K, sine_load, tol=1e-10)
        energy, _ = lod_errors(build_multiscale_basis(mesh, op, 2), sine_load, u_ref, K)
        u_p1, _ = solve_p1_coarse(mesh, K, interpolator, sine_load)
        p1_energy = np.sqrt(K.energy(u_ref - u_p1))
        self.assertLess(energy, p1_energy)


# ------------------------------------------------------------------------------
# Main
# ------------------------------------------------------------------------------

if __name__ == "__main__":
    unittest.main()
