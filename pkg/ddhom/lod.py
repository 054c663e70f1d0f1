# -*- coding: utf-8 -*-

"""
Localized orthogonal decomposition with Schwarz-iterated correctors

The correction operators are built with the same Richardson iteration as the
square correctors, started from the forms a(lambda_z|_T, .). The iterate
D^ell approximates the a-orthogonal projection onto W, and the multiscale
basis is phi_z = lambda_z - D^ell lambda_z.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import logging

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import SolverError
from .fem import (FEFunction, CELL_GRADIENTS, REFERENCE_TOL, assemble_load, energy_error, element_gradients,
                  l2_error, solve_mean_zero)
from .schwarz import iterate_correctors
from .util import Timer


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


# -------------------------------------------------------------------------------
# Data structures
# -------------------------------------------------------------------------------

class MultiscaleBasis(object):
    """ Corrected basis phi_z = lambda_z - D^ell lambda_z and its Galerkin matrix

    The Galerkin matrix has the constants in its kernel (the phi_z sum to one),
    so the last coarse coefficient is fixed to zero and the remaining
    (N_H^2 - 1)-dimensional system is factorized.
    """

    def __init__(self, mesh, K, phi, ell, corrections=None):
        self.mesh = mesh
        self.K = K
        self.phi = phi
        self.ell = ell
        self.corrections = corrections
        self.stiffness = phi.T @ (K.matrix @ phi)
        self.stiffness = 0.5 * (self.stiffness + self.stiffness.T)
        try:
            self.__factor = cho_factor(self.stiffness[:-1, :-1])
        except LinAlgError as e:
            raise SolverError("Coarse LOD system is not positive definite: {}".format(e))

    def __len__(self):
        return self.phi.shape[1]

    def function(self, z):
        return FEFunction(self.phi[:, z], self.mesh)

    def smallest_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.stiffness[:-1, :-1]).min())

    def solve(self, rhs):
        """ Coarse coefficients for a compatible coarse right-hand side """
        coeffs = np.zeros(len(self))
        coeffs[:-1] = cho_solve(self.__factor, rhs[:-1])
        return coeffs

    def __repr__(self):
        return "MultiscaleBasis(nodes={}, ell={})".format(len(self), self.ell)


# -------------------------------------------------------------------------------
# Correctors
# -------------------------------------------------------------------------------

def element_forms(mesh, A):
    """ Forms a(lambda_z|_T, .) for every coarse triangle T and local vertex a, column 3 T + a """
    D = element_gradients(mesh)
    ctri = mesh.fine_to_coarse_triangle
    ctype = mesh.coarse_types[ctri]
    nodes = mesh.fine_triangles
    rows, cols, data = [], [], []
    for a in range(3):
        g = CELL_GRADIENTS[ctype][:, :, a] / mesh.H
        flux = np.einsum('tij,tj->ti', A.matrices, g)
        local = mesh.fine_triangle_area * np.einsum('ti,tib->tb', flux, D)
        rows.append(nodes.ravel())
        cols.append(np.repeat(3 * ctri + a, 3))
        data.append(local.ravel())
    shape = (mesh.fine_node_count, 3 * len(mesh.coarse_triangles))
    return sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=shape).tocsc()


def build_element_correctors(mesh, A, op, ell, keep_history=False):
    """ D_T^ell applied to the three local hats of every coarse triangle, keyed (T, a) """
    F = element_forms(mesh, A)
    columns = [(T, a) for T in range(len(mesh.coarse_triangles)) for a in range(3)]
    origins = [{T // 2} for T, _ in columns]
    with Timer(logger=getLogger(), desc='element correctors at level {}'.format(ell)):
        return iterate_correctors(op, F, columns, ell, keep_history=keep_history, origins=origins)


def sum_element_correctors(mesh, element_correctors, ell=None):
    """ sum_{T containing z} D_T^ell lambda_z|_T for every coarse node z, shape (N_h^2, N_H^2) """
    q = element_correctors.level(element_correctors.ell_max if ell is None else ell)
    out = np.zeros((mesh.fine_node_count, mesh.coarse_node_count))
    for c, (T, a) in enumerate(element_correctors.columns):
        out[:, mesh.coarse_triangles[T, a]] += q[:, c]
    return out


def build_basis_correctors(mesh, op, ell, keep_history=False):
    """ D^ell lambda_z for every coarse node z, iterated from the forms a(lambda_z, .) """
    E = op.interpolator.coarse_embedding
    F = op.K.matrix @ E
    columns = list(range(mesh.coarse_node_count))
    origins = [set(mesh.node_patch(z).squares) for z in columns]
    with Timer(logger=getLogger(), desc='basis correctors at level {}'.format(ell)):
        return iterate_correctors(op, F, columns, ell, keep_history=keep_history, origins=origins)


def build_multiscale_basis(mesh, op, ell, correctors=None):
    """ phi_z = lambda_z - D^ell lambda_z """
    correctors = correctors if correctors is not None else build_basis_correctors(mesh, op, ell)
    E = op.interpolator.coarse_embedding.toarray()
    corrections = -correctors.level(ell)
    return MultiscaleBasis(mesh, op.K, E + corrections, ell, corrections)


def p1_basis(mesh, K, interpolator):
    """ The uncorrected coarse P1 basis (level 0) """
    return MultiscaleBasis(mesh, K, interpolator.coarse_embedding.toarray(), 0)


# -------------------------------------------------------------------------------
# Galerkin solves
# -------------------------------------------------------------------------------

def lod_solve(basis, f, mesh=None):
    """ Galerkin solution in span{phi_z}, returned as a mean-zero fine function with its coarse coefficients """
    mesh = mesh if mesh is not None else basis.mesh
    b = assemble_load(mesh, f)
    rhs = basis.phi.T @ b.values
    coeffs = basis.solve(rhs)
    u = FEFunction(basis.phi @ coeffs, mesh).normalized()
    return u, coeffs


def solve_p1_coarse(mesh, K, interpolator, f):
    """ Coarse P1 Galerkin solution on T_H with the fine-scale stiffness """
    return lod_solve(p1_basis(mesh, K, interpolator), f, mesh=mesh)


def energy_error_vs_reference(u, u_ref, K):
    return energy_error(u, u_ref, K)


def lod_errors(basis, f, u_ref, K):
    """ (energy error, L2 error) of the LOD solution against a fine reference """
    u, _ = lod_solve(basis, f)
    return energy_error_vs_reference(u, u_ref, K), l2_error(u, u_ref)


def reference_solution(mesh, K, f, tol=REFERENCE_TOL):
    """ Fine solve with an already assembled stiffness """
    return solve_mean_zero(K, assemble_load(mesh, f), tol=tol)
