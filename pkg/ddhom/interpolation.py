# -*- coding: utf-8 -*-

"""
Quasi-interpolation I_H = E_H o Pi_H onto coarse P1 functions

Pi_H is the L2 projection onto affine functions on every coarse triangle,
E_H averages the per-triangle affine values at each coarse vertex. All
integrals are exact: the fine functions are P1 on fine triangles nested in
the coarse ones and every integrand is at most quadratic, so the edge
midpoint rule is used throughout.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import AdmissibilityError
from .mesh import TRIANGLE_VERTICES
from .fem import FEFunction, prolongation_matrix, _periodic_mass, _values


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


KERNEL_RTOL = 1e-11
# edges of a triangle as (vertex, vertex) and the matching vertex incidence
EDGES = ((0, 1), (1, 2), (2, 0))
EDGE_INCIDENCE = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=float)


def _monomials(points):
    """ {1, xi, eta} evaluated at points (..., 2) """
    points = np.asarray(points, dtype=float)
    return np.stack([np.ones(points.shape[:-1]), points[..., 0], points[..., 1]], axis=-1)


def _midpoints(vertices):
    """ Edge midpoints of triangles (..., 3, 2) """
    return np.stack([0.5 * (vertices[..., a, :] + vertices[..., b, :]) for a, b in EDGES], axis=-2)


# -------------------------------------------------------------------------------
# Data structures
# -------------------------------------------------------------------------------

class QuasiInterpolator(object):
    """ Sparse factors of I_H = E_H o Pi_H for a mesh hierarchy

    - matrix_PiH: fine nodal values -> affine coefficients (3 per coarse triangle, basis {1, xi, eta})
    - matrix_EH: affine coefficients -> coarse nodal values (vertex averages)
    - matrix_IH: their product, shape (N_H^2, N_h^2)
    - coarse_embedding: exact P1(T_H) -> fine nodal embedding, shape (N_h^2, N_H^2)
    """

    def __init__(self, mesh, matrix_PiH, matrix_EH, valence):
        self.mesh = mesh
        self.matrix_PiH = matrix_PiH.tocsr()
        self.matrix_EH = matrix_EH.tocsr()
        self.matrix_IH = (self.matrix_EH @ self.matrix_PiH).tocsr()
        self.matrix_IH.eliminate_zeros()
        self.valence = valence
        self.coarse_embedding = prolongation_matrix(mesh.n_coarse, mesh.n_fine)
        self.__stability = None

    def apply(self, v):
        return self.matrix_IH @ _values(v)

    def embed(self, v_H):
        """ Fine nodal vector of a coarse P1 function """
        return self.coarse_embedding @ np.asarray(v_H)

    def kernel_projection(self, v):
        """ (id - E I_H) v, the projection onto W along P1(T_H) """
        values = _values(v)
        return values - self.coarse_embedding @ (self.matrix_IH @ values)

    def kernel_residual(self, v):
        r = self.apply(v)
        if r.ndim == 1:
            return float(np.abs(r - r.mean()).max())
        return float(np.abs(r - r.mean(axis=0)).max())

    def in_kernel(self, v, rtol=KERNEL_RTOL):
        scale = max(np.abs(_values(v)).max(), 1.0)
        return self.kernel_residual(v) <= rtol * scale

    def stability_constant(self):
        """ L2 operator norm of I_H on the fine space, computed once """
        if self.__stability is None:
            C = self.matrix_IH
            coarse_mass = _periodic_mass(self.mesh.n_coarse)
            fine_mass = _periodic_mass(self.mesh.n_fine)
            lhs = (C.T @ coarse_mass @ C).tocsc()
            value = eigsh(lhs, k=1, M=fine_mass.tocsc(), which='LA', return_eigenvectors=False)[0]
            self.__stability = float(np.sqrt(value))
            getLogger().debug("||I_H||_L2 = {:.6f} on {}".format(self.__stability, self.mesh))
        return self.__stability

    def __repr__(self):
        return "QuasiInterpolator({})".format(self.mesh)


# -------------------------------------------------------------------------------
# Functions
# -------------------------------------------------------------------------------

def _coarse_factors(mesh):
    """ Per coarse triangle type: Gram matrix of {1, xi, eta} and vertex evaluation matrix """
    area = 0.5 * mesh.H * mesh.H
    grams, evaluations = [], []
    for vertices in TRIANGLE_VERTICES:
        m = _monomials(_midpoints(vertices))
        gram = area / 3.0 * m.T @ m
        assert np.linalg.cond(gram) < 1e8, "singular local normal equations"
        grams.append(gram)
        evaluations.append(_monomials(vertices))
    return np.array(grams), np.array(evaluations)


def build_interpolator(mesh):
    """ Assemble I_H = E_H o Pi_H for a mesh hierarchy """
    r = mesh.ratio
    grams, evaluations = _coarse_factors(mesh)
    ctri = mesh.fine_to_coarse_triangle
    ctype = mesh.coarse_types[ctri]
    # fine moments int_t v m_a, edge midpoint rule, local coordinates in units of H
    m = _monomials(_midpoints(mesh.fine_local_vertices / r))
    moments = mesh.fine_triangle_area / 3.0 * 0.5 * np.einsum('tea,eb->tab', m, EDGE_INCIDENCE)
    coeffs = np.einsum('tac,tcb->tab', np.linalg.inv(grams)[ctype], moments)
    rows = np.repeat(3 * ctri[:, None] + np.arange(3), 3, axis=1)
    cols = np.repeat(mesh.fine_triangles[:, None, :], 3, axis=1)
    shape = (3 * len(mesh.coarse_triangles), mesh.fine_node_count)
    PiH = sp.coo_matrix((coeffs.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()
    # vertex averaging
    valence = np.bincount(mesh.coarse_triangles.ravel(), minlength=mesh.coarse_node_count)
    T = np.arange(len(mesh.coarse_triangles))
    nodes = mesh.coarse_triangles
    local = evaluations[mesh.coarse_types] / valence[nodes][:, :, None]
    rows = np.repeat(nodes[:, :, None], 3, axis=2)
    cols = np.broadcast_to(3 * T[:, None, None] + np.arange(3), rows.shape)
    EH = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(mesh.coarse_node_count, shape[0])).tocsr()
    op = QuasiInterpolator(mesh, PiH, EH, valence)
    getLogger().debug("Built {} with {} nonzeros".format(op, op.matrix_IH.nnz))
    return op


def _checked_values(op, v):
    if isinstance(v, FEFunction) and v.mesh.n_fine != op.mesh.n_fine:
        raise AdmissibilityError("Function lives on a {0}x{0} mesh, the interpolator on {1}x{1}".format(v.mesh.n_fine, op.mesh.n_fine))
    values = _values(v)
    if values.shape[0] != op.mesh.fine_node_count:
        raise AdmissibilityError("Expected {} fine nodal values, got {}".format(op.mesh.fine_node_count, values.shape[0]))
    return values


def apply_IH(op, v):
    """ Coarse nodal vector I_H v """
    return op.apply(_checked_values(op, v))


def kernel_residual(op, v):
    """ max |I_H v - mean(I_H v)|, zero (to rounding) exactly when v is in W modulo constants """
    return op.kernel_residual(_checked_values(op, v))
