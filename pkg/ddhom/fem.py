# -*- coding: utf-8 -*-

"""
P1 finite elements on the fine periodic mesh

The quotient space H^1_#(Omega)/R is realized by mean-zero representatives:
stiffness matrices keep constants in their kernel, load forms are made
compatible by subtracting their mean and conjugate gradients runs on the
mean-zero subspace. On the uniform torus mesh the integral mean of a P1
function equals the plain average of its nodal values.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import logging
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import AdmissibilityError, SolverError
from .mesh import grid_triangles
from .coefficient import constant_field


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


DEFAULT_TOL = 1e-10
REFERENCE_TOL = 1e-8
COMPATIBILITY_TOL = 1e-12
# gradients of the three vertex hats of LOWER and UPPER triangles in cell units, as columns
CELL_GRADIENTS = np.array([[[-1, 1, 0],
                            [0, -1, 1]],
                           [[0, 1, -1],
                            [-1, 0, 1]]], dtype=float)
ELEMENT_MASS = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]], dtype=float) / 12.0


# -------------------------------------------------------------------------------
# Data structures
# -------------------------------------------------------------------------------

class FEFunction(object):
    """ Nodal vector on the fine periodic P1 space of a mesh """

    def __init__(self, values, mesh):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.fine_node_count,):
            raise AdmissibilityError("Expected {} nodal values, got shape {}".format(mesh.fine_node_count, values.shape))
        self.values = values
        self.mesh = mesh

    @staticmethod
    def zeros(mesh):
        return FEFunction(np.zeros(mesh.fine_node_count), mesh)

    @staticmethod
    def interpolate(mesh, func):
        """ Nodal interpolant of func(x1, x2) """
        xy = mesh.fine_node_coordinates()
        return FEFunction(func(xy[:, 0], xy[:, 1]), mesh)

    def mean(self):
        return float(self.values.mean())

    def normalized(self):
        """ The mean-zero representative """
        return FEFunction(self.values - self.values.mean(), self.mesh)

    def gradient(self):
        return gradients(self.mesh, self.values)

    def __check_other(self, other):
        if other.mesh.n_fine != self.mesh.n_fine:
            raise AdmissibilityError("FEFunctions live on different meshes ({} vs {})".format(self.mesh.n_fine, other.mesh.n_fine))

    def __add__(self, other):
        self.__check_other(other)
        return FEFunction(self.values + other.values, self.mesh)

    def __sub__(self, other):
        self.__check_other(other)
        return FEFunction(self.values - other.values, self.mesh)

    def __mul__(self, factor):
        return FEFunction(self.values * factor, self.mesh)

    __rmul__ = __mul__

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return "FEFunction(n_fine={}, mean={:.3e})".format(self.mesh.n_fine, self.mean())


class SparseOperator(object):
    """ Symmetric sparse operator over fine nodal vectors with the constants in its kernel """

    kernel = 'constants'

    def __init__(self, matrix, mesh, symmetric=True):
        self.matrix = matrix.tocsr()
        self.mesh = mesh
        self.symmetric = symmetric

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, v):
        return self.matrix @ _values(v)

    def __matmul__(self, v):
        return self.matrix @ v

    def inner(self, u, v):
        """ a(u, v) """
        return float(_values(u) @ (self.matrix @ _values(v)))

    def energy(self, v):
        return self.inner(v, v)

    def row_sums(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def diagonal(self):
        return self.matrix.diagonal()

    def __repr__(self):
        return "SparseOperator(shape={}, nnz={})".format(self.matrix.shape, self.matrix.nnz)


class LinearForm(object):
    """ Assembled linear functional, one entry per fine node """

    def __init__(self, values, mesh):
        self.values = np.asarray(values, dtype=float)
        self.mesh = mesh

    def total(self):
        return float(self.values.sum())

    def is_compatible(self, rtol=COMPATIBILITY_TOL):
        """ Entries sum to zero relative to the l1 norm """
        return abs(self.total()) <= rtol * max(np.abs(self.values).sum(), np.finfo(float).tiny)

    def centered(self):
        return LinearForm(self.values - self.values.mean(), self.mesh)

    def pair(self, v):
        return float(self.values @ _values(v))

    def __add__(self, other):
        return LinearForm(self.values + other.values, self.mesh)

    def __sub__(self, other):
        return LinearForm(self.values - other.values, self.mesh)

    def __repr__(self):
        return "LinearForm(n={}, total={:.3e})".format(len(self.values), self.total())


def _values(v):
    return v.values if isinstance(v, (FEFunction, LinearForm)) else np.asarray(v)


# -------------------------------------------------------------------------------
# Element kernels
# -------------------------------------------------------------------------------

def element_gradients(mesh):
    """ Basis gradients per fine triangle, shape (n_t, 2, 3): column a is the gradient of vertex hat a """
    return CELL_GRADIENTS[mesh.fine_types] / mesh.h


def gradients(mesh, values):
    """ Piecewise constant gradients of nodal vectors, shape (n_t, 2) or (n_t, 2, m) for an (N, m) block """
    values = _values(values)
    D = element_gradients(mesh)
    local = values[mesh.fine_triangles]
    if values.ndim == 1:
        return np.einsum('tia,ta->ti', D, local)
    return np.einsum('tia,tam->tim', D, local)


def element_fluxes(mesh, A, values):
    """ A grad v per fine triangle """
    _check_field(mesh, A)
    grad = gradients(mesh, values)
    if grad.ndim == 2:
        return np.einsum('tij,tj->ti', A.matrices, grad)
    return np.einsum('tij,tjm->tim', A.matrices, grad)


def _check_field(mesh, A):
    if len(A) != len(mesh.fine_triangles):
        raise AdmissibilityError("Coefficient has {} cells but the mesh has {} fine triangles".format(len(A), len(mesh.fine_triangles)))


@lru_cache(maxsize=16)
def _periodic_mass(n):
    nodes, _ = grid_triangles(n)
    area = 0.5 / (n * n)
    rows = np.repeat(nodes, 3, axis=1).ravel()
    cols = np.tile(nodes, (1, 3)).ravel()
    data = np.tile(area * ELEMENT_MASS.ravel(), len(nodes))
    return sp.coo_matrix((data, (rows, cols)), shape=(n * n, n * n)).tocsr()


def mass_matrix(mesh):
    """ Consistent P1 mass matrix of the fine mesh """
    return _periodic_mass(mesh.n_fine)


@lru_cache(maxsize=16)
def prolongation_matrix(n_from, n_to):
    """ Exact P1 embedding of an n_from grid into a nested n_to grid, shape (n_to^2, n_from^2) """
    if n_to % n_from:
        raise AdmissibilityError("Grids are not nested: {} does not divide {}".format(n_from, n_to))
    r = n_to // n_from
    iy, ix = np.divmod(np.arange(n_to * n_to), n_to)
    cx, fx = np.divmod(ix, r)
    cy, fy = np.divmod(iy, r)
    xi, eta = fx / r, fy / r
    lower = eta <= xi
    corners = [(cx, cy), (cx + 1, cy), (cx + 1, cy + 1), (cx, cy + 1)]
    weights = [np.where(lower, 1 - xi, 1 - eta),
               np.where(lower, xi - eta, 0.0),
               np.where(lower, eta, xi),
               np.where(lower, 0.0, eta - xi)]
    rows = np.tile(np.arange(n_to * n_to), 4)
    cols = np.concatenate([(y % n_from) * n_from + (x % n_from) for x, y in corners])
    data = np.concatenate(weights)
    matrix = sp.coo_matrix((data, (rows, cols)), shape=(n_to * n_to, n_from * n_from)).tocsr()
    matrix.eliminate_zeros()
    return matrix


def prolongate(values, n_from, n_to):
    return prolongation_matrix(n_from, n_to) @ _values(values)


# -------------------------------------------------------------------------------
# Assembly
# -------------------------------------------------------------------------------

def assemble_stiffness(mesh, A):
    """ Stiffness matrix of a(u, v) = int A grad u . grad v """
    _check_field(mesh, A)
    D = element_gradients(mesh)
    local = mesh.fine_triangle_area * np.einsum('tia,tij,tjb->tab', D, A.matrices, D)
    nodes = mesh.fine_triangles
    rows = np.repeat(nodes, 3, axis=1).ravel()
    cols = np.tile(nodes, (1, 3)).ravel()
    n = mesh.fine_node_count
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K = 0.5 * (K + K.T)
    return SparseOperator(K, mesh)


def assemble_flux_form(mesh, A, vectors, triangles=None):
    """ The form w -> sum_t int_t A g_t . grad w for per-triangle constant vectors g_t

    :param vectors: (2,) constant vector or (n_t, 2) array of vectors
    :param triangles: restrict the integral to these fine triangles (default: all)
    """
    _check_field(mesh, A)
    vectors = np.broadcast_to(np.asarray(vectors, dtype=float), (len(mesh.fine_triangles), 2))
    D = element_gradients(mesh)
    flux = np.einsum('tij,tj->ti', A.matrices, vectors)
    local = mesh.fine_triangle_area * np.einsum('ti,tia->ta', flux, D)
    nodes = mesh.fine_triangles
    if triangles is not None:
        local, nodes = local[triangles], nodes[triangles]
    values = np.bincount(nodes.ravel(), weights=local.ravel(), minlength=mesh.fine_node_count)
    return LinearForm(values, mesh)


def assemble_flux_load(mesh, A, Q, j):
    """ w -> int_Q A e_j . grad w for a coarse square Q (None for all of Omega) and j in {1, 2} """
    if j not in (1, 2):
        raise AdmissibilityError("Direction must be 1 or 2 (got {})".format(j))
    if Q is not None and not 0 <= Q < mesh.square_count:
        raise IndexError("Square {} is out of range [0, {})".format(Q, mesh.square_count))
    e_j = np.eye(2)[j - 1]
    triangles = None if Q is None else mesh.square_triangles(Q)
    return assemble_flux_form(mesh, A, e_j, triangles)


def assemble_flux_loads(mesh, A):
    """ All square flux forms at once as a sparse (N_h^2, 2 N_Q) matrix, column 2 Q + (j - 1) """
    _check_field(mesh, A)
    D = element_gradients(mesh)
    nodes = mesh.fine_triangles
    rows, cols, data = [], [], []
    for j in range(2):
        local = mesh.fine_triangle_area * np.einsum('ti,tia->ta', A.matrices[:, :, j], D)
        rows.append(nodes.ravel())
        cols.append(np.repeat(2 * mesh.fine_to_square + j, 3))
        data.append(local.ravel())
    shape = (mesh.fine_node_count, 2 * mesh.square_count)
    return sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=shape).tocsc()


def assemble_load(mesh, f, compatible=True):
    """ Load form of int f v

    :param f: callable f(x1, x2) integrated with the vertex rule, or nodal data integrated with the mass matrix
    :param compatible: subtract the mean so that the entries sum to zero
    """
    if callable(f):
        xy = mesh.fine_node_coordinates()
        # vertex rule: each node collects |t|/3 from its six triangles
        values = mesh.h * mesh.h * np.asarray(f(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(mesh.fine_node_count)
    else:
        data = _values(f)
        if data.shape != (mesh.fine_node_count,):
            raise AdmissibilityError("Nodal load data has shape {}, expected ({},)".format(data.shape, mesh.fine_node_count))
        values = mass_matrix(mesh) @ data
    form = LinearForm(values, mesh)
    return form.centered() if compatible else form


# -------------------------------------------------------------------------------
# Solvers
# -------------------------------------------------------------------------------

def _mean_free(v):
    return v - v.mean()


def solve_mean_zero(K, b, tol=DEFAULT_TOL, max_iters=None):
    """ Solve K u = b on the mean-zero subspace with Jacobi-preconditioned CG

    :returns: the mean-zero FEFunction u
    :raises SolverError: when CG does not reach the relative residual tol
    """
    b_form = b if isinstance(b, LinearForm) else LinearForm(b, K.mesh)
    rhs = b_form.values
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return FEFunction.zeros(K.mesh)
    if not b_form.is_compatible():
        raise AdmissibilityError("Load form is not compatible: entries sum to {:.3e}".format(b_form.total()))
    rhs = _mean_free(rhs)
    n = K.shape[0]
    inv_diag = 1.0 / K.diagonal()
    op = LinearOperator((n, n), matvec=lambda v: _mean_free(K.matrix @ _mean_free(np.ravel(v))), dtype=float)
    precond = LinearOperator((n, n), matvec=lambda v: _mean_free(inv_diag * _mean_free(np.ravel(v))), dtype=float)
    counter = [0]

    def count(xk):
        counter[0] += 1
    max_iters = max_iters if max_iters else 10 * n
    x, info = cg(op, rhs, rtol=tol, atol=0.0, maxiter=max_iters, M=precond, callback=count)
    x = _mean_free(x)
    residual = np.linalg.norm(rhs - K.matrix @ x) / bnorm
    getLogger().debug("CG finished: {} iterations, relative residual {:.3e}".format(counter[0], residual))
    if info != 0 and residual > tol:
        raise SolverError("CG did not converge in {} iterations (relative residual {:.3e})".format(counter[0], residual),
                          residual=residual, iterations=counter[0])
    return FEFunction(x, K.mesh)


def solve_model_problem(mesh, A, f, tol=REFERENCE_TOL, max_iters=None):
    """ Fine reference solution u_eps of -div(A grad u) = f modulo constants """
    K = assemble_stiffness(mesh, A)
    b = assemble_load(mesh, f)
    return solve_mean_zero(K, b, tol=tol, max_iters=max_iters)


def solve_homogenized(mesh, A0, f, tol=REFERENCE_TOL, max_iters=None):
    """ Solution u_0 with the constant effective tensor A0 (an EffectiveTensor or a 2x2 matrix) """
    matrix = np.asarray(getattr(A0, 'matrix', A0), dtype=float)
    if matrix.shape != (2, 2) and matrix.ndim != 0:
        raise AdmissibilityError("The homogenized solve needs a constant tensor")
    return solve_model_problem(mesh, constant_field(mesh, matrix), f, tol=tol, max_iters=max_iters)


# -------------------------------------------------------------------------------
# Norms
# -------------------------------------------------------------------------------

def _aligned_difference(u, v):
    """ u - v on the finer of the two meshes, mean removed """
    nu, nv = u.mesh.n_fine, v.mesh.n_fine
    if nu == nv:
        diff, n = u.values - v.values, nu
    elif nu > nv:
        diff, n = u.values - prolongate(v.values, nv, nu), nu
    else:
        diff, n = prolongate(u.values, nu, nv) - v.values, nv
    return diff - diff.mean(), n


def l2_error(u, v):
    """ ||u - v||_L2 modulo constants, interpolating the coarser function onto the finer mesh """
    diff, n = _aligned_difference(u, v)
    return float(np.sqrt(max(diff @ (_periodic_mass(n) @ diff), 0.0)))


def l2_norm(u):
    values = u.values - u.values.mean()
    return float(np.sqrt(max(values @ (mass_matrix(u.mesh) @ values), 0.0)))


def energy_error(u, v, K):
    """ ||u - v||_a with a given by K """
    diff = _values(u) - _values(v)
    if diff.shape[0] != K.shape[0]:
        raise AdmissibilityError("Energy error needs functions on the operator's mesh")
    return float(np.sqrt(max(K.inner(diff, diff), 0.0)))
