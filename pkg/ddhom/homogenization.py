# -*- coding: utf-8 -*-

"""
Effective tensors: classical A_0 from cell problems, ideal A_H^inf from kernel correctors

Corrector blocks are stored as dense (N_h^2, 2 N_Q) arrays whose column
2 Q + (j - 1) holds the corrector of square Q and direction j. The same layout
is used by the localized correctors of :mod:`ddhom.schwarz`.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SolverError
from .mesh import build_unit_cell_mesh
from .coefficient import constant_field, generate_coefficient, generate_unit_cell
from .fem import (FEFunction, DEFAULT_TOL, assemble_stiffness, assemble_flux_load, assemble_flux_loads,
                  element_fluxes, solve_mean_zero)
from .interpolation import build_interpolator
from .util import Timer


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


SYMMETRY_TOL = 1e-8
BOUNDS_TOL = 1e-8
PROP1_DIFF_TOL = 1e-6
PROP1_SPREAD_TOL = 1e-8
SOLVE_CHUNK = 8  # right-hand sides per LU solve, independent of the thread count
EXTRAPOLATION_TOL = 1e-10


# -------------------------------------------------------------------------------
# Data structures
# -------------------------------------------------------------------------------

class EffectiveTensor(object):
    """ Piecewise constant 2x2 tensor on the coarse squares, or a single constant matrix """

    def __init__(self, per_square, kind='', ell=None):
        per_square = np.asarray(per_square, dtype=float)
        self.constant = per_square.ndim == 2
        self.per_square = per_square[None, :, :] if self.constant else per_square
        self.kind = kind
        self.ell = ell

    @property
    def matrix(self):
        """ The constant matrix (the first square's matrix for piecewise tensors) """
        return self.per_square[0]

    def __getitem__(self, square):
        return self.per_square[0 if self.constant else square]

    def __len__(self):
        return len(self.per_square)

    def symmetry_error(self):
        return float(np.abs(self.per_square - self.per_square.transpose(0, 2, 1)).max())

    def eigen_bounds(self):
        eig = np.linalg.eigvalsh(0.5 * (self.per_square + self.per_square.transpose(0, 2, 1)))
        return float(eig.min()), float(eig.max())

    def within_bounds(self, alpha, beta, tol=BOUNDS_TOL):
        lo, hi = self.eigen_bounds()
        return alpha - tol <= lo and hi <= beta + tol

    def spread(self):
        """ Max entrywise deviation across squares """
        return float(np.abs(self.per_square - self.per_square[0]).max())

    def max_entry_difference(self, other):
        return float(np.abs(self.per_square - other.per_square).max())

    def to_rows(self):
        rows = []
        for square, m in enumerate(self.per_square):
            rows.append({'square': square, 'a11': m[0, 0], 'a12': m[0, 1], 'a21': m[1, 0], 'a22': m[1, 1]})
        return rows

    def __repr__(self):
        if self.constant:
            return "EffectiveTensor({}, {})".format(self.kind, np.array2string(self.matrix, precision=6))
        return "EffectiveTensor({}, squares={}, ell={})".format(self.kind, len(self), self.ell)


class CellCorrectors(object):
    """ Mean-zero solutions w_1, w_2 of the unit cell problems """

    def __init__(self, w1, w2, unit_mesh, A1, residuals=None):
        self.w = (w1, w2)
        self.unit_mesh = unit_mesh
        self.A1 = A1
        self.residuals = residuals or (0.0, 0.0)

    def __getitem__(self, j):
        """ w_j for j in {1, 2} """
        return self.w[j - 1]


class IdealCorrectors(object):
    """ Kernel correctors q_{Q,j} in W for all squares and directions """

    def __init__(self, q, mesh, constraint_residual=0.0, equation_residual=0.0):
        self.q = q
        self.mesh = mesh
        self.constraint_residual = constraint_residual
        self.equation_residual = equation_residual

    def get(self, Q, j):
        return FEFunction(self.q[:, 2 * Q + j - 1], self.mesh)

    def summed(self, j):
        """ sum_Q q_{Q,j} """
        return FEFunction(self.q[:, j - 1::2].sum(axis=1), self.mesh)


class EquivalenceReport(object):

    def __init__(self, A0, A_inf, precondition_met, flux_identity=None, sum_identity=None, energy_constant=None):
        self.A0 = A0
        self.A_inf = A_inf
        self.precondition_met = precondition_met
        self.max_entry_diff = A_inf.max_entry_difference(A0)
        self.per_square_spread = A_inf.spread()
        self.flux_identity = flux_identity
        self.sum_identity = sum_identity
        self.energy_constant = energy_constant

    @property
    def certified(self):
        return self.precondition_met and self.max_entry_diff <= PROP1_DIFF_TOL and self.per_square_spread <= PROP1_SPREAD_TOL

    def to_dict(self):
        return {'max_entry_diff': self.max_entry_diff,
                'per_square_spread': self.per_square_spread,
                'precondition_met': self.precondition_met,
                'certified': self.certified,
                'flux_identity': self.flux_identity,
                'sum_identity': self.sum_identity,
                'energy_constant': self.energy_constant,
                'A0': self.A0.matrix.tolist(),
                'A_inf': self.A_inf.per_square.tolist()}


# -------------------------------------------------------------------------------
# Classical tensor
# -------------------------------------------------------------------------------

def solve_cell_problems(unit_mesh, A1, tol=DEFAULT_TOL):
    """ Solve a(w_j, v) = int A_1 e_j . grad v on the periodic unit cell, j = 1, 2 """
    K = assemble_stiffness(unit_mesh, A1)
    w, residuals = [], []
    for j in (1, 2):
        # entries sum to zero up to rounding, which dominates for a constant A_1
        b = assemble_flux_load(unit_mesh, A1, None, j).centered()
        w_j = solve_mean_zero(K, b, tol=tol)
        w.append(w_j)
        bnorm = np.linalg.norm(b.values)
        residuals.append(float(np.linalg.norm(b.values - K.apply(w_j)) / bnorm) if bnorm else 0.0)
    getLogger().debug("Cell problems solved, relative residuals {}".format(residuals))
    return CellCorrectors(w[0], w[1], unit_mesh, A1, tuple(residuals))


def classical_tensor(A1, w, form='flux'):
    """ A_0 e_j = int A_1 (e_j - grad w_j) over the unit cell

    :param form: 'flux' for the linear form above, 'energy' for the quadratic form
                 int A_1 (e_j - grad w_j) . (e_k - grad w_k)
    """
    mesh = w.unit_mesh
    area = mesh.fine_triangle_area
    fields = np.stack([np.eye(2)[j] - w[j + 1].gradient() for j in range(2)], axis=2)  # (n_t, 2, 2)
    fluxes = np.einsum('tik,tkj->tij', A1.matrices, fields)
    if form == 'flux':
        A0 = area * fluxes.sum(axis=0)
    elif form == 'energy':
        A0 = area * np.einsum('tik,tij->kj', fields, fluxes)
    else:
        raise ValueError("Unknown tensor form: {}".format(form))
    tensor = EffectiveTensor(A0, kind='A0')
    if tensor.symmetry_error() > SYMMETRY_TOL:
        getLogger().warning("A_0 is not symmetric (error {:.3e}), solver tolerance may be too loose".format(tensor.symmetry_error()))
    return tensor


def extrapolated_tensor(spec, cells=(16, 32, 64), tol=DEFAULT_TOL):
    """ A_0 extrapolated in the cell resolution

    The classical tensor is computed on unit cells with ``cells`` fine cells
    per side (three resolutions, each twice the last) and extrapolated entry by
    entry with Aitken's delta-squared, which estimates the convergence order
    from the data. Entries that do not change keep the finest value.
    """
    if len(cells) != 3 or any(b != 2 * a for a, b in zip(cells, cells[1:])):
        raise ValueError("Extrapolation needs three resolutions, each twice the last (got {})".format(cells))
    values = []
    for n in cells:
        unit_mesh = build_unit_cell_mesh(n)
        A1 = generate_unit_cell(spec, unit_mesh)
        values.append(classical_tensor(A1, solve_cell_problems(unit_mesh, A1, tol=tol)).matrix)
    coarse, middle, fine = values
    d1, d2 = middle - coarse, fine - middle
    denom = d2 - d1
    moving = np.abs(denom) > EXTRAPOLATION_TOL * max(1.0, float(np.abs(fine).max()))
    extrapolated = np.where(moving, fine - d2 ** 2 / np.where(moving, denom, 1.0), fine)
    getLogger().debug("A_0 at {} cells: {}, extrapolated {}".format(cells, [v.tolist() for v in values], extrapolated.tolist()))
    return EffectiveTensor(extrapolated, kind='A0')


# -------------------------------------------------------------------------------
# Ideal correctors
# -------------------------------------------------------------------------------

class KernelSaddleSolver(object):
    """ LU factorization of [[K, C^T], [C, 0]] for solves in W = ker I_H """

    def __init__(self, K, interpolator):
        self.K = K
        self.interpolator = interpolator
        C = interpolator.matrix_IH
        self.n = K.shape[0]
        self.m = C.shape[0]
        saddle = sp.bmat([[K.matrix, C.T], [C, None]], format='csc')
        with Timer(logger=getLogger(), desc='saddle factorization ({} unknowns)'.format(saddle.shape[0])):
            try:
                self.lu = splu(saddle)
            except RuntimeError as e:
                raise SolverError("Saddle-point factorization failed: {}".format(e))

    def solve(self, F):
        """ q in W with a(q, w) = F(w) for all w in W, for each column of F """
        F = np.atleast_2d(np.asarray(F, dtype=float).T).T
        rhs = np.vstack([F, np.zeros((self.m, F.shape[1]))])
        sol = self.lu.solve(np.asfortranarray(rhs))
        return sol[:self.n], sol[self.n:]


def _equation_residual(K, interpolator, q, F):
    """ Max over columns of ||(id - E I_H)^T (F - K q)|| / ||F||, the residual tested against W """
    r = F - K.matrix @ q
    projected = r - interpolator.matrix_IH.T @ (interpolator.coarse_embedding.T @ r)
    scale = np.maximum(np.linalg.norm(F, axis=0), np.finfo(float).tiny)
    return float((np.linalg.norm(projected, axis=0) / scale).max())


def solve_ideal_correctors(mesh, A, interpolator=None, tol=DEFAULT_TOL, threads=1, K=None, solver=None):
    """ All q_{Q,j} in W with a(q, w) = int_Q A e_j . grad w for w in W

    :returns: IdealCorrectors with columns 2 Q + (j - 1)
    """
    interpolator = interpolator if interpolator is not None else build_interpolator(mesh)
    K = K if K is not None else assemble_stiffness(mesh, A)
    solver = solver if solver is not None else KernelSaddleSolver(K, interpolator)
    F = assemble_flux_loads(mesh, A).toarray()
    with Timer(logger=getLogger(), desc='ideal correctors ({} solves)'.format(F.shape[1])):
        chunks = [np.arange(start, min(start + SOLVE_CHUNK, F.shape[1])) for start in range(0, F.shape[1], SOLVE_CHUNK)]

        def solve(cols):
            return solver.solve(F[:, cols])[0]
        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                parts = list(executor.map(solve, chunks))
        else:
            parts = [solve(cols) for cols in chunks]
        q = np.hstack(parts)
    constraint = float(np.abs(interpolator.matrix_IH @ q).max())
    residual = _equation_residual(K, interpolator, q, F)
    getLogger().info("Ideal correctors: constraint residual {:.3e}, equation residual {:.3e}".format(constraint, residual))
    if residual > tol:
        raise SolverError("Ideal corrector residual {:.3e} exceeds tolerance {:.1e}".format(residual, tol), residual=residual)
    return IdealCorrectors(q, mesh, constraint, residual)


def solve_ideal_corrector(mesh, A, interpolator, Q, j, tol=DEFAULT_TOL, solver=None):
    """ The single corrector q_{Q,j} """
    if solver is None:
        interpolator = interpolator if interpolator is not None else build_interpolator(mesh)
        solver = KernelSaddleSolver(assemble_stiffness(mesh, A), interpolator)
    K, interpolator = solver.K, solver.interpolator
    F = assemble_flux_load(mesh, A, Q, j).values[:, None]
    q = solver.solve(F)[0]
    residual = _equation_residual(K, interpolator, q, F)
    if residual > tol:
        raise SolverError("Corrector ({}, {}) residual {:.3e} exceeds tolerance {:.1e}".format(Q, j, residual, tol), residual=residual)
    return FEFunction(q[:, 0], mesh)


# -------------------------------------------------------------------------------
# Tensors from correctors
# -------------------------------------------------------------------------------

def square_averages(mesh, A):
    """ (1 / |Q|) int_Q A for every coarse square, shape (N_Q, 2, 2) """
    totals = np.zeros((mesh.square_count, 2, 2))
    np.add.at(totals, mesh.fine_to_square, A.matrices)
    return totals * mesh.fine_triangle_area / mesh.square_area


def global_fluxes(mesh, A, q):
    """ int_Omega A grad q for a block of correctors, shape (2, m) """
    fluxes = element_fluxes(mesh, A, q)
    if fluxes.ndim == 2:
        fluxes = fluxes[:, :, None]
    return mesh.fine_triangle_area * fluxes.sum(axis=0)


def corrector_tensor(mesh, A, q, kind='', ell=None):
    """ Per-square tensor (1/|Q|) [int_Q A e_j . e_k - int_Omega A grad q_{Q,j} . e_k] """
    tensor = square_averages(mesh, A)
    flux = global_fluxes(mesh, A, q).reshape(2, mesh.square_count, 2)  # (k, Q, j)
    tensor -= flux.transpose(1, 0, 2) / mesh.square_area
    return EffectiveTensor(tensor, kind=kind, ell=ell)


def ideal_tensor(mesh, A, correctors):
    """ A_H^inf from the ideal correctors """
    return corrector_tensor(mesh, A, correctors.q, kind='ideal')


# -------------------------------------------------------------------------------
# Identity checks
# -------------------------------------------------------------------------------

def flux_identity_residual(mesh, A, correctors):
    """ max |int_Omega A grad q_{Q,k} . e_j - int_Q A e_k . grad q_j| with q_j = sum_Q q_{Q,j} """
    F = assemble_flux_loads(mesh, A)
    lhs = global_fluxes(mesh, A, correctors.q)  # (j, 2 Q + k)
    q_sum = np.column_stack([correctors.summed(j).values for j in (1, 2)])
    rhs = (F.T @ q_sum).T  # (j, 2 Q + k)
    scale = max(np.abs(lhs).max(), np.finfo(float).tiny)
    return float(np.abs(lhs - rhs).max() / scale)


def rescaled_cell_corrector(mesh, cells, j):
    """ Fine nodal values of eps * w_j(x / eps) """
    m = cells.unit_mesh.n_fine
    iy, ix = np.divmod(np.arange(mesh.fine_node_count), mesh.n_fine)
    unit_nodes = (iy % m) * m + (ix % m)
    return FEFunction(mesh.eps * cells[j].values[unit_nodes], mesh)


def corrector_sum_identity(mesh, cells, correctors, j):
    """ max-norm of sum_Q q_{Q,j} - eps w_j(x / eps) modulo constants """
    diff = correctors.summed(j) - rescaled_cell_corrector(mesh, cells, j)
    return float(np.abs(diff.normalized().values).max())


def corrector_energy_constant(mesh, correctors):
    """ C = max_{Q,j} ||grad q_{Q,j}||_L2 / |Q|^(1/2) """
    L = assemble_stiffness(mesh, constant_field(mesh, 1.0)).matrix
    q = correctors.q
    energies = np.einsum('nm,nm->m', q, L @ q)
    constant = float(np.sqrt(max(energies.max(), 0.0) / mesh.square_area))
    getLogger().info("Corrector energy constant C = {:.6f}".format(constant))
    return constant


def check_proposition1(spec, mesh, tol=DEFAULT_TOL, threads=1):
    """ Compare A_0 and A_H^inf at matched fine resolution

    The unit cell is meshed with N_h / N_eps cells per period so that both
    pipelines see the same discrete microstructure.
    """
    precondition = mesh.is_admissible()
    if not precondition:
        getLogger().warning("H = 1/{} is not a multiple of eps = 1/{}, the comparison is a negative control".format(mesh.n_coarse, mesh.n_eps))
    unit_mesh = build_unit_cell_mesh(mesh.n_fine // mesh.n_eps)
    A1 = generate_unit_cell(spec, unit_mesh)
    cells = solve_cell_problems(unit_mesh, A1, tol=tol)
    A0 = classical_tensor(A1, cells)
    A = generate_coefficient(spec, mesh)
    interpolator = build_interpolator(mesh)
    correctors = solve_ideal_correctors(mesh, A, interpolator, tol=tol, threads=threads)
    A_inf = ideal_tensor(mesh, A, correctors)
    report = EquivalenceReport(A0, A_inf, precondition,
                               flux_identity=flux_identity_residual(mesh, A, correctors),
                               sum_identity=max(corrector_sum_identity(mesh, cells, correctors, j) for j in (1, 2)),
                               energy_constant=corrector_energy_constant(mesh, correctors))
    getLogger().info("A_0 vs A_H^inf check on {}: diff={:.3e}, spread={:.3e}, certified={}".format(
        mesh, report.max_entry_diff, report.per_square_spread, report.certified))
    return report
