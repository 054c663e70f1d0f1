# -*- coding: utf-8 -*-

"""
Additive Schwarz subspace correction in the kernel space W = ker I_H

For every coarse node z_i the local subspace is
W_i = {v - E I_H v : v in H^1_0(omega_i)} and P_i is the a-orthogonal
projection onto it. Local problems are solved in the unknowns
(v, g = I_H v restricted to the touched coarse nodes) with Lagrange
multipliers for g = I_H v. The hat function lambda_i of the patch centre is
the only v with v - E I_H v = 0, so v is also kept orthogonal to it.

Iterates are dense (N_h^2, m) blocks, one column per right-hand side.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import math
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import splu

from .errors import SolverError, CertificationError
from .mesh import build_mesh_hierarchy
from .coefficient import generate_coefficient
from .fem import FEFunction, DEFAULT_TOL, assemble_stiffness, assemble_flux_loads, _values
from .interpolation import build_interpolator
from .homogenization import corrector_tensor, solve_ideal_correctors, ideal_tensor
from .util import Timer


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


LANCZOS_ITERS = 80
LANCZOS_RESTARTS = 3
BREAKDOWN_TOL = 1e-10
KERNEL_TOL = 1e-11
MAX_OVERLAP = 16  # 4x4 blocks covering a point
DECAY_FLOOR = 1e-12
RATIO_GROWTH_TOL = 2.0
LAYERS_PER_STEP = 3


def support_radius(ell):
    """ Squares within this torus distance of Q hold the support of q^ell_{Q,j} """
    return LAYERS_PER_STEP * ell


# -------------------------------------------------------------------------------
# Local solvers
# -------------------------------------------------------------------------------

class LocalSubspaceSolver(object):
    """ Factorized local problem of one node patch

    The output of a solve is supported on the closed 4x4 block of squares around
    the node (the patch plus the coarse hats touched by I_H) and is returned as
    values on ``block_nodes``.
    """

    def __init__(self, mesh, K, interpolator, node):
        self.node = node
        self.patch = mesh.node_patch(node)
        U = np.sort(self.patch.fine_interior_nodes)
        C = interpolator.matrix_IH
        E = interpolator.coarse_embedding.tocsc()
        self.local_dofs = U
        self.touched = np.unique(C[:, U].tocoo().row)
        J = self.touched
        cy, cx = divmod(node, mesh.n_coarse)
        self.block_nodes = mesh.block_nodes(cx - 2, cy - 2, 4)
        self.block_squares = {mesh.square_index(cx + dx, cy + dy) for dx in range(-2, 2) for dy in range(-2, 2)}
        # positions of U inside the (sorted) block
        self.__u_pos = np.searchsorted(self.block_nodes, U)
        E_J = E[:, J]
        self.__embedding = E_J[self.block_nodes].toarray()
        K_rows = K.matrix[U]
        self.local_stiffness = K_rows[:, U]
        self.local_constraint = C[J][:, U]
        P = K_rows @ E_J
        S = (E_J.T @ K.matrix @ E_J).toarray()
        ell = E[U][:, [node]].toarray()
        identity = sp.identity(len(J), format='csr')
        system = sp.bmat([[self.local_stiffness, -P, -self.local_constraint.T, ell],
                          [-P.T, sp.csr_matrix(S), identity, None],
                          [-self.local_constraint, identity, None, None],
                          [ell.T, None, None, None]], format='csc')
        self.__E_J = E_J
        try:
            self.factorization = splu(system)
        except RuntimeError as e:
            raise SolverError("Local factorization failed at node {}: {}".format(node, e))

    @property
    def size(self):
        return len(self.local_dofs)

    def solve_block(self, R):
        """ P_i applied to residual forms R (N, m), as values on block_nodes (n_block, m) """
        n, k = len(self.local_dofs), len(self.touched)
        rhs = np.zeros((n + 2 * k + 1, R.shape[1]))
        rhs[:n] = R[self.local_dofs]
        rhs[n:n + k] = -(self.__E_J.T @ R)
        sol = self.factorization.solve(rhs)
        out = -(self.__embedding @ sol[n:n + k])
        out[self.__u_pos] += sol[:n]
        return out

    def active_columns(self, R):
        """ Columns of R that pair nonzero with some test function of W_i """
        return np.flatnonzero(np.any(R[self.block_nodes] != 0, axis=0))

    def project(self, r):
        """ P_i r for a single residual form, as a full nodal vector """
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape[0])
        out[self.block_nodes] = self.solve_block(r[:, None])[:, 0]
        return out

    def __repr__(self):
        return "LocalSubspaceSolver(node={}, dofs={}, touched={})".format(self.node, self.size, len(self.touched))


class SchwarzOperator(object):
    """ P = sum_i P_i with the damping factor theta and the contraction estimate gamma_est """

    def __init__(self, mesh, K, interpolator, solvers, threads=1):
        self.mesh = mesh
        self.K = K
        self.interpolator = interpolator
        self.solvers = solvers
        self.threads = threads or 1
        self.theta = None
        self.gamma_est = None
        self.spectral_bounds = None
        self.ritz_values = None

    @property
    def estimated(self):
        return self.theta is not None

    def apply(self, R):
        """ sum_i P_i R for residual forms (N,) or (N, m), summed in node order """
        R = np.asarray(R, dtype=float)
        vector = R.ndim == 1
        R2 = R[:, None] if vector else R

        def local(solver):
            cols = solver.active_columns(R2)
            if len(cols) == 0:
                return solver, cols, None
            return solver, cols, solver.solve_block(R2[:, cols])
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                parts = list(executor.map(local, self.solvers))
        else:
            parts = [local(s) for s in self.solvers]
        out = np.zeros_like(R2)
        for solver, cols, values in parts:
            if values is not None:
                out[np.ix_(solver.block_nodes, cols)] += values
        return out[:, 0] if vector else out

    def apply_to_function(self, v):
        """ P v for v in V (as a residual form a(v, .)) """
        return self.apply(self.K.matrix @ _values(v))

    def random_kernel_vectors(self, count, seed=0):
        """ Columns x - E I_H x for standard normal x """
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((self.mesh.fine_node_count, count))
        return self.interpolator.kernel_projection(X)

    def __repr__(self):
        return "SchwarzOperator(nodes={}, theta={}, gamma_est={})".format(len(self.solvers), self.theta, self.gamma_est)


def build_local_solvers(mesh, A=None, interpolator=None, K=None, certify=True, seed=0):
    """ One factorized LocalSubspaceSolver per coarse node """
    K = K if K is not None else assemble_stiffness(mesh, A)
    interpolator = interpolator if interpolator is not None else build_interpolator(mesh)
    with Timer(logger=getLogger(), desc='local factorizations ({} patches)'.format(mesh.coarse_node_count)):
        solvers = [LocalSubspaceSolver(mesh, K, interpolator, i) for i in range(mesh.coarse_node_count)]
    if certify:
        rng = np.random.default_rng(seed)
        for solver in solvers:
            certify_local_solver(solver, mesh, interpolator, rng)
    return solvers


def certify_local_solver(solver, mesh, interpolator, rng):
    """ A random local residual must give a solution in W inside the block of the node """
    r = np.zeros(mesh.fine_node_count)
    r[solver.local_dofs] = rng.standard_normal(solver.size)
    w = solver.project(r)
    residual = float(np.abs(interpolator.apply(w)).max())
    if residual > KERNEL_TOL * max(np.abs(w).max(), 1.0):
        raise SolverError("Local solution of node {} is not in W (|I_H w| = {:.3e})".format(solver.node, residual), residual=residual)
    assert mesh.support_squares(w) <= solver.block_squares, "local solution leaves the block of node {}".format(solver.node)


def build_schwarz_operator(mesh, A, interpolator=None, K=None, threads=1, certify=True):
    K = K if K is not None else assemble_stiffness(mesh, A)
    interpolator = interpolator if interpolator is not None else build_interpolator(mesh)
    solvers = build_local_solvers(mesh, A, interpolator, K, certify=certify)
    return SchwarzOperator(mesh, K, interpolator, solvers, threads=threads)


def apply_local_projection(op, i, residual_form):
    """ P_i v given the residual form a(v, .) """
    return FEFunction(op.solvers[i].project(_values(residual_form)), op.mesh)


def apply_P(op, residual_form):
    """ P v = sum_i P_i v given the residual form a(v, .) """
    return FEFunction(op.apply(_values(residual_form)), op.mesh)


# -------------------------------------------------------------------------------
# Spectrum
# -------------------------------------------------------------------------------

def lanczos_tridiagonal(apply, K, v0, n_iters, project=None):
    """ Lanczos with full reorthogonalization in the inner product x^T K y

    K is only semi-definite on V (constants are in its kernel), so rounding
    lets the Lanczos vectors drift along the constants, where the K-norm cannot
    see them. ``project`` maps every new vector back onto the subspace the
    iteration lives in (W for the Schwarz operator).

    :returns: (alphas, betas) of the tridiagonal matrix; fewer than n_iters
              entries when an invariant subspace is reached
    """
    project = project if project is not None else (lambda x: x)
    alphas, betas = [], []
    basis, k_basis = [], []
    v = project(v0)
    v = v / np.sqrt(v @ (K @ v))
    for _ in range(n_iters):
        kv = K @ v
        basis.append(v)
        k_basis.append(kv)
        w = apply(v)
        alphas.append(float(w @ kv))
        for _ in range(2):
            for u, ku in zip(basis, k_basis):
                w = w - (w @ ku) * u
        w = project(w)
        beta = float(np.sqrt(max(w @ (K @ w), 0.0)))
        if beta <= BREAKDOWN_TOL * max(abs(a) for a in alphas):
            break
        betas.append(beta)
        v = w / beta
    return np.array(alphas), np.array(betas[:len(alphas) - 1])


def estimate_spectrum(op, n_iters=LANCZOS_ITERS, seed=0):
    """ Ritz estimates of the extreme eigenvalues of P on W in the a inner product

    Sets and returns (K1_est, K2_est, theta, gamma_est) with
    theta = 2 / (lmin + lmax) and gamma_est = (lmax - lmin) / (lmax + lmin).
    """
    K = op.K.matrix
    dim = op.mesh.fine_node_count - op.mesh.coarse_node_count
    n_iters = min(n_iters, dim)

    def apply_in_kernel(v):
        return op.interpolator.kernel_projection(op.apply(K @ v))
    with Timer(logger=getLogger(), desc='Lanczos ({} iterations)'.format(n_iters)):
        for attempt in range(LANCZOS_RESTARTS + 1):
            v0 = op.random_kernel_vectors(1, seed=seed + attempt)[:, 0]
            alphas, betas = lanczos_tridiagonal(apply_in_kernel, K, v0, n_iters,
                                                project=op.interpolator.kernel_projection)
            if len(alphas) >= 2 or dim < 2:
                break
            getLogger().warning("Lanczos breakdown after {} step(s), restarting with seed {}".format(len(alphas), seed + attempt + 1))
        else:
            raise SolverError("Lanczos broke down after {} restarts".format(LANCZOS_RESTARTS))
    ritz = eigh_tridiagonal(alphas, betas, eigvals_only=True) if len(alphas) > 1 else alphas
    lmin, lmax = float(ritz.min()), float(ritz.max())
    if lmin <= 0:
        raise SolverError("Non-positive Ritz value {:.3e}: P is not positive definite on W".format(lmin))
    op.ritz_values = ritz
    op.spectral_bounds = (1.0 / lmin, lmax)
    op.theta = 2.0 / (lmin + lmax)
    op.gamma_est = (lmax - lmin) / (lmax + lmin)
    getLogger().info("Spectrum of P on W: [{:.6f}, {:.6f}], theta={:.6f}, gamma_est={:.6f}".format(lmin, lmax, op.theta, op.gamma_est))
    if lmax > min(MAX_OVERLAP, op.mesh.coarse_node_count) + 1e-8:
        getLogger().warning("K2_est = {:.6f} exceeds the overlap bound".format(lmax))
    return op.spectral_bounds[0], op.spectral_bounds[1], op.theta, op.gamma_est


def contraction_factor(op, count=50, seed=1):
    """ max ||(id - theta P) v||_a / ||v||_a over random v in W """
    K = op.K.matrix
    V = op.random_kernel_vectors(count, seed=seed)
    E = V - op.theta * op.apply(K @ V)
    num = np.einsum('nm,nm->m', E, K @ E)
    den = np.einsum('nm,nm->m', V, K @ V)
    return float(np.sqrt(num / den).max())


def symmetry_defect(op, count=10, seed=2):
    """ max |a(Pv, w) - a(v, Pw)| / (||v||_a ||w||_a) over random pairs in W """
    K = op.K.matrix
    V = op.random_kernel_vectors(2 * count, seed=seed)
    PV = op.apply(K @ V)
    worst = 0.0
    for k in range(count):
        v, w = V[:, 2 * k], V[:, 2 * k + 1]
        pv, pw = PV[:, 2 * k], PV[:, 2 * k + 1]
        norm = np.sqrt((v @ (K @ v)) * (w @ (K @ w)))
        worst = max(worst, abs(pv @ (K @ w) - v @ (K @ pw)) / norm)
    return float(worst)


# -------------------------------------------------------------------------------
# Localized correctors
# -------------------------------------------------------------------------------

class LocalizedCorrectors(object):
    """ Richardson iterates q^ell for a block of right-hand sides

    ``columns`` holds one key per column, (Q, j) for the square correctors. Only the
    last level is kept unless the iteration ran with keep_history=True.
    """

    def __init__(self, mesh, columns, ell_max, q, history=None, supports=None, tensors=None):
        self.mesh = mesh
        self.columns = list(columns)
        self.ell_max = ell_max
        self.q = q
        self.history = history or {}
        self.supports = supports or {}
        self.tensors = tensors or {}

    def level(self, ell):
        if ell == self.ell_max:
            return self.q
        if ell not in self.history:
            raise KeyError("Level {} was not kept".format(ell))
        return self.history[ell]

    def column(self, key, ell=None):
        ell = self.ell_max if ell is None else ell
        return FEFunction(self.level(ell)[:, self.columns.index(key)], self.mesh)

    def get(self, Q, j, ell=None):
        return self.column((Q, j), ell)

    def support(self, key, ell=None):
        ell = self.ell_max if ell is None else ell
        return self.supports[ell][self.columns.index(key)]


def all_columns(mesh):
    return [(Q, j) for Q in range(mesh.square_count) for j in (1, 2)]


def _check_support(mesh, columns, origins, q, ell):
    radius = support_radius(ell)
    supports = []
    for c, key in enumerate(columns):
        support = mesh.support_squares(q[:, c])
        allowed = set().union(*(mesh.square_neighborhood(S, radius) for S in origins[c]))
        assert support <= allowed, "support of column {} at level {} leaves the {}-neighbourhood".format(key, ell, radius)
        supports.append(support)
    return supports


def iterate_correctors(op, F, columns, ell_max, A=None, keep_history=False, callback=None, origins=None):
    """ q^{ell+1} = q^ell + theta P(F - K q^ell) from q^0 = 0, for all columns of F at once

    :param origins: per column, the squares holding the support of its form (default {Q} for (Q, j) keys)
    :param callback: called as callback(ell, q) after every level
    """
    if not op.estimated:
        raise CertificationError("Estimate the spectrum before iterating")
    if ell_max < 0:
        raise ValueError("ell_max must be non-negative")
    mesh = op.mesh
    F = np.asarray(F.toarray() if sp.issparse(F) else F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    origins = origins if origins is not None else [{key[0]} for key in columns]
    q = np.zeros_like(F)
    history, supports, tensors = {}, {}, {}

    def record(ell):
        supports[ell] = _check_support(mesh, columns, origins, q, ell)
        if keep_history and ell < ell_max:
            history[ell] = q.copy()
        if A is not None and len(columns) == 2 * mesh.square_count:
            tensors[ell] = corrector_tensor(mesh, A, q, kind='localized', ell=ell)
        if callback is not None:
            callback(ell, q)
    record(0)
    for ell in range(1, ell_max + 1):
        q = q + op.theta * op.apply(F - op.K.matrix @ q)
        record(ell)
        getLogger().debug("Richardson level {} done".format(ell))
    return LocalizedCorrectors(mesh, columns, ell_max, q, history, supports, tensors)


def iterate_all_correctors(op, A, ell_max, keep_history=False, callback=None):
    """ q^ell_{Q,j} for every square and direction, with the tensor A_H^ell at each level """
    F = assemble_flux_loads(op.mesh, A)
    with Timer(logger=getLogger(), desc='localized correctors up to level {}'.format(ell_max)):
        return iterate_correctors(op, F, all_columns(op.mesh), ell_max, A=A, keep_history=keep_history, callback=callback)


def iterate_localized_corrector(op, Q, j, ell_max, A, mesh=None, keep_history=False):
    """ q^ell_{Q,j} for one square and direction """
    mesh = mesh if mesh is not None else op.mesh
    F = assemble_flux_loads(mesh, A)[:, 2 * Q + j - 1]
    return iterate_correctors(op, F, [(Q, j)], ell_max, keep_history=keep_history)


def localized_tensor(mesh, A, correctors, ell=None):
    """ A_H^ell from the correctors at level ell (all squares and directions) """
    ell = correctors.ell_max if ell is None else ell
    return corrector_tensor(mesh, A, correctors.level(ell), kind='localized', ell=ell)


# -------------------------------------------------------------------------------
# Decay
# -------------------------------------------------------------------------------

def fit_decay(errors, floor=DECAY_FLOOR):
    """ Ratio gamma_fit of the log-linear fit of e(ell) over ell >= 1 above the floor """
    ells = [ell for ell, e in enumerate(errors) if ell >= 1 and e > floor]
    if len(ells) < 2:
        return float('nan')
    slope = np.polyfit(ells, np.log([errors[ell] for ell in ells]), 1)[0]
    return float(np.exp(slope))


def decay_table(op, A, A_inf, ell_max):
    """ e(ell) = max_Q |A_H^inf - A_H^ell|_max for ell = 0..ell_max """
    correctors = iterate_all_correctors(op, A, ell_max)
    errors = [A_inf.max_entry_difference(correctors.tensors[ell]) for ell in range(ell_max + 1)]
    return errors, correctors


def localization_constant(gamma):
    """ c_ell = ceil(log 2 / |log gamma|) """
    if not 0 < gamma < 1:
        raise CertificationError("gamma_est = {} is not in (0, 1)".format(gamma))
    return max(1, int(math.ceil(math.log(2) / abs(math.log(gamma)))))


def localization_level(n_coarse, c_ell):
    """ ell(H) = ceil(log2(1 / H)) * c_ell """
    return int(math.ceil(math.log2(n_coarse))) * c_ell


class LocalizationReport(object):

    def __init__(self, rows, c_ell):
        self.rows = rows
        self.c_ell = c_ell

    @property
    def ratios(self):
        return [row['ratio'] for row in self.rows]

    @property
    def certified(self):
        ratios = self.ratios
        return all(np.isfinite(ratios)) and max(ratios) <= RATIO_GROWTH_TOL * max(ratios[0], DECAY_FLOOR)

    def to_dict(self):
        return {'c_ell': self.c_ell, 'certified': self.certified, 'rows': self.rows}


def check_proposition2(spec, n_coarse_list, n_eps, n_fine, tol=DEFAULT_TOL, n_iters=LANCZOS_ITERS, threads=1,
                       c_ell=None, extra_levels=0, seed=0, ell=None):
    """ e(ell(H)) / H over a list of coarse meshes

    :param c_ell: localization constant; calibrated from gamma_est on the first mesh when None
    :param ell: a fixed localization level for every H instead of ell(H)
    :param extra_levels: iterate this many levels past ell(H) so that the decay tables show the floor
    :returns: LocalizationReport whose rows also hold the full table e(0), ..., e(ell_max)
    """
    rows = []
    for n_coarse in n_coarse_list:
        mesh = build_mesh_hierarchy(n_coarse, n_eps, n_fine)
        A = generate_coefficient(spec, mesh)
        interpolator = build_interpolator(mesh)
        K = assemble_stiffness(mesh, A)
        op = build_schwarz_operator(mesh, A, interpolator, K, threads=threads)
        estimate_spectrum(op, n_iters=n_iters, seed=seed)
        if op.gamma_est >= 1:
            raise CertificationError("gamma_est = {:.6f} >= 1 on {}".format(op.gamma_est, mesh))
        if c_ell is None:
            c_ell = localization_constant(op.gamma_est)
        level = localization_level(n_coarse, c_ell) if ell is None else ell
        A_inf = ideal_tensor(mesh, A, solve_ideal_correctors(mesh, A, interpolator, tol=tol, threads=threads, K=K))
        errors, _ = decay_table(op, A, A_inf, level + extra_levels)
        rows.append({'H': mesh.H, 'ell': level, 'error': errors[level], 'ratio': errors[level] / mesh.H,
                     'gamma_est': op.gamma_est, 'gamma_fit': fit_decay(errors), 'errors': errors})
        getLogger().info("H=1/{}: ell={}, e={:.3e}, e/H={:.3e}".format(n_coarse, level, errors[level], errors[level] / mesh.H))
    return LocalizationReport(rows, c_ell)
