# -*- coding: utf-8 -*-

"""
Coefficient fields: periodic test coefficients A_eps(x) = A_1(x / eps) and rough random fields

Coefficients are piecewise constant on the fine triangles, one symmetric 2x2
matrix per triangle, so every finite element integral is exact with a
one-point rule.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import logging

import numpy as np

from .errors import AdmissibilityError, EllipticityError


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


SYMMETRY_TOL = 1e-12
PERIODIC_KINDS = ('constant', 'laminate', 'checkerboard', 'trig')
# kinds whose microstructure switches at half a period
HALF_PERIOD_KINDS = ('laminate', 'checkerboard')
KIND_PARAMS = {
    'constant': {'c': 1.0},
    'laminate': {'a_minus': 1.0, 'a_plus': 4.0, 'axis': 1},
    'checkerboard': {'a': 1.0, 'b': 4.0},
    'trig': {'amplitude': 0.5, 'mean': 1.0},
    'random_field': {'seed': 7, 'contrast': 10.0},
}


# -------------------------------------------------------------------------------
# Data structures
# -------------------------------------------------------------------------------

class CoefficientSpec(object):
    """ Recipe of a coefficient field

    >>> CoefficientSpec('laminate', a_minus=1, a_plus=4, axis=1)
    CoefficientSpec('laminate', a_minus=1.0, a_plus=4.0, axis=1)
    """

    def __init__(self, kind, n_eps=None, **params):
        if kind not in KIND_PARAMS:
            raise AdmissibilityError("Unknown coefficient kind: {} (expected one of {})".format(kind, ', '.join(KIND_PARAMS)))
        unknown = set(params) - set(KIND_PARAMS[kind])
        if unknown:
            raise AdmissibilityError("Unknown parameters for {}: {}".format(kind, ', '.join(sorted(unknown))))
        self.kind = kind
        self.n_eps = int(n_eps) if n_eps else None
        self.params = {}
        for key, default in KIND_PARAMS[kind].items():
            value = params.get(key, default)
            try:
                self.params[key] = int(value) if isinstance(default, int) else float(value)
            except (TypeError, ValueError):
                raise AdmissibilityError("Invalid value for {}.{}: {}".format(kind, key, repr(value)))
        self.__check_parameters()

    @property
    def periodic(self):
        return self.kind in PERIODIC_KINDS

    def __check_parameters(self):
        p = self.params
        if self.kind == 'constant' and p['c'] <= 0:
            raise EllipticityError("constant(c) needs c > 0 (got {})".format(p['c']))
        elif self.kind == 'laminate':
            if min(p['a_minus'], p['a_plus']) <= 0:
                raise EllipticityError("laminate values must be positive")
            if p['axis'] not in (1, 2):
                raise AdmissibilityError("laminate axis must be 1 or 2 (got {})".format(p['axis']))
        elif self.kind == 'checkerboard' and min(p['a'], p['b']) <= 0:
            raise EllipticityError("checkerboard values must be positive")
        elif self.kind == 'trig' and abs(p['amplitude']) >= p['mean']:
            raise EllipticityError("trig needs |amplitude| < mean")
        elif self.kind == 'random_field' and p['contrast'] < 1:
            raise EllipticityError("random_field contrast must be >= 1")

    def to_dict(self):
        a_dict = {'kind': self.kind}
        a_dict.update(self.params)
        if self.n_eps:
            a_dict['n_eps'] = self.n_eps
        return a_dict

    @staticmethod
    def from_dict(a_dict):
        a_dict = dict(a_dict)
        kind = a_dict.pop('kind')
        return CoefficientSpec(kind, **a_dict)

    def __eq__(self, other):
        return isinstance(other, CoefficientSpec) and self.to_dict() == other.to_dict()

    def __repr__(self):
        args = ', '.join('{}={}'.format(k, repr(v)) for k, v in self.params.items())
        return "CoefficientSpec({}, {})".format(repr(self.kind), args)


class CoefficientField(object):
    """ One symmetric 2x2 matrix per fine triangle together with its ellipticity bounds """

    def __init__(self, matrices, alpha=None, beta=None, spec=None):
        self.matrices = np.ascontiguousarray(matrices, dtype=float)
        if self.matrices.ndim != 3 or self.matrices.shape[1:] != (2, 2):
            raise AdmissibilityError("Coefficient matrices must have shape (n, 2, 2)")
        self.spec = spec
        if alpha is None or beta is None:
            alpha, beta = validate_ellipticity(self)
        self.alpha = alpha
        self.beta = beta

    def __len__(self):
        return len(self.matrices)

    @property
    def contrast(self):
        return self.beta / self.alpha

    def scaled(self, factor):
        """ The field factor * A """
        return CoefficientField(self.matrices * factor, self.alpha * factor, self.beta * factor, spec=self.spec)

    def __repr__(self):
        return "CoefficientField(n={}, alpha={:.6g}, beta={:.6g})".format(len(self), self.alpha, self.beta)


# -------------------------------------------------------------------------------
# Functions
# -------------------------------------------------------------------------------

def validate_ellipticity(field):
    """ Return (alpha, beta), the extreme eigenvalues over all cells """
    A = field.matrices
    scale = max(np.abs(A).max(), 1.0)
    asym = np.abs(A[:, 0, 1] - A[:, 1, 0]).max() if len(A) else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise EllipticityError("Coefficient is not symmetric (max |A12 - A21| = {:.3e})".format(asym))
    eig = np.linalg.eigvalsh(A)
    alpha, beta = float(eig.min()), float(eig.max())
    if alpha <= 0:
        raise EllipticityError("Coefficient is not positive definite (min eigenvalue {:.3e})".format(alpha))
    return alpha, beta


def scalar_field(values):
    """ Field of the matrices a * I for an array of cell values a """
    values = np.asarray(values, dtype=float)
    matrices = np.zeros((len(values), 2, 2))
    matrices[:, 0, 0] = values
    matrices[:, 1, 1] = values
    return matrices


def constant_field(mesh, matrix):
    """ The constant field A(x) = matrix on the fine triangles of mesh """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 0:
        matrix = matrix * np.eye(2)
    matrix = 0.5 * (matrix + matrix.T)
    return CoefficientField(np.broadcast_to(matrix, (len(mesh.fine_triangles), 2, 2)))


def _periodic_values(spec, y):
    """ Scalar cell values of a periodic kind at points y given in period units """
    p = spec.params
    frac = y - np.floor(y)
    if spec.kind == 'constant':
        return np.full(len(y), p['c'])
    elif spec.kind == 'laminate':
        coord = frac[:, p['axis'] - 1]
        return np.where(coord < 0.5, p['a_minus'], p['a_plus'])
    elif spec.kind == 'checkerboard':
        parity = (np.floor(2 * frac[:, 0]) + np.floor(2 * frac[:, 1])) % 2
        return np.where(parity == 0, p['a'], p['b'])
    else:
        return p['mean'] + p['amplitude'] * np.sin(2 * np.pi * y[:, 0]) * np.cos(2 * np.pi * y[:, 1])


def _random_values(spec, count):
    """ Log-uniform values in [1, contrast], keyed by (seed, cell index) """
    rng = np.random.Generator(np.random.Philox(key=spec.params['seed']))
    u = rng.random(count)
    return np.exp(u * np.log(spec.params['contrast']))


def _sample(spec, mesh, n_eps):
    if spec.kind in HALF_PERIOD_KINDS:
        cells_per_period = mesh.n_fine // n_eps
        if mesh.n_fine % n_eps or cells_per_period % 2:
            raise AdmissibilityError("{} needs an even number of fine cells per period (N_h/N_eps = {}/{})".format(spec.kind, mesh.n_fine, n_eps))
    if spec.periodic:
        values = _periodic_values(spec, mesh.fine_barycenters() * n_eps)
    else:
        values = _random_values(spec, len(mesh.fine_triangles))
    return CoefficientField(scalar_field(values), spec=spec)


def generate_coefficient(spec, mesh):
    """ Sample the coefficient described by spec on the fine triangles of mesh """
    if spec.periodic and spec.n_eps and spec.n_eps != mesh.n_eps:
        raise AdmissibilityError("Coefficient period 1/{} does not match the mesh period 1/{}".format(spec.n_eps, mesh.n_eps))
    field = _sample(spec, mesh, mesh.n_eps)
    getLogger().debug("Generated {} for {}".format(field, spec))
    return field


def generate_unit_cell(spec, unit_mesh):
    """ Sample the unit-cell coefficient A_1 on a unit-cell mesh (eps = 1) """
    if not spec.periodic:
        raise AdmissibilityError("{} has no unit cell".format(spec.kind))
    return _sample(spec, unit_mesh, 1)
