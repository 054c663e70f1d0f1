# -*- coding: utf-8 -*-

"""
Exceptions raised by ddhom
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.


class DDHomError(Exception):
    """ Base class of all ddhom errors """

    exit_code = 1


class AdmissibilityError(DDHomError, ValueError):
    """ Mesh ratios, index ranges, microstructure resolution or config values are not admissible """

    exit_code = 2


class EllipticityError(DDHomError, ValueError):
    """ A coefficient matrix is not symmetric or not positive definite """

    exit_code = 2


class SolverError(DDHomError):
    """ An iterative or direct solve failed """

    exit_code = 3

    def __init__(self, msg, residual=None, iterations=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class CertificationError(DDHomError):
    """ A numerical claim could not be certified (e.g. contraction factor >= 1) """

    exit_code = 4
