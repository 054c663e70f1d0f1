# -*- coding: utf-8 -*-

'''
ddhom - Effective tensors of periodic elliptic problems by cell problems,
kernel correctors and additive Schwarz localization
'''

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

########################################################################

from .__version__ import __author__, __email__, __copyright__, __maintainer__
from .__version__ import __credits__, __license__, __description__, __url__
from .__version__ import __version_major__, __version_long__, __version__, __status__

from .errors import DDHomError, AdmissibilityError, EllipticityError, SolverError, CertificationError
from .mesh import MeshHierarchy, build_mesh_hierarchy, build_unit_cell_mesh
from .coefficient import CoefficientSpec, CoefficientField, generate_coefficient, generate_unit_cell
from .fem import FEFunction, assemble_stiffness, assemble_load, solve_mean_zero, l2_error, energy_error
from .interpolation import QuasiInterpolator, build_interpolator
from .homogenization import EffectiveTensor, classical_tensor, extrapolated_tensor, solve_cell_problems
from .homogenization import solve_ideal_correctors, ideal_tensor
from .schwarz import build_schwarz_operator, estimate_spectrum, iterate_all_correctors
from .lod import build_multiscale_basis, lod_solve
from .config import ExperimentConfig, AppConfig
from .util import Timer, TextReport

__all__ = ["DDHomError", "AdmissibilityError", "EllipticityError", "SolverError", "CertificationError",
           "MeshHierarchy", "build_mesh_hierarchy", "build_unit_cell_mesh",
           "CoefficientSpec", "CoefficientField", "generate_coefficient", "generate_unit_cell",
           "FEFunction", "assemble_stiffness", "assemble_load", "solve_mean_zero", "l2_error", "energy_error",
           "QuasiInterpolator", "build_interpolator",
           "EffectiveTensor", "classical_tensor", "extrapolated_tensor", "solve_cell_problems",
           "solve_ideal_correctors", "ideal_tensor",
           "build_schwarz_operator", "estimate_spectrum", "iterate_all_correctors",
           "build_multiscale_basis", "lod_solve",
           "ExperimentConfig", "AppConfig", "Timer", "TextReport",
           "__version__", "__author__", "__description__", "__copyright__"]
