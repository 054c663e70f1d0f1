# -*- coding: utf-8 -*-

"""
Experiment configuration

A config is an INI file (or a JSON file with the same nested tables)::

    [experiment]
    name = prop1

    [mesh]
    n_coarse = 4
    n_eps = 16
    n_fine = 128

    [coefficient]
    kind = laminate
    a_minus = 1.0
    a_plus = 4.0

Mesh entries are comma separated lists; lists of length one are broadcast so
that a sweep over one size keeps the others fixed. Every key that is not
given takes the default listed in :data:`SCHEMA`.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import os
import json
import math
import logging
import configparser
from collections import OrderedDict

import numpy as np

from .errors import AdmissibilityError
from .mesh import check_hierarchy
from .coefficient import CoefficientSpec, KIND_PARAMS
from .chio import read_file, config_hash
from .util import FileHelper


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


EXPERIMENTS = ('prop1', 'decay', 'hom-error', 'lod')
ELL_RULES = ('fixed', 'ceil-log2-H')
OUTPUT_FORMATS = ('csv', 'json', 'both')
# experiments that need the classical tensor, hence a unit cell
CELL_EXPERIMENTS = ('prop1', 'hom-error')


def _sine(x1, x2):
    return np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)


def _bump(x1, x2):
    r2 = (x1 - 0.5) ** 2 + (x2 - 0.5) ** 2
    return np.exp(-r2 / 0.02)


def _indicator(x1, x2):
    inside = (np.abs(x1 - 0.5) < 0.25) & (np.abs(x2 - 0.5) < 0.25)
    return inside.astype(float)


# right-hand sides f(x1, x2); loads are centred on assembly
RHS_CATALOG = OrderedDict([('sine', _sine), ('bump', _bump), ('indicator', _indicator)])


class Option(object):
    """ One typed config key """

    def __init__(self, key, kind, default, help=''):
        self.key = key
        self.kind = kind
        self.default = default
        self.help = help

    def parse(self, value):
        try:
            if self.kind == 'ints':
                if isinstance(value, str):
                    value = [v for v in value.replace(',', ' ').split()]
                elif not isinstance(value, (list, tuple)):
                    value = [value]
                return [_to_int(v) for v in value]
            elif self.kind == 'int':
                return _to_int(value)
            elif self.kind == 'float':
                return float(value)
            elif self.kind == 'bool':
                if isinstance(value, str):
                    if value.strip().lower() not in configparser.ConfigParser.BOOLEAN_STATES:
                        raise ValueError(value)
                    return configparser.ConfigParser.BOOLEAN_STATES[value.strip().lower()]
                return bool(value)
            return str(value)
        except (TypeError, ValueError):
            raise AdmissibilityError("Invalid value for {} ({}): {}".format(self.key, self.kind, repr(value)))

    def format(self, value):
        if self.kind == 'ints':
            return ', '.join(str(v) for v in value)
        elif self.kind == 'float':
            return repr(float(value))
        elif self.kind == 'bool':
            return 'true' if value else 'false'
        return str(value)


def _to_int(value):
    number = float(value)
    if number != int(number):
        raise ValueError(value)
    return int(number)


SCHEMA = OrderedDict([
    ('experiment', [Option('name', 'str', 'prop1', 'one of {}'.format(', '.join(EXPERIMENTS))),
                    Option('seed', 'int', 0, 'seed of the Lanczos start vectors'),
                    Option('description', 'str', '', 'free text copied to the report')]),
    ('mesh', [Option('n_coarse', 'ints', [4], 'N_H = 1/H, a list for H sweeps'),
              Option('n_eps', 'ints', [16], 'N_eps = 1/eps, a list for eps sweeps'),
              Option('n_fine', 'ints', [128], 'N_h = 1/h'),
              Option('fine_per_eps', 'int', 0, 'when > 0, N_h = fine_per_eps * N_eps (overrides n_fine)'),
              Option('allow_inadmissible', 'bool', False, 'prop1 only: let H be a non-multiple of eps (negative control)')]),
    ('solver', [Option('tol_corrector', 'float', 1e-10, 'relative residual of corrector and cell solves'),
                Option('tol_reference', 'float', 1e-8, 'relative residual of fine reference solves'),
                Option('max_iters', 'int', 0, 'CG iteration cap, 0 for 10 N'),
                Option('lanczos_iters', 'int', 80, 'Lanczos steps for the spectrum of P')]),
    ('localization', [Option('ell_rule', 'str', 'ceil-log2-H', 'fixed or ceil-log2-H'),
                      Option('ell', 'int', 2, 'level for the fixed rule'),
                      Option('c_ell', 'int', 0, 'ell(H) = ceil(log2(1/H)) * c_ell; 0 calibrates it from gamma_est (decay) or uses 1 (lod)'),
                      Option('extra_levels', 'int', 2, 'decay only: levels iterated past ell(H)')]),
    ('rhs', [Option('name', 'str', 'sine', 'one of {}'.format(', '.join(RHS_CATALOG))),
             Option('scale', 'float', 1.0, 'f is scale times the catalog function')]),
    ('output', [Option('path', 'str', 'results', 'output directory'),
                Option('format', 'str', 'both', 'csv, json or both'),
                Option('prefix', 'str', '', 'file name prefix, the experiment name when empty'),
                Option('plot', 'bool', False, 'write PNG plots when matplotlib is available')]),
])
SECTIONS = tuple(SCHEMA) + ('coefficient',)


# -------------------------------------------------------------------------------
# App config locator
# -------------------------------------------------------------------------------

class AppConfig(object):

    """ Application Configuration Helper
This class supports guessing configuration file location, and reads either INI (default) or JSON format.
    """
    JSON = 'json'
    INI = 'ini'
    LOC_TEMPLATE = ['{wd}/.{n}.{mode}', '{wd}/{n}.{mode}',
                    '{wd}/config/{n}.{mode}', '{wd}/config/.{n}.{mode}',
                    '~/.{n}/config.{mode}', '~/.config/{n}/config.{mode}',
                    '~/.config/{n}/{n}.{mode}']

    def __init__(self, name='ddhom', mode=INI, working_dir='.', extra_potentials=None):
        self.__name = name
        self.__mode = mode
        self.working_dir = working_dir
        self.__potential = []
        if extra_potentials:
            self.add_potential(*extra_potentials)
        self.add_potential(*AppConfig.LOC_TEMPLATE)
        self.__config = None
        self.__config_path = None

    @property
    def config_path(self):
        """ Path to config file """
        return self.__config_path

    def potentials(self):
        return self.__potential

    def add_potential(self, *patterns):
        """ Add a potential config file pattern """
        for ptn in patterns:
            _p = ptn.format(wd=self.working_dir, n=self.__name, mode=self.__mode)
            self.__potential.append(_p)

    def locate_config(self):
        """ Locate config file """
        for f in self.__potential:
            f = FileHelper.abspath(f)
            if os.path.isfile(f):
                return f
        return None

    @property
    def config(self):
        """ Read config automatically if required """
        if self.__config is None:
            config_path = self.locate_config()
            if config_path:
                self.__config = ExperimentConfig.from_file(config_path)
                self.__config_path = config_path
        return self.__config

    def load(self, file_path):
        """ Load configuration from a specific file """
        self.clear()
        self.__config = ExperimentConfig.from_file(file_path)
        self.__config_path = file_path
        return self.__config

    def clear(self):
        self.__config = None
        self.__config_path = None
        return self


# -------------------------------------------------------------------------------
# Experiment config
# -------------------------------------------------------------------------------

class ExperimentConfig(object):
    """ Typed experiment configuration with a lossless INI round trip """

    def __init__(self, values=None, coefficient=None, source=None):
        self.values = OrderedDict((section, OrderedDict((opt.key, list(opt.default) if isinstance(opt.default, list) else opt.default)
                                                   for opt in options))
                                  for section, options in SCHEMA.items())
        for section, entries in (values or {}).items():
            for key, value in entries.items():
                self.values[section][key] = value
        self.coefficient = coefficient if coefficient is not None else CoefficientSpec('constant')
        self.source = source

    # ---- access --------------------------------------------------------------

    def __getitem__(self, section):
        return self.values[section]

    @property
    def name(self):
        return self.values['experiment']['name']

    @property
    def prefix(self):
        return self.values['output']['prefix'] or self.name

    def rhs(self):
        """ The right-hand side f(x1, x2) """
        f = RHS_CATALOG[self.values['rhs']['name']]
        scale = self.values['rhs']['scale']
        return lambda x1, x2: scale * f(x1, x2)

    def mesh_triples(self):
        """ [(N_H, N_eps, N_h)], mesh lists broadcast to a common length """
        mesh = self.values['mesh']
        lists = [mesh['n_coarse'], mesh['n_eps'], mesh['n_fine']]
        length = max(len(v) for v in lists)
        for key, v in zip(('n_coarse', 'n_eps', 'n_fine'), lists):
            if len(v) not in (1, length):
                raise AdmissibilityError("mesh.{} has {} entries, expected 1 or {}".format(key, len(v), length))
        n_coarse, n_eps, n_fine = [v * length if len(v) == 1 else v for v in lists]
        if mesh['fine_per_eps'] > 0:
            n_fine = [mesh['fine_per_eps'] * e for e in n_eps]
        return list(zip(n_coarse, n_eps, n_fine))

    def strict(self):
        return not self.values['mesh']['allow_inadmissible']

    # ---- validation ----------------------------------------------------------

    def validate(self):
        """ Check every value and every mesh triple before anything is solved """
        if self.name not in EXPERIMENTS:
            raise AdmissibilityError("Unknown experiment: {} (expected one of {})".format(self.name, ', '.join(EXPERIMENTS)))
        loc = self.values['localization']
        if loc['ell_rule'] not in ELL_RULES:
            raise AdmissibilityError("Unknown ell_rule: {} (expected one of {})".format(loc['ell_rule'], ', '.join(ELL_RULES)))
        if loc['ell'] < 0 or loc['c_ell'] < 0 or loc['extra_levels'] < 0:
            raise AdmissibilityError("Localization levels must be non-negative")
        if self.values['rhs']['name'] not in RHS_CATALOG:
            raise AdmissibilityError("Unknown rhs: {} (expected one of {})".format(self.values['rhs']['name'], ', '.join(RHS_CATALOG)))
        if self.values['output']['format'] not in OUTPUT_FORMATS:
            raise AdmissibilityError("Unknown output format: {}".format(self.values['output']['format']))
        solver = self.values['solver']
        if not (0 < solver['tol_corrector'] < 1 and 0 < solver['tol_reference'] < 1):
            raise AdmissibilityError("Solver tolerances must lie in (0, 1)")
        if solver['max_iters'] < 0 or solver['lanczos_iters'] < 2:
            raise AdmissibilityError("max_iters must be >= 0 and lanczos_iters >= 2")
        if not self.strict() and self.name != 'prop1':
            raise AdmissibilityError("allow_inadmissible is only meaningful for prop1")
        if self.name in CELL_EXPERIMENTS and not self.coefficient.periodic:
            raise AdmissibilityError("{} needs a periodic coefficient, {} has no unit cell".format(self.name, self.coefficient.kind))
        triples = self.mesh_triples()
        for n_coarse, n_eps, n_fine in triples:
            check_hierarchy(n_coarse, n_eps, n_fine, strict=self.strict())
            if self.coefficient.kind in ('laminate', 'checkerboard') and (n_fine // n_eps) % 2:
                raise AdmissibilityError("{} needs an even N_h/N_eps (got {}/{})".format(self.coefficient.kind, n_fine, n_eps))
        if self.name == 'hom-error' and len({t[1] for t in triples}) < 2:
            raise AdmissibilityError("hom-error needs at least two values of n_eps")
        if self.name in ('decay', 'lod') and len({t[1:] for t in triples}) > 1:
            raise AdmissibilityError("{} sweeps H on one fine mesh, n_eps and n_fine must be single values".format(self.name))
        getLogger().debug("Config {} is valid: {} mesh triple(s)".format(self.source or self.name, len(triples)))
        return self

    # ---- serialization -------------------------------------------------------

    def to_dict(self):
        data = OrderedDict((section, OrderedDict(entries)) for section, entries in self.values.items())
        data['coefficient'] = OrderedDict(self.coefficient.to_dict())
        return data

    @staticmethod
    def from_dict(data, source=None):
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise AdmissibilityError("Unknown config section(s): {}".format(', '.join(sorted(unknown))))
        values = {}
        for section, options in SCHEMA.items():
            entries = dict(data.get(section) or {})
            by_key = {opt.key: opt for opt in options}
            extra = set(entries) - set(by_key)
            if extra:
                raise AdmissibilityError("Unknown key(s) in [{}]: {}".format(section, ', '.join(sorted(extra))))
            values[section] = {key: by_key[key].parse(value) for key, value in entries.items()}
        coefficient = dict(data.get('coefficient') or {'kind': 'constant'})
        if 'kind' not in coefficient:
            raise AdmissibilityError("[coefficient] needs a kind (one of {})".format(', '.join(KIND_PARAMS)))
        if 'n_eps' in coefficient:
            raise AdmissibilityError("The coefficient period is set by mesh.n_eps")
        return ExperimentConfig(values, CoefficientSpec.from_dict(coefficient), source=source)

    def to_ini(self):
        """ Canonical INI text: every key, schema order, floats in repr() """
        lines = []
        for section, options in SCHEMA.items():
            lines.append('[{}]'.format(section))
            for opt in options:
                lines.append('{} = {}'.format(opt.key, opt.format(self.values[section][opt.key])))
            lines.append('')
            if section == 'mesh':
                lines.append('[coefficient]')
                for key, value in self.coefficient.to_dict().items():
                    lines.append('{} = {}'.format(key, repr(value) if isinstance(value, float) else value))
                lines.append('')
        return '\n'.join(lines)

    @staticmethod
    def from_ini(text, source=None):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=source or '<string>')
        except configparser.Error as e:
            raise AdmissibilityError("Could not parse config: {}".format(e))
        return ExperimentConfig.from_dict({s: dict(parser[s]) for s in parser.sections()}, source=source)

    @staticmethod
    def from_file(path):
        """ Read an INI or (for .json paths) a JSON config """
        text = read_file(path)
        if str(path).endswith('.json'):
            try:
                return ExperimentConfig.from_dict(json.loads(text), source=path)
            except ValueError as e:
                if isinstance(e, AdmissibilityError):
                    raise
                raise AdmissibilityError("Could not parse JSON config {}: {}".format(path, e))
        return ExperimentConfig.from_ini(text, source=path)

    def sha256(self):
        return config_hash(self.to_ini())

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return "ExperimentConfig({}, {})".format(self.name, self.coefficient)


def ell_for(config, n_coarse, c_ell=None):
    """ Localization level for a coarse mesh under the configured rule """
    loc = config['localization']
    if loc['ell_rule'] == 'fixed':
        return loc['ell']
    c_ell = c_ell or loc['c_ell'] or 1
    return int(math.ceil(math.log2(n_coarse))) * c_ell


def describe_schema(print_out=print):
    """ Print every section, key, type and default """
    for section, options in SCHEMA.items():
        print_out('[{}]'.format(section))
        for opt in options:
            print_out('  {} ({}) = {}: {}'.format(opt.key, opt.kind, opt.format(opt.default), opt.help))
    print_out('[coefficient]')
    for kind, params in KIND_PARAMS.items():
        print_out('  kind = {}: {}'.format(kind, ', '.join('{}={}'.format(k, v) for k, v in params.items()) or '-'))
