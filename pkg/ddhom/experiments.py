# -*- coding: utf-8 -*-

"""
Experiment drivers: A_0 vs A_H^inf equivalence check, localization decay, homogenization error sweep, LOD convergence

Every driver takes a validated :class:`ddhom.config.ExperimentConfig` and
returns an :class:`ExperimentResult`; :func:`run_and_write` adds the CSV /
JSON / PNG artifacts and turns failed certifications into a
:class:`ddhom.errors.CertificationError` once everything has been written.
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import os
import math
import logging
from collections import OrderedDict

import numpy as np

from .errors import CertificationError
from .mesh import build_mesh_hierarchy, build_unit_cell_mesh
from .coefficient import generate_coefficient, generate_unit_cell
from .fem import assemble_stiffness, energy_error, l2_error, solve_homogenized, solve_model_problem
from .interpolation import build_interpolator
from .homogenization import check_proposition1, classical_tensor, solve_cell_problems
from .schwarz import build_schwarz_operator, check_proposition2, estimate_spectrum
from .lod import build_basis_correctors, build_multiscale_basis, lod_errors, reference_solution, solve_p1_coarse
from .config import ExperimentConfig, ell_for
from .chio import write_csv, write_json, report_metadata
from .util import Timer, FileHelper


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


GAMMA_FIT_SLACK = 0.1
# observed rate of ||u_eps - u_0|| in eps
HOM_RATE_RANGE = (0.75, 1.1)
# below this every error counts as exact (constant coefficients)
HOM_ERROR_FLOOR = 1e-9
LOD_MIN_RATE = 0.8
P1_MAX_RATE = 0.4
FIELDS = {'prop1': ['N_H', 'N_eps', 'N_h', 'max_entry_diff', 'per_square_spread', 'precondition_met', 'certified',
                    'a0_11', 'a0_12', 'a0_22'],
          'decay': ['H', 'ell', 'error', 'gamma_fit'],
          'hom-error': ['eps', 'l2_error', 'rate'],
          'lod': ['H', 'ell', 'energy_error', 'l2_error', 'p1_baseline_error']}


class ExperimentResult(object):
    """ Table rows of an experiment, its summary and the certification failures """

    def __init__(self, name, rows, summary=None, failures=None):
        self.name = name
        self.fieldnames = FIELDS[name]
        self.rows = rows
        self.summary = summary or OrderedDict()
        self.failures = failures or []
        self.wall_times = OrderedDict()
        self.paths = []

    @property
    def certified(self):
        return not self.failures

    def to_dict(self):
        return {'experiment': self.name,
                'rows': self.rows,
                'summary': self.summary,
                'failures': self.failures}

    def __repr__(self):
        return "ExperimentResult({}, rows={}, failures={})".format(self.name, len(self.rows), len(self.failures))


def _log_rate(errors, sizes):
    """ Slope of log(error) against log(size), NaN with fewer than two positive errors """
    pairs = [(s, e) for s, e in zip(sizes, errors) if e > 0]
    if len(pairs) < 2:
        return float('nan')
    s, e = zip(*pairs)
    return float(np.polyfit(np.log(s), np.log(e), 1)[0])


# -------------------------------------------------------------------------------
# Drivers
# -------------------------------------------------------------------------------

def run_prop1(config, threads=1):
    """ A_0 from the cell problems against A_H^inf from the kernel correctors, per mesh triple """
    solver = config['solver']
    rows, failures = [], []
    reports = []
    for n_coarse, n_eps, n_fine in config.mesh_triples():
        mesh = build_mesh_hierarchy(n_coarse, n_eps, n_fine, strict=config.strict())
        report = check_proposition1(config.coefficient, mesh, tol=solver['tol_corrector'], threads=threads)
        A0 = report.A0.matrix
        rows.append({'N_H': n_coarse, 'N_eps': n_eps, 'N_h': n_fine,
                     'max_entry_diff': report.max_entry_diff, 'per_square_spread': report.per_square_spread,
                     'precondition_met': report.precondition_met, 'certified': report.certified,
                     'a0_11': A0[0, 0], 'a0_12': A0[0, 1], 'a0_22': A0[1, 1]})
        reports.append(report.to_dict())
        if report.precondition_met and not report.certified:
            failures.append("A_H^inf differs from A_0 on {} (diff {:.3e}, spread {:.3e})".format(
                mesh, report.max_entry_diff, report.per_square_spread))
        elif not report.precondition_met:
            getLogger().warning("Negative control on {}: max entry difference {:.3e}".format(mesh, report.max_entry_diff))
    return ExperimentResult('prop1', rows, OrderedDict([('reports', reports)]), failures)


def _strictly_decreasing(errors, floor):
    """ e(ell + 1) < e(ell) for as long as e(ell) is above the floor """
    for a, b in zip(errors, errors[1:]):
        if a <= floor:
            break
        if not b < a:
            return False
    return True


def hom_error_failures(errors, sizes):
    """ ||u_eps - u_0|| must decrease with eps at a rate inside HOM_RATE_RANGE, unless it is exact throughout """
    if all(error <= HOM_ERROR_FLOOR for error in errors):
        return []
    failures = []
    if not _strictly_decreasing(errors, HOM_ERROR_FLOOR):
        failures.append("||u_eps - u_0|| does not decrease with eps: {}".format(errors))
    rate = _log_rate(errors, sizes)
    low, high = HOM_RATE_RANGE
    if len(errors) > 1 and not low <= rate <= high:
        failures.append("rate {:.4f} of ||u_eps - u_0|| is outside [{}, {}]".format(rate, low, high))
    return failures


def lod_failures(rows, by_level):
    """ Energy errors decrease in ell at every H; over H the LOD converges and P1 stagnates """
    failures = []
    for entry in by_level:
        errors = entry['energy_errors']
        if not all(b < a for a, b in zip(errors, errors[1:])):
            failures.append("LOD energy error does not decrease in ell at H = {}: {}".format(entry['H'], errors))
    if len(rows) > 1:
        sizes = [row['H'] for row in rows]
        lod_rate = _log_rate([row['energy_error'] for row in rows], sizes)
        p1_rate = _log_rate([row['p1_baseline_error'] for row in rows], sizes)
        if not lod_rate >= LOD_MIN_RATE:
            failures.append("LOD rate {:.4f} is below {}".format(lod_rate, LOD_MIN_RATE))
        if not p1_rate <= P1_MAX_RATE:
            failures.append("P1 rate {:.4f} is above {}, the coarse solution does not stagnate".format(p1_rate, P1_MAX_RATE))
    return failures


def run_decay(config, threads=1):
    """ e(ell) = max |A_H^inf - A_H^ell| for every H, with e(ell(H)) / H across H """
    solver, loc = config['solver'], config['localization']
    triples = config.mesh_triples()
    _, n_eps, n_fine = triples[0]
    floor = 10 * solver['tol_corrector']
    report = check_proposition2(config.coefficient, [t[0] for t in triples], n_eps, n_fine,
                                tol=solver['tol_corrector'], n_iters=solver['lanczos_iters'], threads=threads,
                                c_ell=loc['c_ell'] or None, extra_levels=loc['extra_levels'],
                                seed=config['experiment']['seed'],
                                ell=loc['ell'] if loc['ell_rule'] == 'fixed' else None)
    rows, per_h, failures = [], [], []
    for row in report.rows:
        for ell, error in enumerate(row['errors']):
            rows.append({'H': row['H'], 'ell': ell, 'error': error, 'gamma_fit': row['gamma_fit']})
        monotone = _strictly_decreasing(row['errors'], floor)
        fit_ok = not (row['gamma_fit'] > row['gamma_est'] + GAMMA_FIT_SLACK)
        per_h.append(OrderedDict([('H', row['H']), ('ell', row['ell']), ('error', row['error']), ('ratio', row['ratio']),
                                  ('gamma_est', row['gamma_est']), ('gamma_fit', row['gamma_fit']),
                                  ('monotone', monotone), ('gamma_fit_within_estimate', fit_ok)]))
        if not monotone:
            failures.append("e(ell) is not strictly decreasing at H = {}".format(row['H']))
        if not fit_ok:
            failures.append("gamma_fit = {:.4f} exceeds gamma_est + {} at H = {}".format(row['gamma_fit'], GAMMA_FIT_SLACK, row['H']))
    if len(report.rows) > 1 and not report.certified:
        failures.append("e(ell(H)) / H is not bounded across H: {}".format(report.ratios))
    summary = OrderedDict([('c_ell', report.c_ell), ('ratio_bounded', report.certified), ('per_H', per_h)])
    return ExperimentResult('decay', rows, summary, failures)


def run_hom_error(config, threads=1):
    """ ||u_eps - u_0||_L2 over an eps sweep, u_0 from the classical tensor """
    solver = config['solver']
    f = config.rhs()
    spec = config.coefficient
    tensors = {}
    rows = []
    for n_coarse, n_eps, n_fine in sorted(config.mesh_triples(), key=lambda t: t[1]):
        cells_per_period = n_fine // n_eps
        if cells_per_period not in tensors:
            unit_mesh = build_unit_cell_mesh(cells_per_period)
            A1 = generate_unit_cell(spec, unit_mesh)
            tensors[cells_per_period] = classical_tensor(A1, solve_cell_problems(unit_mesh, A1, tol=solver['tol_corrector']))
        A0 = tensors[cells_per_period]
        mesh = build_mesh_hierarchy(n_coarse, n_eps, n_fine)
        A = generate_coefficient(spec, mesh)
        max_iters = solver['max_iters'] or None
        u_eps = solve_model_problem(mesh, A, f, tol=solver['tol_reference'], max_iters=max_iters)
        u_0 = solve_homogenized(mesh, A0, f, tol=solver['tol_reference'], max_iters=max_iters)
        error = l2_error(u_eps, u_0)
        rate = None
        if rows:
            previous = rows[-1]
            if previous['l2_error'] > 0 and error > 0:
                rate = math.log(previous['l2_error'] / error) / math.log(previous['eps'] / mesh.eps)
        rows.append({'eps': mesh.eps, 'l2_error': error, 'rate': rate})
        getLogger().info("eps=1/{}: ||u_eps - u_0|| = {:.6e}".format(n_eps, error))
    errors = [row['l2_error'] for row in rows]
    sizes = [row['eps'] for row in rows]
    failures = hom_error_failures(errors, sizes)
    summary = OrderedDict([('A0', {k: v.matrix.tolist() for k, v in tensors.items()}),
                           ('exact', all(error <= HOM_ERROR_FLOOR for error in errors)),
                           ('monotone', _strictly_decreasing(errors, 0.0)),
                           ('fitted_rate', _log_rate(errors, sizes))])
    return ExperimentResult('hom-error', rows, summary, failures)


def run_lod(config, threads=1):
    """ Energy errors of the LOD and of the uncorrected P1 solutions over H """
    solver, loc = config['solver'], config['localization']
    f = config.rhs()
    spec = config.coefficient
    rows, eigen, by_level = [], [], []
    u_ref = None
    c_ell = loc['c_ell'] or 1
    for n_coarse, n_eps, n_fine in config.mesh_triples():
        mesh = build_mesh_hierarchy(n_coarse, n_eps, n_fine)
        A = generate_coefficient(spec, mesh)
        K = assemble_stiffness(mesh, A)
        if u_ref is None:
            with Timer(logger=getLogger(), desc='fine reference solve'):
                u_ref = reference_solution(mesh, K, f, tol=solver['tol_reference'])
        interpolator = build_interpolator(mesh)
        op = build_schwarz_operator(mesh, A, interpolator, K, threads=threads)
        estimate_spectrum(op, n_iters=solver['lanczos_iters'], seed=config['experiment']['seed'])
        if op.gamma_est >= 1:
            raise CertificationError("gamma_est = {:.6f} >= 1 on {}".format(op.gamma_est, mesh))
        ell = ell_for(config, n_coarse, c_ell)
        correctors = build_basis_correctors(mesh, op, ell, keep_history=True)
        # the lower levels come from the same Richardson history
        level_errors = [lod_errors(build_multiscale_basis(mesh, op, level, correctors), f, u_ref, K)[0]
                        for level in range(ell)]
        basis = build_multiscale_basis(mesh, op, ell, correctors)
        energy, l2 = lod_errors(basis, f, u_ref, K)
        level_errors.append(energy)
        u_p1, _ = solve_p1_coarse(mesh, K, interpolator, f)
        rows.append({'H': mesh.H, 'ell': ell, 'energy_error': energy, 'l2_error': l2,
                     'p1_baseline_error': energy_error(u_p1, u_ref, K)})
        by_level.append(OrderedDict([('H', mesh.H), ('energy_errors', level_errors)]))
        eigen.append(basis.smallest_eigenvalue())
        getLogger().info("H=1/{}, ell={}: LOD energy error {:.6e}, P1 {:.6e}".format(n_coarse, ell, energy, rows[-1]['p1_baseline_error']))
    sizes = [row['H'] for row in rows]
    summary = OrderedDict([('lod_rate', _log_rate([row['energy_error'] for row in rows], sizes)),
                           ('p1_rate', _log_rate([row['p1_baseline_error'] for row in rows], sizes)),
                           ('reference_energy', float(math.sqrt(max(u_ref.values @ (K.matrix @ u_ref.values), 0.0)))),
                           ('smallest_eigenvalues', eigen),
                           ('errors_by_level', by_level)])
    return ExperimentResult('lod', rows, summary, lod_failures(rows, by_level))


RUNNERS = OrderedDict([('prop1', run_prop1), ('decay', run_decay), ('hom-error', run_hom_error), ('lod', run_lod)])


def validate_config(path):
    """ Parse and validate a config file, raising AdmissibilityError on the first problem """
    return ExperimentConfig.from_file(path).validate()


def run_experiment(config, threads=1):
    """ Validate and run the experiment named in config """
    config.validate()
    runner = RUNNERS[config.name]
    with Timer(logger=getLogger(), desc='{} experiment'.format(config.name)) as timer:
        result = runner(config, threads=threads)
    result.wall_times['total'] = timer.exec_time()
    return result


# -------------------------------------------------------------------------------
# Artifacts
# -------------------------------------------------------------------------------

def write_results(result, config, output_dir=None):
    """ Write <prefix>.csv and/or <prefix>.json into the output directory """
    output_dir = FileHelper.create_dir(FileHelper.abspath(output_dir or config['output']['path']))
    fmt = config['output']['format']
    base = os.path.join(output_dir, config.prefix)
    if fmt in ('csv', 'both'):
        result.paths.append(write_csv(base + '.csv', result.rows, result.fieldnames))
    if fmt in ('json', 'both'):
        content = result.to_dict()
        content['config'] = config.to_dict()
        content['description'] = config['experiment']['description']
        content['metadata'] = report_metadata(config.to_ini(), result.wall_times)
        result.paths.append(write_json(base + '.json', content))
    return result.paths


def plot_result(result, path):
    """ Static PNG line chart of the result table; returns the path or None without matplotlib """
    try:
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt
    except ImportError:
        getLogger().warning("matplotlib is not installed, no plot is written")
        return None
    rows = result.rows
    fig, ax = plt.subplots(figsize=(6, 4))
    if result.name == 'decay':
        for H in sorted({row['H'] for row in rows}, reverse=True):
            table = [row for row in rows if row['H'] == H]
            ax.semilogy([row['ell'] for row in table], [max(row['error'], 1e-16) for row in table], 'o-', label='H = {:g}'.format(H))
        ax.set_xlabel('ell')
        ax.set_ylabel('max |A_H^inf - A_H^ell|')
    elif result.name == 'hom-error':
        ax.loglog([row['eps'] for row in rows], [row['l2_error'] for row in rows], 'o-', label='L2 error')
        ax.set_xlabel('eps')
        ax.set_ylabel('||u_eps - u_0||')
    elif result.name == 'lod':
        ax.loglog([row['H'] for row in rows], [row['energy_error'] for row in rows], 'o-', label='LOD')
        ax.loglog([row['H'] for row in rows], [row['p1_baseline_error'] for row in rows], 's--', label='P1')
        ax.set_xlabel('H')
        ax.set_ylabel('energy error')
    else:
        plt.close(fig)
        getLogger().info("No plot for {}".format(result.name))
        return None
    ax.legend()
    ax.grid(True, which='both', alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    result.paths.append(path)
    return path


def run_and_write(config, output_dir=None, threads=1, plot=None):
    """ Run, write every artifact, then raise CertificationError for failed checks """
    result = run_experiment(config, threads=threads)
    write_results(result, config, output_dir)
    plot = config['output']['plot'] if plot is None else plot
    if plot:
        out = FileHelper.abspath(output_dir or config['output']['path'])
        plot_result(result, os.path.join(out, config.prefix + '.png'))
    if result.failures:
        for failure in result.failures:
            getLogger().error(failure)
        raise CertificationError("{} check(s) failed: {}".format(len(result.failures), '; '.join(result.failures)))
    return result
