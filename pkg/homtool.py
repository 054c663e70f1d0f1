#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# -*- mode: python -*-

'''
Homogenization experiment tools

Subcommands run the four studies of ddhom from a config file:

    homtool.py prop1 --config configs/prop1_laminate.ini
    homtool.py decay --config configs/decay_laminate.ini --threads 4
    homtool.py hom-error --config configs/hom_error_laminate.ini --plot
    homtool.py lod --config configs/lod_random.ini --output results/lod
    homtool.py validate-config configs/lod_random.ini

Exit codes: 0 success, 2 invalid input (admissibility, ellipticity, config),
3 solver failure, 4 certification failure.
'''

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import os
import sys

from ddhom import __version_long__
from ddhom.cli import CLIApp, setup_logging
from ddhom.config import AppConfig, ExperimentConfig, describe_schema
from ddhom.errors import AdmissibilityError
from ddhom.experiments import run_and_write, validate_config
from ddhom.util import TextReport

# -------------------------------------------------------------------------------
# CONFIGURATION
# ------------------------------------------------------------------------------

setup_logging('logging.json', 'logs')


# -------------------------------------------------------------------------------
# FUNCTIONS
# -------------------------------------------------------------------------------

def load_config(cli, args, task):
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        locator = AppConfig('ddhom')
        if locator.config is None:
            raise AdmissibilityError("No --config given and no ddhom.ini found in {}".format(', '.join(locator.potentials())))
        config = locator.config
        cli.logger.info("Using config file {}".format(locator.config_path))
    if config.name != task:
        cli.logger.warning("Config names experiment {}, running {}".format(config.name, task))
        config['experiment']['name'] = task
    return config.validate()


def run_task(cli, args, task):
    config = load_config(cli, args, task)
    if args.threads is not None and args.threads < 1:
        raise AdmissibilityError("--threads must be at least 1 (got {})".format(args.threads))
    threads = args.threads or os.cpu_count() or 1
    cli.logger.info("Running {} with {} thread(s)".format(task, threads))
    result = run_and_write(config, output_dir=args.output, threads=threads, plot=True if args.plot else None)
    rp = TextReport(args.report)
    rp.header("{} ({})".format(task, config.coefficient), level='h0')
    rp.table(result.rows, result.fieldnames)
    for key, value in result.summary.items():
        if not isinstance(value, (list, dict)):
            rp.print("{}: {}".format(key, value))
    for path in result.paths:
        rp.print("Wrote {}".format(path))
    rp.close()


def prop1(cli, args):
    ''' A_0 from cell problems against A_H^inf from kernel correctors '''
    return run_task(cli, args, 'prop1')


def decay(cli, args):
    ''' Exponential decay of the Schwarz-localized effective tensors '''
    return run_task(cli, args, 'decay')


def hom_error(cli, args):
    ''' L2 error between u_eps and u_0 over an eps sweep '''
    return run_task(cli, args, 'hom-error')


def lod(cli, args):
    ''' LOD energy errors against the uncorrected P1 baseline '''
    return run_task(cli, args, 'lod')


def check_config(cli, args):
    ''' Parse and validate a config file, print its canonical form '''
    if args.schema:
        describe_schema()
        return
    if not args.path:
        raise AdmissibilityError("validate-config needs a config path (or --schema)")
    config = validate_config(args.path)
    print(config.to_ini())
    cli.logger.info("{} is valid (sha256 {})".format(args.path, config.sha256()))


def show_version(cli, args):
    print("ddhom homogenization toolkit - Version {}".format(__version_long__))


# -------------------------------------------------------------------------------
# MAIN
# -------------------------------------------------------------------------------

def build_app():
    app = CLIApp(desc='ddhom homogenization experiments', logger=__name__, show_version=show_version)
    for name, func in (('prop1', prop1), ('decay', decay), ('hom-error', hom_error), ('lod', lod)):
        task = app.add_task(name, func=func)
        task.add_argument('--config', help='Experiment config file (INI or JSON), default: ddhom.ini lookup', default=None)
        task.add_argument('--output', help='Output directory, overrides [output] path', default=None)
        task.add_argument('--threads', help='Worker threads, default: available cores', default=None, type=int)
        task.add_argument('--plot', help='Write a PNG plot (needs matplotlib)', action='store_true')
        task.add_argument('--report', help='Summary report file, default: stdout', default=None)
    check_task = app.add_task('validate-config', func=check_config)
    check_task.add_argument('path', nargs='?', help='Config file', default=None)
    check_task.add_argument('--schema', help='Print every section, key and default', action='store_true')
    return app


def main(argv=None):
    ''' ddhom tools main function '''
    return build_app().run(argv=argv)


if __name__ == "__main__":
    sys.exit(main())
