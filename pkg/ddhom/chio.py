# -*- coding: utf-8 -*-

"""
Result file IO: CSV tables and JSON reports
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import csv
import gzip
import json
import hashlib
import logging
import os
import platform

import numpy as np
import scipy

from .__version__ import __version__

# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

FLOAT_FORMAT = '%.12e'
__python_open = open


def getLogger():
    return logging.getLogger(__name__)


# -------------------------------------------------------------------------------
# Functions
# -------------------------------------------------------------------------------

def to_string(content, encoding='utf-8'):
    if isinstance(content, bytes):
        return content.decode(encoding)
    elif isinstance(content, str):
        return content
    else:
        return str(content)


def is_file(path):
    """ Check if path is a path to an existing file """
    return path and os.path.isfile(to_string(path))


def open(path, mode='rt', encoding='utf-8', *args, **kwargs):
    """ Open a text file, .gz paths are opened with gzip """
    if not mode:
        raise ValueError("Invalid file access mode")
    elif mode.startswith('r') and not is_file(path):
        raise FileNotFoundError("File {} does not exist".format(path))
    if 't' not in mode and 'b' not in mode:
        mode += 't'
    if not path:
        raise ValueError("Path cannot be empty")
    path = str(path)
    if path.endswith('.gz'):
        if mode.endswith('b'):
            return gzip.open(path, mode=mode, *args, **kwargs)
        return gzip.open(path, mode=mode, encoding=encoding, *args, **kwargs)
    if mode.endswith('b'):
        return __python_open(path, mode=mode, *args, **kwargs)
    return __python_open(path, mode=mode, encoding=encoding, *args, **kwargs)


def read_file(path, encoding='utf-8'):
    with open(path, 'rt', encoding=encoding) as infile:
        return infile.read()


def write_file(path, content, encoding='utf-8'):
    """ Write text content to a file. If the path ends with .gz, gzip will be used. """
    if not path:
        raise ValueError("Output path is invalid")
    getLogger().debug("Writing content to {}".format(path))
    with open(path, mode='wt', encoding=encoding) as outfile:
        outfile.write(to_string(content))


def format_cell(value):
    """ Floats in scientific notation with 12 digits, everything else as str()

    >>> format_cell(0.25)
    '2.500000000000e-01'
    >>> format_cell(3)
    '3'
    """
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path, rows, fieldnames, encoding='utf-8'):
    """ Write dict rows to a CSV file with a header row

    Comma separated, '.' decimal, floats as %.12e and '\\n' line endings, so
    that identical results give byte-identical files.
    """
    with open(path, mode='wt', encoding=encoding, newline='') as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=fieldnames, quoting=csv.QUOTE_MINIMAL,
                                extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_cell(row.get(k)) for k in fieldnames})
    getLogger().info("Wrote {} rows to {}".format(len(rows), path))
    return path


def read_csv(path, encoding='utf-8'):
    """ Read a CSV file written by write_csv as a list of dicts (values stay strings) """
    with open(path, mode='rt', encoding=encoding, newline='') as csvfile:
        return list(csv.DictReader(csvfile))


class NumpyEncoder(json.JSONEncoder):
    """ JSON encoder that understands numpy scalars and arrays """

    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        return super().default(obj)


def write_json(path, content, encoding='utf-8'):
    write_file(path, json.dumps(content, cls=NumpyEncoder, indent=2, sort_keys=True), encoding=encoding)
    return path


def read_json(path, encoding='utf-8'):
    return json.loads(read_file(path, encoding=encoding))


def config_hash(text):
    """ sha256 of a canonical config text """
    return hashlib.sha256(to_string(text).encode('utf-8')).hexdigest()


def versions():
    return {'ddhom': __version__,
            'numpy': np.__version__,
            'scipy': scipy.__version__,
            'python': platform.python_version()}


def report_metadata(config_text, wall_times=None):
    """ Metadata block of a JSON report """
    return {'config_sha256': config_hash(config_text),
            'versions': versions(),
            'wall_times': dict(wall_times or {})}
