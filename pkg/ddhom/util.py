# -*- coding: utf-8 -*-

"""
Timers, text reports and small file helpers shared by the experiment drivers
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import os
import io
import sys
import time
import errno
import logging

import numpy as np


# -------------------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


###############################################################################

def header(*msg, level='h1', separator=" ", print_out=print):
    """ Print header block in text mode """
    out_string = separator.join(str(x) for x in msg)
    if level == 'h0':
        box_len = 80
        print_out('+' + '-' * (box_len + 2))
        print_out("| %s" % out_string)
        print_out('+' + '-' * (box_len + 2))
    elif level == 'h1':
        print_out("")
        print_out(out_string)
        print_out('-' * 60)
    else:
        print_out('\t%s' % out_string)
        print_out('\t' + ('-' * 40))


def format_value(value):
    """ Scientific notation for floats, str() for everything else """
    if isinstance(value, (float, np.floating)):
        return '%.6e' % value
    return str(value)


class Timer:
    """ Measure wall time of a phase and log its start and end

    >>> with Timer(desc='cell problems') as t:
    ...     solve()
    >>> t.exec_time()
    """
    def __init__(self, logger=None, report=None, desc=''):
        self.start_time = time.perf_counter()
        self.end_time = self.start_time
        self.desc = desc
        self.__logger = logger
        self.__report = report

    @property
    def logger(self):
        return self.__logger if self.__logger is not None else getLogger()

    def exec_time(self):
        return self.end_time - self.start_time

    def log(self, action, desc=None):
        msg = '{action} - [{desc}]'.format(action=action, desc=desc) if desc else action
        self.logger.info(msg)
        if self.__report:
            self.__report.writeline(msg)
        return self

    def start(self, desc=''):
        self.desc = desc or self.desc
        self.log("Started", desc=self.desc)
        self.start_time = time.perf_counter()
        return self

    def stop(self, desc=''):
        self.end_time = time.perf_counter()
        desc = desc or self.desc
        msg = "[{} | {}]".format(desc, str(self)) if desc else str(self)
        self.log("Stopped", desc=msg)
        return self

    def __enter__(self):
        return self.start()

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.stop()

    def __str__(self):
        return "Execution time: %.2f sec(s)" % (self.exec_time(),)


class TextReport:
    """ Text report written to stdout, a file or a string buffer """

    STDOUT = '*stdout*'
    STRINGIO = '*string*'

    def __init__(self, path=None, mode='w', encoding='utf8'):
        if not path or path == TextReport.STDOUT:
            self.__path = TextReport.STDOUT
            self.__report_file = sys.stdout
            self.mode = None
        elif path == TextReport.STRINGIO:
            self.__path = TextReport.STRINGIO
            self.__report_file = io.StringIO()
            self.mode = None
        else:
            self.__path = os.path.expanduser(path)
            self.__report_file = open(self.__path, mode, encoding=encoding)
            self.mode = mode
        self.print = self.writeline

    @property
    def path(self):
        return self.__path

    def content(self):
        """ Report content when writing to a string buffer, otherwise '' """
        if isinstance(self.__report_file, io.StringIO):
            return self.__report_file.getvalue()
        return ''

    def write(self, *msg, separator=" ", level=0):
        self.__report_file.write("\t" * level)
        self.__report_file.write(separator.join(str(x) for x in msg))

    def writeline(self, *msg, **kwargs):
        self.write(*msg, **kwargs)
        self.write('\n')

    def header(self, *msg, **kwargs):
        header(*msg, print_out=self.writeline, **kwargs)

    def table(self, rows, fieldnames):
        """ Write rows (dicts) as an aligned text table """
        table = Table()
        table.add_row(list(fieldnames))
        for row in rows:
            table.add_row([format_value(row.get(k, '')) for k in fieldnames])
        table.print(print_func=self.writeline)

    def close(self):
        if self.mode and self.__report_file is not None:
            self.__report_file.flush()
            self.__report_file.close()
            self.__report_file = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    @staticmethod
    def string():
        return TextReport(TextReport.STRINGIO)


class Table:
    """ A text table, the first row is the header """

    def __init__(self):
        self.rows = []

    def add_row(self, new_row):
        if new_row is None:
            raise ValueError("Row cannot be None")
        self.rows.append([str(x) for x in new_row])

    def column_widths(self):
        widths = [0] * max(len(r) for r in self.rows)
        for row in self.rows:
            for idx, cell in enumerate(row):
                widths[idx] = max(widths[idx], len(cell))
        return widths

    def print(self, print_func=print):
        if not self.rows:
            return
        widths = self.column_widths()
        separator = '+' + '+'.join('-' * (w + 2) for w in widths) + '+'
        print_func(separator)
        for ridx, row in enumerate(self.rows):
            if ridx == 0:
                cells = [c.center(w) for c, w in zip(row, widths)]
            else:
                cells = [c.rjust(w) for c, w in zip(row, widths)]
            print_func('| ' + ' | '.join(cells) + ' |')
            if ridx == 0:
                print_func(separator)
        print_func(separator)


class FileHelper:

    @staticmethod
    def abspath(a_path):
        return os.path.abspath(os.path.expanduser(a_path))

    @staticmethod
    def create_dir(dir_path):
        if not os.path.exists(dir_path):
            try:
                os.makedirs(dir_path)
            except OSError as exc:
                if exc.errno != errno.EEXIST:
                    raise
        return dir_path
