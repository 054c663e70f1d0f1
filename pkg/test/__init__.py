# -*- coding: utf-8 -*-

''' ddhom Test Scripts

:license: MIT, see LICENSE for more details.
'''

# This source code is a part of ddhom library
# LICENSE: The MIT License (MIT)

import os
from ddhom.cli import setup_logging

TEST_DIR = os.path.dirname(os.path.realpath(__file__))

setup_logging(os.path.join(TEST_DIR, 'logging.json'), os.path.join(TEST_DIR, 'logs'))
