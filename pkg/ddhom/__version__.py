# -*- coding: utf-8 -*-
# ddhom's package version information

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

__author__ = "ddhom developers"
__email__ = "ddhom-dev@users.noreply.github.com"
__copyright__ = "Copyright (c) 2026, ddhom developers"
__credits__ = []
__license__ = "MIT License"
__description__ = "Effective diffusion tensors of periodic elliptic problems by cell problems, kernel correctors and domain decomposition"
__url__ = "https://github.com/ddhom/ddhom/"
__maintainer__ = "ddhom developers"
__version_major__ = "0.1"
__version__ = "{}a1".format(__version_major__)
__version_long__ = "{} - Alpha 1".format(__version_major__)
__status__ = "3 - Alpha"
