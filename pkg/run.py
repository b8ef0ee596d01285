#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Runner for a source checkout without installation.
Same arguments as the installed command: fracreg --help
"""

import sys

from source.cli import main

if __name__ == '__main__':
    sys.exit(main())
