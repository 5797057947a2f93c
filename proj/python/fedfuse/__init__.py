"""Federated learning simulator with evidential decision fusion.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from fedfuse._core import *  # noqa: F401,F403
from fedfuse._core import __doc__  # noqa: F401

__version__ = "0.1.0"
