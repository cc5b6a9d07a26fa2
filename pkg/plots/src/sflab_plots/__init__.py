"""Figures from sflab output files (spectrum.csv, flow.json, convergence.csv).

This package never recomputes physics: every number in a figure comes
from the input files.
"""

__version__ = "0.1.0"
