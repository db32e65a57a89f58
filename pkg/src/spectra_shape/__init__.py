"""Eigenvalue shape-derivative engine for Helmholtz and Maxwell cavities.

Assembles parameter-dependent pencils on a fixed reference mesh via
pulled-back coefficients, solves their spectra, and evaluates eigenvalue
derivatives by three cross-checking routes: pencil-derivative (Rellich)
matrices, volume-integral matrices, and surface-integral matrices.
"""

__version__ = "0.1.0"
