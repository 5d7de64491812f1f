"""Quantitative mixing of passive scalars on the two-dimensional unit torus.

Submodules
----------
grid        sampled fields, spectra, Sobolev norms, binary IO
mixing      geometric and functional mixing scales
velocity    divergence-free velocity models and their budgets
transport   flow maps and semi-Lagrangian advection
bressan     exact slice-and-dice checkerboard evolution
estimates   maximal functions, the logarithmic flow functional, Lusin bounds
bounds      closed-form lower bounds and compliance checks
cli         command-line scenario runner
"""

__version__ = "0.1.0"
