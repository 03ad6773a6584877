"""Numerical laboratory for the critical two-dimensional stochastic heat flow.

Modules
-------
kernels      heat kernel, pair kernel, j-function, block grid
gaussnet     exact integration of networks of 2d Gaussian factors
moments2     second-moment reductions for blocks
diagrams     pair-sequence diagram calculus for higher moments
error_terms  block error-term expansion and its direct oracle
polymer      lattice directed-polymer Monte Carlo and the decoupling identity
gmc          finite-space Gaussian multiplicative chaos
harness      bands, CLT diagnostics, configuration and the command line
"""

__version__ = "0.1.0"
