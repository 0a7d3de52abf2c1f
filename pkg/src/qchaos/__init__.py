"""Numerical laboratory for q-deformed Gaussian chaos.

Modules
-------
combinatorics   permutations, inversion counts, shuffle cosets, pair partitions
symmetrizer     dense q-symmetrizers and shuffle operators
qfock           truncated q-Fock spaces, gaussians, Wick products, modular data
matrixmodel     finite-n CAR/CCR spin model and its weighted L_p norms
lpnorms         matricization norms and the K/J-type functionals
verify          verification suites and reports (driven by ``qchaos verify``)
"""

__version__ = "0.1.0"
