"""
Variational denoising for Poisson and multiplicative noise through the
equivalence between Bregman-fidelity models and convex additive models,
plus numerical checks of the associated Hamilton-Jacobi structure.
"""

__version__ = "0.1.0"
