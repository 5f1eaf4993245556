"""Kernels of rational Eisenstein primes on J_0(N), computed with modular symbols mod ell."""

__version__ = "0.1.0"
