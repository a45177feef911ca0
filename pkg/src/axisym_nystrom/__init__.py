"""Kernel-split Fourier-Nystrom solver for Helmholtz Neumann problems on bodies of revolution."""

__version__ = "0.1.0"
