"""Numerical kernels: simulation, LSM, transforms, pricing."""
