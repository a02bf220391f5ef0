"""Nodal RF channel emulation with factored scattering."""

__version__ = "0.1.0"
