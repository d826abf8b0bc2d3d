"""Pseudo-spectral solver for fractionally filtered LES models of NSE and MHD on the 3-torus."""

__version__ = "0.1.0"
