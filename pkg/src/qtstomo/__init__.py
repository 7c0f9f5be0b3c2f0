"""Qubit tunneling spectroscopy and eigenstate tomography simulator."""

__version__ = "0.1.0"
