"""Quantum pulses scattering on local systems, simulated with virtual input/output cavities."""
__version__ = "0.1.0"
