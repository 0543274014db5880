"""
CaRBM thermal-state preparation.

Cartan-decomposed Hamiltonians, RBM imaginary-time layers with optional
measurement-based correction, and a density-matrix simulator driving
Lee-Yang, Fisher-zero and Gross-Neveu phase scans.
"""

__version__ = "0.1.0"
