# tests/integration/__init__.py
"""Integration tests for Lab Extraction System."""
