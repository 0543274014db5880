# tests/__init__.py
"""Test suite for Lab Extraction System."""
