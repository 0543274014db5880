# tests/unit/__init__.py
"""Unit tests for Lab Extraction System."""
