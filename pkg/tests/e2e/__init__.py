# tests/e2e/__init__.py
"""End-to-end tests for Lab Extraction System."""
