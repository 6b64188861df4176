"""
Test suite for spectra

This package contains unit, property and integration tests for the sampling,
spectral, probability, structure and harness modules, plus the acceptance
suite.
"""

__version__ = "1.0.0"
