"""Two-mode motional interactions of a trapped ion driven by symmetric Raman pairs."""

__version__ = "0.1.0"
