"""Finite-model toolkit for logics of functional, continuous and uniform dependence."""

__version__ = "0.1.0"
