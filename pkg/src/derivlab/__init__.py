"""Numerical checks of Hyers-Ulam stability for Lie bracket derivation-derivations on M_n(C)."""

__version__ = "0.1.0"
