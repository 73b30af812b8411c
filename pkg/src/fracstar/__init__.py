"""Fractional Dirichlet problems on ring domains and starshapedness of their level sets."""

__version__ = "0.1.0"
