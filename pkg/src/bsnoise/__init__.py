"""Boson Sampling with imperfectly calibrated beamsplitters."""

__version__ = "0.1.0"
