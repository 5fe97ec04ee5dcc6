"""Moment relaxations bounding the measure of unions of semi-algebraic sets."""
__version__ = "0.1.0"
