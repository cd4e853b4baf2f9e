"""Numerical laboratory for convexity of balls in singular constant scalar
curvature metrics"""

__version__ = "0.1.0"
