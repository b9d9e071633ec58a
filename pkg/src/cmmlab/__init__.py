"""Simulation lab for cooperative map matching: centroid-of-feasible-set estimation
of the common GNSS error and its decay with the number of vehicles."""

__version__ = "0.1.0"
