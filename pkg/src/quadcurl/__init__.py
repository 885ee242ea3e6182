"""H(curl^2)-conforming tetrahedral finite elements for the quad-curl problem."""

__version__ = "0.1.0"
