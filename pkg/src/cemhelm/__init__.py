"""cemhelm: constraint-energy-minimizing multiscale solver for
heterogeneous Helmholtz problems on the unit square."""

__version__ = "0.1.0"
