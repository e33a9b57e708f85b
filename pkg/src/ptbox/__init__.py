"""PT-symmetric particle in a box with competing gain/loss potentials, and its lattice counterpart."""

__version__ = "0.1.0"
