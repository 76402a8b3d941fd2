"""critex: blow-up vs global existence for a forced semilinear heat equation."""

__version__ = "0.1.0"
