"""Sharp constants, optimizers and feasibility structure for the
generalized Young inequality, with heat-flow and spherical certification
suites."""

__version__ = "0.1.0"
