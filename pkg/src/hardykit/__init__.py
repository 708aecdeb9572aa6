"""hardykit: semigroup kernels, cuboid coverings, atoms, and the
desk-scale verification campaigns tying them together."""

__version__ = "0.1.0"
