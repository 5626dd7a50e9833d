"""Wave maps from 1+1 Minkowski space with scalar and two-form potentials."""

__version__ = "0.1.0"
