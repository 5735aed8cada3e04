"""Safe sample screening for weighted L2-regularized ERM under sample-weight uncertainty."""

__version__ = "0.1.0"
