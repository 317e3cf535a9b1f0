"""Multi-objective neural architecture search over block-chained CGP genotypes."""

from .engine import VERSION as __version__

__all__ = ["__version__"]
