"""Reference evaluator for arch-graph documents over the line protocol."""

from .model import GraphModel
from .shapes import shape_check

__all__ = ["GraphModel", "shape_check"]
__version__ = "0.1.0"
