"""evodrift: evolving-graph simulation and label-free tracking of a frozen
graph model's generalization loss over time."""

from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
