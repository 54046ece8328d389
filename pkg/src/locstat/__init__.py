"""locstat: simulation and localized moment inference for time-varying
Levy-driven state space models."""

from ._core import backend_name

__version__ = "0.1.0"
__all__ = ["backend_name", "__version__"]
