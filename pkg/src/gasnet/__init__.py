"""Gas pipeline network simulation and boundary control toolkit."""

from gasnet._kernels import BACKEND as kernel_backend
from gasnet.gas import GasState, PressureLaw

__all__ = ["GasState", "PressureLaw", "kernel_backend"]
__version__ = "0.1.0"
