"""Computations on the Bruhat-Tits tree of SL_2(Q_p) and its Hecke algebra."""

from .padic import PadicContext, PadicMatrix, PadicScalar, PrecisionError

__version__ = "0.1.0"

__all__ = ["PadicContext", "PadicMatrix", "PadicScalar", "PrecisionError", "__version__"]
