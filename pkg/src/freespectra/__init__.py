"""Free spectrahedra: noncommutative polynomials, LMI detection and eigenvalue optimization."""
from .config import ToolConfig
from .freealg import HermTuple, MatPoly, adjoint, degree, direct_sum, evaluate, mul
from .parsing import format_poly, parse_poly
from .pencil import Pencil, make_ball, make_cube

__all__ = ["ToolConfig", "HermTuple", "MatPoly", "Pencil", "adjoint", "degree", "direct_sum", "evaluate",
           "mul", "format_poly", "parse_poly", "make_ball", "make_cube"]
__version__ = "0.1.0"
