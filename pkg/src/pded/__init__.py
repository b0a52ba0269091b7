"""pded: closed-loop PDE discovery with bandit-tuned proposer instructions."""

__version__ = "0.1.0"

from .expr import Expression, Factor, Term, complexity, parse_equation, to_text
from .fit import FitResult, StridgeConfig, fitness, nrmse, r_squared, stridge
from .numerics import Dataset, Split, build_problem, differentiate

__all__ = [
    "Dataset",
    "Expression",
    "Factor",
    "FitResult",
    "Split",
    "StridgeConfig",
    "Term",
    "__version__",
    "build_problem",
    "complexity",
    "differentiate",
    "fitness",
    "nrmse",
    "parse_equation",
    "r_squared",
    "stridge",
    "to_text",
]
