"""Linear lambda calculus with automatic differentiation transforms."""

import sys

# transforms recurse over deep let-chains
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

__version__ = "0.1.0"
