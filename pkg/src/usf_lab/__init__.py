"""Monte Carlo lab for uniform spanning forests and random relations on Z^d."""
from .lattice import Shell, rho, span_distance, wired_box
from .rng import derive_seed, mix64
from .spread import spread

__version__ = "0.1.0"

__all__ = ["Shell", "derive_seed", "mix64", "rho", "span_distance", "spread", "wired_box"]
