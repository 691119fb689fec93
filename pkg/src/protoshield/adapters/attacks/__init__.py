"""
Attacks against released prototypes
"""

from .attack_factory import AttackFactory
from .fsh_inversion import FSHInversion, diagonal_frechet, total_variation
from .prototype_mia import PrototypeMIA

__all__ = [
    "AttackFactory",
    "FSHInversion",
    "PrototypeMIA",
    "diagonal_frechet",
    "total_variation",
]
