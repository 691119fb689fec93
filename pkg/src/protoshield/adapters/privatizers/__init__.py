"""
Privatizers
"""

from .clipping_privatizer import ClipOnlyPrivatizer, IsotropicPrivatizer
from .privatizer_factory import PrivatizerFactory
from .variance_privatizer import VariancePrivatizer

__all__ = [
    "ClipOnlyPrivatizer",
    "IsotropicPrivatizer",
    "PrivatizerFactory",
    "VariancePrivatizer",
]
