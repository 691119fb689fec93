"""
Synthetic dataset generators
"""

from .dataset_archive import NpzDatasetArchive
from .dataset_factory import DatasetFactory
from .domain_skew import DomainSkewGenerator
from .label_skew import LabelSkewGenerator, dirichlet_partition

__all__ = [
    "DatasetFactory",
    "DomainSkewGenerator",
    "LabelSkewGenerator",
    "NpzDatasetArchive",
    "dirichlet_partition",
]
