"""
Aggregators
"""

from .aggregator_factory import AggregatorFactory
from .kmeans_aggregator import KMeansAggregator
from .mean_aggregator import MeanAggregator

__all__ = ["AggregatorFactory", "KMeansAggregator", "MeanAggregator"]
