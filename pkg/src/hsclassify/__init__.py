"""Hierarchical HS-code classification with knowledge-graph explanations.

Pipeline: free-text cleanup -> chapter/heading softmax classifiers ->
subheading resolution by training-set nearest neighbour and by average-cosine
matching against knowledge graphs built from the tariff nomenclature, with a
machine-auditable trail behind every answer.
"""

__version__ = "0.1.0"
