"""Bi-objective CNN cell search with training-free architecture scoring.

Candidate networks are built from two searched cells (normal and
reduction) described by a 40-integer genome.  Each candidate is scored
by freezing a randomly initialized backbone, training only a small
ensemble of linear classifiers on its features, and reporting
(validation error, multiply-add count).  An elitist nondominated
genetic search explores the encoding and returns a Pareto front.
"""

__version__ = "0.1.0"
