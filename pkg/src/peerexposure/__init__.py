"""Peer-exposure estimation on attributed networks.

Subpackages and modules:

* ``graph``: attributed graphs, ego networks, motif counts, edge-list I/O
* ``netgen``: BA / WS / SBM generators and edge-noise augmentation
* ``sim``: treatment/outcome simulation with known peer effects
* ``autodiff``: reverse-mode differentiation, Adam, finite-difference checks
* ``model``: the ego-network exposure model and its training loop
* ``baselines``: fraction-treated and motif exposures
* ``harness``: experiment runner, metrics and aggregation
"""
from .errors import InputError, NumericError, ShapeError, TrainingError
from .graph import AttributedGraph, read_graph, write_graph

__version__ = "0.1.0"

__all__ = ["AttributedGraph", "InputError", "NumericError", "ShapeError", "TrainingError", "read_graph", "write_graph"]
