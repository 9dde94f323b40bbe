"""lrplab: a simulation laboratory for supercritical long-range percolation.

Modules:

* core      parameters, lattice boxes, connection probabilities, graphs
* sampler   exact edge sampling by displacement classes, staged reveals
* cluster   components, distances, diameters, escape statistics
* renorm    block cores, core linking, allocation, connected partitions
* spectral  spectral gaps and multicommodity-flow lower bounds
* walk      heat-kernel propagation, return probabilities, walk statistics
* hkbound   heat-kernel assumption checks and the closed-form decay bound
* harness   experiment configs, replicas, regressions, files, plots
"""

from .core import Box, LatticeGraph, LrpParams, build_graph, connection_probability
from .sampler import PairPredicate, enumerate_distance_classes, sample_edges, staged_reveal

__version__ = "0.1.0"

__all__ = [
    "Box",
    "LatticeGraph",
    "LrpParams",
    "build_graph",
    "connection_probability",
    "PairPredicate",
    "enumerate_distance_classes",
    "sample_edges",
    "staged_reveal",
    "__version__",
]
