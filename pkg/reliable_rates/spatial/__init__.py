"""Contiguity graphs and intrinsic CAR building blocks."""

from .graph import (
    AdjacencyGraph,
    build_graph,
    car_conditional_moments,
    car_full_conditional,
    icar_quadratic,
    load_graph,
    read_edges,
)

__all__ = [
    "AdjacencyGraph",
    "build_graph",
    "car_conditional_moments",
    "car_full_conditional",
    "icar_quadratic",
    "load_graph",
    "read_edges",
]
