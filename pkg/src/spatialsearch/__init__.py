"""Simulated quantum search on graphs with local dynamics."""
from .amplify import optimal_rounds, predicted_success, run_amplification
from .clustersearch import IrregularParams, run_irregular_search, search_irregular_k, search_scattered
from .commsim import embed_cube, run_disjointness
from .graph import Graph, make_grid, make_starfish, read_graph, write_graph
from .gridsearch import (GridParams, classical_scan, search_by_diameter, search_k, search_unique,
                         search_unknown)
from .report import CostReport, SearchOutcome

__version__ = "0.1.0"

__all__ = [
    "Graph", "make_grid", "make_starfish", "read_graph", "write_graph", "GridParams", "search_unique",
    "search_k", "search_unknown", "search_by_diameter", "classical_scan", "IrregularParams",
    "run_irregular_search", "search_irregular_k", "search_scattered", "embed_cube", "run_disjointness",
    "optimal_rounds", "predicted_success", "run_amplification", "CostReport", "SearchOutcome",
]
