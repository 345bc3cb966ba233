"""Nonparametric density-based clustering of spatial event catalogs.

Kernel density estimation, level-set cluster trees over Delaunay
connectivity, likelihood-ratio allocation, density-based silhouettes, rank
tests, partition agreement indexes and a slip/aftershock correlation
workflow.
"""

from .catalog import (ColumnMap, Event, EventCatalog, SelectionWindow, filter_catalog,
                      load_catalog, write_catalog)
from .cluster import (AlphaGrid, ClusterOptions, ClusterResult, ClusterTree, ModeFunction,
                      Partition, allocate, build_mode_function, density_quantile_grid,
                      extract_cores, pdf_cluster)
from .errors import DataError, DegenerateError, NPCError
from .kde import (DensityModel, DensitySurface, kde_at_sample, kde_evaluate,
                  normal_reference_bandwidth)
from .topology import ComponentLabeling, TriangulationGraph, connected_components, delaunay

__version__ = "0.1.0"

__all__ = [
    "AlphaGrid", "ClusterOptions", "ClusterResult", "ClusterTree", "ColumnMap",
    "ComponentLabeling", "DataError", "DegenerateError", "DensityModel", "DensitySurface",
    "Event", "EventCatalog", "ModeFunction", "NPCError", "Partition", "SelectionWindow",
    "TriangulationGraph", "allocate", "build_mode_function", "connected_components", "delaunay",
    "density_quantile_grid", "extract_cores", "filter_catalog", "kde_at_sample", "kde_evaluate",
    "load_catalog", "normal_reference_bandwidth", "pdf_cluster", "write_catalog",
]
