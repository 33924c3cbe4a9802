"""Multiple transmitter siting on raster terrains.

Pipeline: :func:`estimate_vix` -> :func:`partition` / :func:`find_candidates`
-> :func:`compute_all_viewsheds` -> :func:`site`.
"""

from ._backend import available as available_backends
from .candidates import BlockPartition, Candidate, candidate_count, find_candidates, partition
from .los import ObserverSpec, is_visible, los_profile
from .siting import CumulativeShed, SiteParams, SitingResult, coverage, marginal_gain, site
from .terrain import (GridPoint, TerrainError, TerrainGrid, elevation_between, generate_fractal,
                      load_ascii_grid, load_binary, write_ascii_grid, write_binary)
from .viewshed import Viewshed, ViewshedSet, compute_all_viewsheds, compute_viewshed, popcount
from .vix import VixMap, estimate_vix

__version__ = "0.1.0"

__all__ = [
    "BlockPartition", "Candidate", "CumulativeShed", "GridPoint", "ObserverSpec", "SiteParams",
    "SitingResult", "TerrainError", "TerrainGrid", "Viewshed", "ViewshedSet", "VixMap",
    "available_backends", "candidate_count", "compute_all_viewsheds", "compute_viewshed",
    "coverage", "elevation_between", "estimate_vix", "find_candidates", "generate_fractal",
    "is_visible", "load_ascii_grid", "load_binary", "los_profile", "marginal_gain",
    "partition", "popcount", "site", "write_ascii_grid", "write_binary",
]
