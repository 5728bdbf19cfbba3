"""Heap patience sorting and Hammersley tree processes."""

from .distributions import Atom, OffspringDistribution, RandomStream
from .experiments import EstimateReport, run_manifest
from .hammersley_process import SourcesSinks, simulate
from .heap_sort import SortState, root_count, sort
from .kernels import BACKEND
from .record import GraphicalRecord
from .root_process import RootConfiguration, evolve

__version__ = "0.1.0"

__all__ = [
    "Atom", "OffspringDistribution", "RandomStream", "EstimateReport", "run_manifest",
    "SourcesSinks", "simulate", "SortState", "root_count", "sort", "BACKEND",
    "GraphicalRecord", "RootConfiguration", "evolve", "__version__",
]
