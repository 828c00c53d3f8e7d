"""CONGEST-model simulator and sampling-based (degree+1)-list coloring."""

from . import (bitio, coloring, dense, generators, hashing, oracle,
               pipeline, probe, runtime, sketch, trials)
from .pipeline import PipelineConfig, run_d1lc, verify_coloring
from .runtime import Graph, Network

__version__ = "0.1.0"

__all__ = [
    "bitio", "coloring", "dense", "generators", "hashing", "oracle",
    "pipeline", "probe", "runtime", "sketch", "trials",
    "PipelineConfig", "run_d1lc", "verify_coloring", "Graph", "Network",
    "__version__",
]
