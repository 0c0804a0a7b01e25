"""Hierarchical graph transformer for brain connectivity classification."""

__version__ = "0.1.0"

from .errors import BrainHGTError
from .graph import omst_sparsify, pearson_correlation, threshold_sparsify
from .model import BrainHGT, ModelConfig

__all__ = ["BrainHGT", "BrainHGTError", "ModelConfig", "omst_sparsify",
           "pearson_correlation", "threshold_sparsify", "__version__"]
