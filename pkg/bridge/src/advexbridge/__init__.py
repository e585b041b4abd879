"""Bridge between torch models / reference datasets and the AXW1/AXT1 formats."""

from .data import DATASET_NAMES, export_dataset
from .export import DEFAULT_LAYER_MAPPING, ExportSpec, UnsupportedLayerError, export_weights
from .parity import parity_check

__version__ = "0.1.0"
