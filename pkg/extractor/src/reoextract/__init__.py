"""Feature-pack extractor: turns images and caption text into the region
and word tensors the scoring engine consumes."""

from .checkpoint import Checkpoint, build_demo_checkpoint, load_checkpoint, save_checkpoint
from .extract import ExtractionJob, extract
from .packwriter import write_manifest, write_tensor
from .regions import DESCRIPTOR_DIM, region_descriptors
from .textenc import tokenize, word_features

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "DESCRIPTOR_DIM",
    "ExtractionJob",
    "build_demo_checkpoint",
    "extract",
    "load_checkpoint",
    "region_descriptors",
    "save_checkpoint",
    "tokenize",
    "word_features",
    "write_manifest",
    "write_tensor",
]
