"""heliobridge: neural feature export into FEAT1 files.

The metric toolkit never touches a neural runtime; this package owns the
torch side and talks to it only through files (PNG/HTIL in, FEAT1 out).
"""

__version__ = "0.1.0"

from .errors import BridgeError, MissingCheckpoint, MissingDependency, UnreadableImage
from .extractors import ExtractorSpec, extract_folder
from .feat1 import write_feat1

__all__ = [
    "BridgeError",
    "ExtractorSpec",
    "MissingCheckpoint",
    "MissingDependency",
    "UnreadableImage",
    "extract_folder",
    "write_feat1",
]
