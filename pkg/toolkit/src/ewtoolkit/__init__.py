"""Training, export, and wire-protocol serving for the recycling classifier.

Heavy submodules (training, lrfinder, server) import keras lazily via their
own modules; importing the package root stays cheap.
"""

from .datasets import (
    CATEGORIES,
    DatasetError,
    ManifestEntry,
    SplitManifests,
    read_manifest,
    scan_source,
    split_dataset,
    split_entries,
    write_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES",
    "DatasetError",
    "ManifestEntry",
    "SplitManifests",
    "read_manifest",
    "scan_source",
    "split_dataset",
    "split_entries",
    "write_manifest",
]
