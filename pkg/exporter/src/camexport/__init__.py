"""camexport: bridge from torch models to the attribution engine's formats."""

from .containers import ContainerError, read_container, write_container
from .export import ExportSpec, export, negate_and_export
from .manifest import MANIFEST_SCHEMA, read_manifest, validate_manifest, write_manifest

__all__ = [
    "ContainerError",
    "ExportSpec",
    "MANIFEST_SCHEMA",
    "export",
    "negate_and_export",
    "read_container",
    "read_manifest",
    "validate_manifest",
    "write_container",
    "write_manifest",
]
