"""AttributionManifest JSON schema and helpers."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["clip_id", "pred_class", "pred_score", "target_dims", "layers"],
    "properties": {
        "clip_id": {"type": "string"},
        "pred_class": {"type": "integer"},
        "pred_score": {"type": "number"},
        "target_dims": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 2,
            "maxItems": 3,
        },
        "layers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "alpha", "grad"],
                "properties": {
                    "id": {"type": "string"},
                    "alpha": {"type": "string"},
                    "grad": {"type": "string"},
                },
            },
        },
        "counterfactual": {"type": "boolean"},
    },
    "additionalProperties": False,
}


def validate_manifest(doc: dict) -> None:
    jsonschema.validate(doc, MANIFEST_SCHEMA)


def write_manifest(doc: dict, path) -> None:
    validate_manifest(doc)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_manifest(path) -> dict:
    doc = json.loads(Path(path).read_text())
    validate_manifest(doc)
    return doc
