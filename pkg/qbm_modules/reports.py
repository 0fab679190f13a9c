#!/usr/bin/env python3
"""
QBM Lab - Report Writing Module
===============================

Every JSON document the laboratory emits (verification reports, manifests,
field sidecars, bracket tables, Ermakov reports) goes through
``write_json_document``: the payload is normalized to plain JSON types,
validated against the shipped schema in ``schemas/`` and written with
sorted keys, so identical runs produce byte-identical files.

Author: QBM Lab Developers
Version: 1.0.0
"""

import json
import logging
import math
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

import jsonschema
import numpy as np

logger = logging.getLogger("qbm_lab.reports")

SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schemas"


@lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    """Load ``schemas/<name>.schema.json``."""
    with open(SCHEMA_DIR / f"{name}.schema.json") as f:
        return json.load(f)


def to_jsonable(obj: Any) -> Any:
    """
    Convert numpy scalars/arrays, tuples, Paths and non-finite floats into
    plain JSON values. Non-finite floats become the strings "inf", "-inf"
    and "nan".
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def validate_document(payload: Dict[str, Any], schema_name: str) -> Dict[str, Any]:
    """
    Normalize and validate a payload.

    Raises:
        jsonschema.ValidationError: payload does not match the schema
    """
    document = to_jsonable(payload)
    jsonschema.validate(instance=document, schema=load_schema(schema_name))
    return document


def dumps_document(document: Dict[str, Any]) -> str:
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json_document(path: Path, payload: Dict[str, Any], schema_name: str) -> Path:
    """Validate against ``schema_name`` and write deterministically."""
    document = validate_document(payload, schema_name)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_document(document))
    logger.debug(f"📝 Wrote {schema_name} document to {path}")
    return path
