"""Readers for run manifests, sketches and table checkpoints"""

import json
from pathlib import Path
from typing import Any, Dict, Union

from ..core import sketch
from ..core.models import RunManifest
from ..core.sketch import SparseHashMatrix
from ..core.training import CompressedTable
from ..utils.validation import CQRValidationError


def read_json(filepath: Union[str, Path]) -> Dict[str, Any]:
    path = Path(filepath)
    if not path.exists():
        raise CQRValidationError(f"file {path} does not exist")
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise CQRValidationError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise CQRValidationError(f"{path}: expected a JSON object at top level")
    return data


def read_manifest(filepath: Union[str, Path]) -> RunManifest:
    data = read_json(filepath)
    try:
        return RunManifest.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise CQRValidationError(f"{filepath}: invalid manifest ({e})") from None


def read_sketch(filepath: Union[str, Path]) -> SparseHashMatrix:
    """Rebuild a sketch from its spec or explicit rows"""
    return sketch.from_dict(read_json(filepath))


def read_checkpoint(filepath: Union[str, Path]) -> CompressedTable:
    return CompressedTable.from_dict(read_json(filepath))
