"""JSON output for reports, manifests, sketches and table checkpoints"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from ..core import sketch
from ..core.models import RunManifest
from ..core.sketch import SparseHashMatrix
from ..core.training import CompressedTable


def _plain(value: Any) -> Any:
    """numpy scalars and arrays as JSON-native values"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(data: Dict[str, Any]) -> str:
    """Stable text form: sorted keys, two-space indent, trailing newline"""
    return json.dumps(data, indent=2, sort_keys=True, default=_plain) + "\n"


def write_json(filepath: Union[str, Path], data: Dict[str, Any]) -> Path:
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(data))
    return path


def manifest_path(output: Union[str, Path]) -> Path:
    """<out>.manifest.json next to the main output"""
    return Path(output).with_suffix(".manifest.json")


def write_manifest(output: Union[str, Path], manifest: RunManifest) -> Path:
    return write_json(manifest_path(output), manifest.to_dict())


def write_sketch(filepath: Union[str, Path], h: SparseHashMatrix) -> Path:
    return write_json(filepath, sketch.to_dict(h))


def write_checkpoint(
    filepath: Union[str, Path], table: CompressedTable, metadata: Optional[Dict[str, Any]] = None
) -> Path:
    """Table checkpoint; metadata (e.g. the cluster report) rides along unread"""
    data = table.to_dict()
    if metadata:
        data["metadata"] = metadata
    return write_json(filepath, data)
