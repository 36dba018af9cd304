"""
CSV output for traces, theorem summaries and loss curves

Floats are written with 17 significant digits so a rerun produces a
byte-identical file. Rows are sorted before writing, which keeps output
independent of the order parallel repetitions finished in.
"""

import csv
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union


class CSVWriter:
    """Write dict rows under a fixed header"""

    def __init__(self, columns: Sequence[str], sort_keys: Optional[Sequence[str]] = None):
        self.columns = list(columns)
        self.sort_keys = list(sort_keys) if sort_keys is not None else None

    @staticmethod
    def format_value(value: Any) -> str:
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            if math.isnan(value):
                return "nan"
            if math.isinf(value):
                return "inf" if value > 0 else "-inf"
            return f"{value:.17g}"
        return str(value)

    def _ordered(self, rows: Iterable[Dict[str, Any]]) -> List[Dict[str, Any]]:
        rows = list(rows)
        if self.sort_keys:
            keys = self.sort_keys
            rows.sort(key=lambda row: tuple(row[key] for key in keys))
        return rows

    def write_string(self, rows: Iterable[Dict[str, Any]]) -> str:
        lines = [",".join(self.columns)]
        for row in self._ordered(rows):
            lines.append(",".join(self.format_value(row.get(column)) for column in self.columns))
        return "\n".join(lines) + "\n"

    def write(self, filepath: Union[str, Path], rows: Iterable[Dict[str, Any]]) -> Path:
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.write_string(rows))
        return path


def write_assignment_table(filepath: Union[str, Path], entries) -> Path:
    """Write integer codes as a header-less CSV, one row per id"""
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in entries:
            writer.writerow([int(value) for value in row])
    return path
