"""
Assignment table CSV parser

One row per id, one column per partition, non-negative integer codes. An
optional header row of column names is accepted; every other problem is
reported with its row and column.
"""

import csv
import io
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from ..core.collapse import AssignmentTable
from ..utils.logging import CQRLogger
from ..utils.validation import CQRValidationError


class AssignmentTableParser:
    """Parse CSV text into an AssignmentTable with row/column diagnostics"""

    def __init__(self, has_header: Optional[bool] = None):
        # None: a first row with no integer field is taken as a header
        self.has_header = has_header

    def parse_file(self, filepath: Union[str, Path]) -> AssignmentTable:
        path = Path(filepath)
        if not path.exists():
            raise CQRValidationError(f"input file {path} does not exist")
        with open(path, encoding="utf-8", newline="") as f:
            return self.parse(f.read())

    def parse(self, content: str) -> AssignmentTable:
        rows = [row for row in csv.reader(io.StringIO(content))]
        # csv yields [] for blank lines; row numbers stay 1-based file lines
        numbered = [(line_no, row) for line_no, row in enumerate(rows, 1) if row]
        if not numbered:
            raise CQRValidationError("assignment table is empty")

        if self._is_header(numbered[0][1]):
            CQRLogger.debug(f"header row: {', '.join(numbered[0][1])}")
            numbered = numbered[1:]
            if not numbered:
                raise CQRValidationError("assignment table has a header but no rows")

        width = len(numbered[0][1])
        entries: List[List[int]] = []
        for line_no, row in numbered:
            if len(row) != width:
                raise CQRValidationError(
                    f"row {line_no}: expected {width} columns, found {len(row)}"
                )
            entries.append(
                [self._parse_code(value, line_no, col) for col, value in enumerate(row, 1)]
            )

        return AssignmentTable.from_codes(np.array(entries, dtype=np.int64))

    def _is_header(self, row: List[str]) -> bool:
        if self.has_header is not None:
            return self.has_header
        return all(not value.strip().lstrip("+-").isdigit() for value in row)

    @staticmethod
    def _parse_code(value: str, line_no: int, col: int) -> int:
        text = value.strip()
        try:
            code = int(text)
        except ValueError:
            raise CQRValidationError(
                f"row {line_no}, column {col}: {value!r} is not an integer"
            ) from None
        if code < 0:
            raise CQRValidationError(f"row {line_no}, column {col}: code {code} is negative")
        return code
