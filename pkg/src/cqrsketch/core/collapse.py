"""
Table-collapse diagnostics for multi-column assignment tables

An assignment table has one row per id and one column per partition; entry
(i, j) is the codeword id i uses in partition j. Collapse shows up as a
column with low entropy (few codewords in use) or as a pair of columns that
carry no more information together than one does alone.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..utils.validation import CQRValidationError


@dataclass(frozen=True, eq=False)
class AssignmentTable:
    """n x c integer codes with per-column alphabet sizes"""

    entries: np.ndarray
    alphabet_sizes: Optional[Sequence[int]] = None

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries)
        if entries.ndim != 2:
            raise CQRValidationError(f"assignment table must be 2-D (got shape {entries.shape})")
        if entries.size and (
            not np.issubdtype(entries.dtype, np.integer) or entries.min() < 0
        ):
            raise CQRValidationError("assignment entries must be non-negative integers")
        entries = entries.astype(np.int64)
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

        if self.alphabet_sizes is None:
            sizes = entries.max(axis=0) + 1 if entries.shape[0] else np.zeros(entries.shape[1])
            object.__setattr__(self, "alphabet_sizes", tuple(int(s) for s in sizes))
        else:
            sizes = tuple(int(s) for s in self.alphabet_sizes)
            if len(sizes) != entries.shape[1]:
                raise CQRValidationError(
                    f"got {len(sizes)} alphabet sizes for {entries.shape[1]} columns"
                )
            for j, size in enumerate(sizes):
                if entries.shape[0] and entries[:, j].max() >= size:
                    raise CQRValidationError(f"column {j} has an entry >= its alphabet size {size}")
            object.__setattr__(self, "alphabet_sizes", sizes)

    @classmethod
    def from_codes(cls, codes, alphabet_sizes: Optional[Sequence[int]] = None) -> "AssignmentTable":
        return cls(entries=np.asarray(codes), alphabet_sizes=alphabet_sizes)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def c(self) -> int:
        return self.entries.shape[1]


def _entropy(codes: np.ndarray) -> float:
    """Shannon entropy (nats) of the empirical distribution of codes"""
    if codes.size == 0:
        return 0.0
    _, counts = np.unique(codes, return_counts=True)
    p = counts / codes.size
    return float(-np.sum(p * np.log(p)))


def _joint_codes(entries: np.ndarray, columns: Sequence[int]) -> np.ndarray:
    """
    Injective mixed-radix code of a tuple of columns.

    For a pair this is a + (max_a + 1) * b, the joint histogram key.
    """
    code = np.zeros(entries.shape[0], dtype=np.int64)
    radix = 1
    for j in columns:
        column = entries[:, j]
        code = code + radix * column
        radix *= int(column.max()) + 1 if column.size else 1
    return code


def column_entropy(t: AssignmentTable, j: int) -> float:
    if not 0 <= j < t.c:
        raise CQRValidationError(f"column {j} out of range [0, {t.c})")
    return _entropy(t.entries[:, j])


def per_column_entropies(t: AssignmentTable) -> List[float]:
    return [column_entropy(t, j) for j in range(t.c)]


def h1(t: AssignmentTable) -> float:
    """Minimum column entropy"""
    if t.c < 1:
        raise CQRValidationError("h1 needs at least one column")
    return min(per_column_entropies(t))


def ht(t: AssignmentTable, order: int) -> float:
    """Minimum joint entropy over all column subsets of size order"""
    if order < 1:
        raise CQRValidationError(f"tuple order must be >= 1 (got {order})")
    if t.c < order:
        raise CQRValidationError(f"order {order} needs at least {order} columns (got {t.c})")
    return min(
        _entropy(_joint_codes(t.entries, columns)) for columns in combinations(range(t.c), order)
    )


def h2(t: AssignmentTable) -> float:
    """Minimum pairwise joint entropy"""
    if t.c < 2:
        raise CQRValidationError(f"h2 needs at least two columns (got {t.c})")
    return ht(t, 2)


def reference_entropies(reference: AssignmentTable) -> Dict[str, float]:
    """h1/h2 of a reference table, e.g. product quantization of a full table"""
    result = {"h1": h1(reference)}
    if reference.c >= 2:
        result["h2"] = h2(reference)
    return result


def collapse_report(
    t: AssignmentTable,
    tuple_order: Optional[int] = None,
    reference: Optional[AssignmentTable] = None,
) -> Dict[str, Any]:
    """h1, h2 (when c >= 2) and per-column entropies, plus optional extras"""
    report: Dict[str, Any] = {
        "n": t.n,
        "c": t.c,
        "h1": h1(t),
        "h2": h2(t) if t.c >= 2 else None,
        "per_column": per_column_entropies(t),
        "max_entropy": [float(np.log(size)) if size > 0 else 0.0 for size in t.alphabet_sizes],
    }
    if tuple_order is not None:
        report[f"h{tuple_order}"] = ht(t, tuple_order)
    if reference is not None:
        report["reference"] = reference_entropies(reference)
    return report
