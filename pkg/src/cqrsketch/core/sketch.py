"""
Hash-based sparse sketch matrices

Every training-time compression scheme handled here is a sparse d1 x k
matrix H, and the embedding of id i is (e_i H) M. SparseHashMatrix stores H
in CSR form (indptr/indices/data); rows are sorted by column and hold no
duplicate columns.

Seed-derived families (hashing trick, hash embeddings, count sketch, QR
concat/hybrid) can be rebuilt from their SketchSpec, so serialization stores
the spec only. Assignment matrices produced by clustering are data dependent
and are stored explicitly.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from ..utils.validation import DimensionMismatchError
from .hashing import FAMILY_TAGS, hash_rows, hash_signs, make_rng, reduce_range


class SketchFamily(str, Enum):
    HASHING_TRICK = "hashing_trick"
    HASH_EMBEDDING = "hash_embedding"
    COUNT_SKETCH = "count_sketch"
    QR_CONCAT = "qr_concat"
    QR_HYBRID = "qr_hybrid"
    ASSIGNMENT = "assignment"
    CONCAT = "concat"


SEEDED_FAMILIES = {
    SketchFamily.HASHING_TRICK,
    SketchFamily.HASH_EMBEDDING,
    SketchFamily.COUNT_SKETCH,
    SketchFamily.QR_CONCAT,
    SketchFamily.QR_HYBRID,
}
BLOCKED_FAMILIES = {SketchFamily.QR_CONCAT, SketchFamily.QR_HYBRID}


class SketchSpecError(ValueError):
    """Raised for an invalid SketchSpec or a row that breaks its family's shape"""


@dataclass(frozen=True)
class SketchSpec:
    """Everything needed to rebuild a seed-derived sketch"""

    family: str
    d1: int
    k: int = 0
    blocks: int = 0
    rows_per_block: int = 0
    hashes_per_block: int = 2
    weighted: bool = False  # hash_embedding / blocked: static ±1 weights
    signed: bool = True  # count_sketch: random ±1 per row
    injective: bool = False  # hashing_trick with k >= d1: seeded permutation
    seed: int = 0

    @property
    def kind(self) -> SketchFamily:
        return SketchFamily(self.family)

    @property
    def num_cols(self) -> int:
        if self.kind in BLOCKED_FAMILIES:
            return self.blocks * self.rows_per_block
        return self.k

    @property
    def hashes(self) -> int:
        """Hashes per block for blocked families (qr_concat always uses one)"""
        if self.kind == SketchFamily.QR_CONCAT:
            return 1
        return self.hashes_per_block

    def validate(self) -> None:
        try:
            kind = self.kind
        except ValueError:
            raise SketchSpecError(f"unknown sketch family {self.family!r}") from None
        if kind not in SEEDED_FAMILIES:
            raise SketchSpecError(f"{self.family} sketches are not seed-derived")
        if self.d1 < 1:
            raise SketchSpecError(f"d1 must be >= 1 (got {self.d1})")
        if kind in BLOCKED_FAMILIES:
            if self.blocks < 1 or self.rows_per_block < 1:
                raise SketchSpecError(
                    f"blocks * rows_per_block must be positive "
                    f"(got {self.blocks} x {self.rows_per_block})"
                )
            if self.hashes < 1:
                raise SketchSpecError(f"hashes_per_block must be >= 1 (got {self.hashes})")
        elif self.k < 1:
            raise SketchSpecError(f"k must be >= 1 (got {self.k})")
        if self.injective and (kind != SketchFamily.HASHING_TRICK or self.k < self.d1):
            raise SketchSpecError("injective hashing needs the hashing_trick family with k >= d1")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SketchSpec":
        return cls(**data)


@dataclass(frozen=True)
class SparseRow:
    """The sketch e_i H of one id: (column, weight) pairs of a length-k vector"""

    indices: np.ndarray
    weights: np.ndarray
    length: int

    def pairs(self) -> List[Tuple[int, float]]:
        return [(int(c), float(w)) for c, w in zip(self.indices, self.weights)]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.length)
        dense[self.indices] = self.weights
        return dense


@dataclass(frozen=True, eq=False)
class SparseHashMatrix:
    """d1 x k sparse linear map in CSR form"""

    num_rows: int
    num_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    family: str = SketchFamily.CONCAT.value
    spec: Optional[SketchSpec] = None
    parts: Tuple["SparseHashMatrix", ...] = ()

    def __post_init__(self) -> None:
        for name in ("indptr", "indices", "data"):
            getattr(self, name).flags.writeable = False
        self._check_structure()
        self._check_family_shape()

    def _check_structure(self) -> None:
        if self.indptr.shape != (self.num_rows + 1,) or self.indptr[0] != 0:
            raise SketchSpecError("indptr must have num_rows + 1 entries starting at 0")
        nnz = int(self.indptr[-1])
        if self.indices.shape != (nnz,) or self.data.shape != (nnz,):
            raise SketchSpecError("indices and data must hold indptr[-1] entries")
        if nnz == 0:
            return
        if self.indices.min() < 0 or self.indices.max() >= self.num_cols:
            raise SketchSpecError(f"column index out of range [0, {self.num_cols})")
        row_ids = np.repeat(np.arange(self.num_rows, dtype=np.int64), self.row_lengths)
        keys = row_ids * self.num_cols + self.indices
        if np.unique(keys).size != nnz:
            raise SketchSpecError("duplicate column index within a row")

    def _check_family_shape(self) -> None:
        family = SketchFamily(self.family)
        lengths = self.row_lengths
        magnitudes = np.abs(self.data)

        if family in (SketchFamily.HASHING_TRICK, SketchFamily.ASSIGNMENT):
            if np.any(lengths != 1) or np.any(self.data != 1.0):
                raise SketchSpecError(f"{family.value} rows need exactly one entry of weight 1")
        elif family == SketchFamily.COUNT_SKETCH:
            if np.any(lengths != 1) or np.any(magnitudes != 1.0):
                raise SketchSpecError("count_sketch rows need exactly one ±1 entry")
        elif family == SketchFamily.HASH_EMBEDDING:
            row_of_entry = np.repeat(lengths, lengths)
            pair_ok = (row_of_entry == 2) & (magnitudes == 1.0)
            merged_ok = (row_of_entry == 1) & (magnitudes == 2.0)
            # opposite weights on one column cancel to an empty row
            shortest = 0 if self._weighted else 1
            if np.any((lengths < shortest) | (lengths > 2)) or not np.all(pair_ok | merged_ok):
                raise SketchSpecError(
                    "hash_embedding rows need two unit entries or one merged entry"
                )
        elif family in BLOCKED_FAMILIES:
            self._check_blocks(family, lengths)

    def _check_blocks(self, family: SketchFamily, lengths: np.ndarray) -> None:
        if self.spec is None:
            raise SketchSpecError(f"{family.value} matrices carry their spec")
        blocks, width, hashes = self.spec.blocks, self.spec.rows_per_block, self.spec.hashes
        row_ids = np.repeat(np.arange(self.num_rows), lengths)
        per_block = np.zeros((self.num_rows, blocks), dtype=np.int64)
        np.add.at(per_block, (row_ids, self.indices // width), 1)
        if family == SketchFamily.QR_CONCAT:
            if np.any(per_block != 1):
                raise SketchSpecError("qr_concat rows need exactly one entry per block")
        else:
            fewest = 0 if self._weighted else 1
            if np.any(per_block < fewest) or np.any(per_block > hashes):
                raise SketchSpecError(
                    f"qr_hybrid rows need between {fewest} and {hashes} entries per block"
                )

    @property
    def _weighted(self) -> bool:
        return self.spec is not None and self.spec.weighted

    @property
    def row_lengths(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.num_rows, self.num_cols)
        )

    @property
    def is_seed_derived(self) -> bool:
        return self.spec is not None

    @property
    def index_count(self) -> int:
        """Integers stored to persist H: 0 when seed-derived, d1 per assignment block"""
        if self.spec is not None:
            return 0
        if self.parts:
            return sum(part.index_count for part in self.parts)
        if self.family == SketchFamily.ASSIGNMENT.value:
            return self.num_rows
        return self.nnz


def _assemble(
    cols: np.ndarray,
    weights: np.ndarray,
    num_cols: int,
    family: SketchFamily,
    spec: Optional[SketchSpec] = None,
) -> SparseHashMatrix:
    """
    CSR matrix from per-row slots; duplicate columns within a row are summed
    and entries that cancel to zero are dropped
    """
    num_rows, slots = cols.shape
    rows = np.repeat(np.arange(num_rows), slots)
    coo = sparse.coo_matrix(
        (weights.ravel().astype(np.float64), (rows, cols.ravel())), shape=(num_rows, num_cols)
    )
    csr = coo.tocsr()
    csr.sum_duplicates()
    csr.eliminate_zeros()
    csr.sort_indices()
    return SparseHashMatrix(
        num_rows=num_rows,
        num_cols=num_cols,
        indptr=csr.indptr.astype(np.int64),
        indices=csr.indices.astype(np.int64),
        data=csr.data.astype(np.float64),
        family=family.value,
        spec=spec,
    )


def build(spec: SketchSpec) -> SparseHashMatrix:
    """
    Build a seed-derived sketch.

    Row i's entries depend only on hash(seed, family, block, i), so the same
    spec always yields the same matrix.
    """
    spec.validate()
    family = spec.kind
    ids = np.arange(spec.d1, dtype=np.int64)
    name = family.value

    if family == SketchFamily.HASHING_TRICK:
        if spec.injective:
            cols = make_rng(spec.seed, FAMILY_TAGS[name]).permutation(spec.k)[: spec.d1]
        else:
            cols = reduce_range(hash_rows(spec.seed, name, 0, ids), spec.k)
        cols = cols[:, None]
        weights = np.ones_like(cols, dtype=np.float64)

    elif family == SketchFamily.HASH_EMBEDDING:
        cols = np.stack(
            [reduce_range(hash_rows(spec.seed, name, t, ids), spec.k) for t in range(2)], axis=1
        )
        weights = np.ones(cols.shape)
        if spec.weighted:
            weights = np.stack(
                [hash_signs(hash_rows(spec.seed, "weight", t, ids)) for t in range(2)], axis=1
            )

    elif family == SketchFamily.COUNT_SKETCH:
        cols = reduce_range(hash_rows(spec.seed, name, 0, ids), spec.k)[:, None]
        weights = np.ones(cols.shape)
        if spec.signed:
            weights = hash_signs(hash_rows(spec.seed, "sign", 0, ids))[:, None]

    else:
        width, hashes = spec.rows_per_block, spec.hashes
        columns, signs = [], []
        for block in range(spec.blocks):
            for t in range(hashes):
                slot = block * hashes + t
                hashes_in_block = hash_rows(spec.seed, name, slot, ids)
                columns.append(block * width + reduce_range(hashes_in_block, width))
                if spec.weighted:
                    signs.append(hash_signs(hash_rows(spec.seed, "weight", slot, ids)))
                else:
                    signs.append(np.ones(spec.d1))
        cols = np.stack(columns, axis=1)
        weights = np.stack(signs, axis=1)

    return _assemble(cols, weights, spec.num_cols, family, spec=spec)


def count_sketch(d1: int, k: int, seed: int, signed: bool = True) -> SparseHashMatrix:
    return build(SketchSpec(SketchFamily.COUNT_SKETCH.value, d1, k=k, signed=signed, seed=seed))


def empty(d1: int) -> SparseHashMatrix:
    """d1 x 0 matrix, the identity for hconcat"""
    return SparseHashMatrix(
        num_rows=d1,
        num_cols=0,
        indptr=np.zeros(d1 + 1, dtype=np.int64),
        indices=np.zeros(0, dtype=np.int64),
        data=np.zeros(0),
    )


def _check_row(h: SparseHashMatrix, i: int) -> None:
    if not 0 <= i < h.num_rows:
        raise IndexError(f"row {i} out of range [0, {h.num_rows})")


def apply_row(h: SparseHashMatrix, i: int) -> SparseRow:
    """The sketch of id i"""
    _check_row(h, i)
    start, stop = h.indptr[i], h.indptr[i + 1]
    return SparseRow(indices=h.indices[start:stop], weights=h.data[start:stop], length=h.num_cols)


def embed(h: SparseHashMatrix, m: np.ndarray, i: int) -> np.ndarray:
    """T[i] = (e_i H) M without forming T"""
    if h.num_cols != m.shape[0]:
        raise DimensionMismatchError(f"H has {h.num_cols} columns but M has {m.shape[0]} rows")
    row = apply_row(h, i)
    return row.weights @ m[row.indices]


def lookup(h: SparseHashMatrix, m: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Rows of HM for a batch of ids"""
    if h.num_cols != m.shape[0]:
        raise DimensionMismatchError(f"H has {h.num_cols} columns but M has {m.shape[0]} rows")
    return np.asarray(h.csr[np.asarray(ids)] @ m)


def materialize(h: SparseHashMatrix) -> np.ndarray:
    return h.csr.toarray()


def sketch_product(x: np.ndarray, h: SparseHashMatrix) -> np.ndarray:
    """X H as a dense n x k array"""
    if x.shape[1] != h.num_rows:
        raise DimensionMismatchError(f"X has {x.shape[1]} columns but H has {h.num_rows} rows")
    return np.asarray((h.csr.T @ np.asarray(x).T).T)


def hconcat(a: SparseHashMatrix, b: SparseHashMatrix) -> SparseHashMatrix:
    """[a | b]; b's columns are offset by a.num_cols"""
    if a.num_rows != b.num_rows:
        raise DimensionMismatchError(f"row counts differ ({a.num_rows} vs {b.num_rows})")
    if b.num_cols == 0:
        return a
    if a.num_cols == 0:
        return b

    len_a, len_b = a.row_lengths, b.row_lengths
    indptr = np.concatenate([[0], np.cumsum(len_a + len_b)]).astype(np.int64)
    indices = np.empty(int(indptr[-1]), dtype=np.int64)
    data = np.empty(int(indptr[-1]))

    rows_a = np.repeat(np.arange(a.num_rows), len_a)
    dest_a = indptr[rows_a] + (np.arange(a.nnz) - a.indptr[rows_a])
    rows_b = np.repeat(np.arange(b.num_rows), len_b)
    dest_b = indptr[rows_b] + len_a[rows_b] + (np.arange(b.nnz) - b.indptr[rows_b])

    indices[dest_a], data[dest_a] = a.indices, a.data
    indices[dest_b], data[dest_b] = b.indices + a.num_cols, b.data

    return SparseHashMatrix(
        num_rows=a.num_rows,
        num_cols=a.num_cols + b.num_cols,
        indptr=indptr,
        indices=indices,
        data=data,
        family=SketchFamily.CONCAT.value,
        parts=(a.parts or (a,)) + (b.parts or (b,)),
    )


def from_assignments(assign: Sequence[int], k: int) -> SparseHashMatrix:
    """One-hot rows: row i = [(assign[i], 1.0)]"""
    labels = np.asarray(assign, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("assignments must be a flat sequence")
    if k < 1:
        raise SketchSpecError(f"k must be >= 1 (got {k})")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise SketchSpecError(f"assignment index out of range [0, {k})")
    return SparseHashMatrix(
        num_rows=labels.size,
        num_cols=k,
        indptr=np.arange(labels.size + 1, dtype=np.int64),
        indices=labels.copy(),
        data=np.ones(labels.size),
        family=SketchFamily.ASSIGNMENT.value,
    )


def to_dict(h: SparseHashMatrix) -> Dict[str, Any]:
    """Serializable form: the spec, the parts, or explicit rows"""
    header = {"family": h.family, "num_rows": h.num_rows, "num_cols": h.num_cols}
    if h.spec is not None:
        return {**header, "spec": h.spec.to_dict()}
    if h.parts:
        return {**header, "parts": [to_dict(part) for part in h.parts]}
    if h.family == SketchFamily.ASSIGNMENT.value:
        return {**header, "assignments": h.indices.tolist()}
    return {
        **header,
        "rows": {
            "indptr": h.indptr.tolist(),
            "indices": h.indices.tolist(),
            "data": h.data.tolist(),
        },
    }


def from_dict(data: Dict[str, Any]) -> SparseHashMatrix:
    if "spec" in data:
        return build(SketchSpec.from_dict(data["spec"]))
    if "parts" in data:
        result = empty(int(data["num_rows"]))
        for part in data["parts"]:
            result = hconcat(result, from_dict(part))
        return result
    if "assignments" in data:
        return from_assignments(data["assignments"], int(data["num_cols"]))
    rows = data["rows"]
    return SparseHashMatrix(
        num_rows=int(data["num_rows"]),
        num_cols=int(data["num_cols"]),
        indptr=np.asarray(rows["indptr"], dtype=np.int64),
        indices=np.asarray(rows["indices"], dtype=np.int64),
        data=np.asarray(rows["data"], dtype=np.float64),
        family=data.get("family", SketchFamily.CONCAT.value),
    )


def parameter_count(h: SparseHashMatrix) -> int:
    """Stored integers needed to persist H (0 for seed-derived families)"""
    return h.index_count
