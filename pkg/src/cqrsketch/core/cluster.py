"""
Lloyd's k-means over embedding-table rows

The assignments of a clustering are the learned H of a CQR step and the
centroids are its codebook M. Besides full k-means this module offers a
subsampled variant for tables too large to cluster whole, product
quantization (independent k-means per column block) and assignment to a
random Gaussian codebook.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.validation import NonFiniteError
from .hashing import derive_seed, make_rng
from .linalg import sample_gaussian

DEFAULT_MAX_ITERS = 50

# Rows x centroids distance entries computed per batch
_DISTANCE_BUDGET = 1 << 22


@dataclass
class KMeansResult:
    """A clustering of the rows of T"""

    assignments: np.ndarray
    centroids: np.ndarray
    cost: float
    iterations_run: int
    cost_history: List[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.centroids[self.assignments]


@dataclass
class PQResult:
    """Product quantization: one KMeansResult per column block"""

    column_slices: List[np.ndarray]
    blocks: List[KMeansResult]

    @property
    def assignments(self) -> np.ndarray:
        """d1 x blocks code matrix"""
        return np.stack([block.assignments for block in self.blocks], axis=1)

    @property
    def cost(self) -> float:
        return float(sum(block.cost for block in self.blocks))

    def reconstruct(self) -> np.ndarray:
        rows = self.blocks[0].assignments.size
        width = sum(columns.size for columns in self.column_slices)
        table = np.zeros((rows, width))
        for columns, block in zip(self.column_slices, self.blocks):
            table[:, columns] = block.reconstruct()
        return table


def _batch_rows(k: int, batch_size: Optional[int]) -> int:
    if batch_size is not None:
        return max(1, int(batch_size))
    return max(1, _DISTANCE_BUDGET // max(k, 1))


def assign_nearest(
    t: np.ndarray, centroids: np.ndarray, batch_size: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nearest centroid for every row, with its squared distance.

    Distances are exact differences (no norm expansion); ties go to the
    lowest centroid index.
    """
    rows = t.shape[0]
    step = _batch_rows(centroids.shape[0], batch_size)
    labels = np.empty(rows, dtype=np.int64)
    distances = np.empty(rows)
    for start in range(0, rows, step):
        chunk = t[start : start + step]
        squared = ((chunk[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        best = np.argmin(squared, axis=1)
        labels[start : start + step] = best
        distances[start : start + step] = squared[np.arange(chunk.shape[0]), best]
    return labels, distances


def _plus_plus_init(t: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    rows = t.shape[0]
    first = int(rng.integers(rows))
    centroids = np.empty((k, t.shape[1]))
    centroids[0] = t[first]
    closest = ((t - t[first]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # every row already coincides with a centroid
            centroids[j:] = t[first]
            break
        draw = rng.random() * total
        chosen = min(int(np.searchsorted(np.cumsum(closest), draw, side="right")), rows - 1)
        centroids[j] = t[chosen]
        closest = np.minimum(closest, ((t - t[chosen]) ** 2).sum(axis=1))
    return centroids


def _update_centroids(t: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros_like(centroids)
    np.add.at(sums, labels, t)
    updated = centroids.copy()
    filled = counts > 0
    updated[filled] = sums[filled] / counts[filled, None]

    empty = np.flatnonzero(~filled)
    if empty.size:
        # reseed empty clusters at the rows farthest from their centroid
        spread = ((t - updated[labels]) ** 2).sum(axis=1)
        farthest = np.argsort(-spread, kind="stable")[: empty.size]
        updated[empty[: farthest.size]] = t[farthest]
    return updated


def kmeans(
    t: np.ndarray,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    batch_size: Optional[int] = None,
) -> KMeansResult:
    """
    Lloyd's algorithm with k-means++ seeding.

    Stops when no assignment changes or after max_iters updates. The
    returned assignments always point at the nearest returned centroid and
    cost_history is nonincreasing.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1 (got {k})")
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] < 1:
        raise ValueError(f"kmeans needs a non-empty 2-D table (got shape {t.shape})")
    if not np.all(np.isfinite(t)):
        raise NonFiniteError("kmeans input contains NaN or Inf entries")

    rng = make_rng(seed, 0)
    centroids = _plus_plus_init(t, k, rng)
    labels, distances = assign_nearest(t, centroids, batch_size)
    history = [float(distances.sum())]

    iterations = 0
    for iterations in range(1, max_iters + 1):
        centroids = _update_centroids(t, labels, centroids)
        new_labels, distances = assign_nearest(t, centroids, batch_size)
        history.append(float(distances.sum()))
        changed = not np.array_equal(new_labels, labels)
        labels = new_labels
        if not changed:
            break

    return KMeansResult(
        assignments=labels,
        centroids=centroids,
        cost=history[-1],
        iterations_run=iterations,
        cost_history=history,
    )


def subsampled_kmeans(
    t_oracle: Callable[[np.ndarray], np.ndarray],
    d1: int,
    sample_size: int,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    batch_size: Optional[int] = None,
    sample: Optional[Sequence[int]] = None,
) -> KMeansResult:
    """
    Fit centroids on a row sample, then assign all d1 rows.

    t_oracle maps an array of row ids to those rows of T. Rows are fetched
    in batches during assignment, so at most sample_size + batch rows are
    held at once. An explicit sample overrides the seeded uniform draw.
    """
    if sample is not None:
        chosen = np.asarray(sample, dtype=np.int64)
    elif sample_size == d1:
        chosen = np.arange(d1, dtype=np.int64)
    else:
        if not 1 <= sample_size <= d1:
            raise ValueError(f"sample_size must be in [1, d1={d1}] (got {sample_size})")
        chosen = np.sort(make_rng(seed, 1).choice(d1, size=sample_size, replace=False))
    if chosen.size == 0:
        raise ValueError("sample_size must be >= 1")

    fitted = kmeans(t_oracle(chosen), k, seed, max_iters=max_iters, batch_size=batch_size)

    step = _batch_rows(k, batch_size)
    labels = np.empty(d1, dtype=np.int64)
    distances = np.empty(d1)
    for start in range(0, d1, step):
        ids = np.arange(start, min(start + step, d1))
        labels[ids], distances[ids] = assign_nearest(t_oracle(ids), fitted.centroids, batch_size)

    return KMeansResult(
        assignments=labels,
        centroids=fitted.centroids,
        cost=float(distances.sum()),
        iterations_run=fitted.iterations_run,
        cost_history=fitted.cost_history,
    )


def gaussian_codebook_assign(t: np.ndarray, k: int, seed: int) -> KMeansResult:
    """Assign rows to a random Gaussian codebook whose codewords have T's RMS row norm"""
    t = np.asarray(t, dtype=np.float64)
    rms = np.sqrt(np.mean(np.sum(t**2, axis=1)))
    codebook = sample_gaussian(k, t.shape[1], seed) * (rms / np.sqrt(t.shape[1]))
    labels, distances = assign_nearest(t, codebook)
    cost = float(distances.sum())
    return KMeansResult(
        assignments=labels, centroids=codebook, cost=cost, iterations_run=0, cost_history=[cost]
    )


def product_quantize(
    t: np.ndarray, blocks: int, k: int, seed: int, max_iters: int = DEFAULT_MAX_ITERS
) -> PQResult:
    """Split the columns of T into blocks and run k-means on each"""
    t = np.asarray(t, dtype=np.float64)
    if not 1 <= blocks <= t.shape[1]:
        raise ValueError(f"blocks must be in [1, {t.shape[1]}] (got {blocks})")
    slices = np.array_split(np.arange(t.shape[1]), blocks)
    results = [
        kmeans(t[:, columns], k, derive_seed(seed, j), max_iters=max_iters)
        for j, columns in enumerate(slices)
    ]
    return PQResult(column_slices=list(slices), blocks=results)
