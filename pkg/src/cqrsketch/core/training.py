"""
Streaming training of compressed embedding tables

A CompressedTable is T = HM with a fixed sparse H and a trained codebook M.
Training is plain SGD on the squared error of a synthetic regression task
(targets are planted embeddings plus noise). By default the step size decays
as lr / (1 + 2 lr r t), where r is the expected number of hits per codebook
row and sample and t counts samples since H was built; a codebook row then
tracks the running mean of its targets instead of their last few values.

The CQR schedule trains a qr_hybrid table, clusters the learned T into
codewords, expands H with fresh sketch columns and keeps training at the
same parameter budget.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from ..utils.logging import CQRLogger
from ..utils.validation import CQRValidationError, NonFiniteError, ParameterValidator
from . import sketch
from .cluster import DEFAULT_MAX_ITERS, kmeans, product_quantize, subsampled_kmeans
from .hashing import derive_seed, make_rng
from .linalg import sample_gaussian
from .sketch import SketchSpec, SparseHashMatrix

TRAIN_METHODS = ("hashing_trick", "hash_embedding", "qr_concat", "qr_hybrid", "cqr", "pq")
POPULARITY_LAWS = ("uniform", "zipf")
LR_SCHEDULES = ("inverse_time", "constant")

EVAL_SEED = 0x5EED
EVAL_SAMPLES = 2000

# Above this many ids the CQR clustering step fits on a row sample
SUBSAMPLE_THRESHOLD = 100_000


def _block_mask(blocks: int, rows_per_block: int, d2: int) -> np.ndarray:
    """Block j of H owns the j-th column slice of M"""
    mask = np.zeros((blocks * rows_per_block, d2), dtype=bool)
    for j, columns in enumerate(np.array_split(np.arange(d2), blocks)):
        mask[j * rows_per_block : (j + 1) * rows_per_block, columns] = True
    return mask


@dataclass(eq=False)
class CompressedTable:
    """
    Embedding table T = HM.

    mask, when set, marks the trainable entries of M; blocked tables use it
    so every block trains its own slice of the embedding dimensions.
    """

    h: SparseHashMatrix
    m: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.h.num_cols != self.m.shape[0]:
            raise CQRValidationError(
                f"H has {self.h.num_cols} columns but M has {self.m.shape[0]} rows"
            )
        if self.mask is not None and self.mask.shape != self.m.shape:
            raise CQRValidationError("mask must have the shape of M")

    @property
    def d1(self) -> int:
        return self.h.num_rows

    @property
    def d2(self) -> int:
        return self.m.shape[1]

    @property
    def parameter_count(self) -> int:
        """Trainable reals in M"""
        if self.mask is None:
            return int(self.m.size)
        return int(self.mask.sum())

    @property
    def index_count(self) -> int:
        """Stored integers for H (assignment rows count d1 each)"""
        return self.h.index_count

    def embed(self, i: int) -> np.ndarray:
        return sketch.embed(self.h, self.m, i)

    def lookup(self, ids: np.ndarray) -> np.ndarray:
        return sketch.lookup(self.h, self.m, ids)

    def materialize(self) -> np.ndarray:
        return np.asarray(self.h.csr @ self.m)

    def copy(self) -> "CompressedTable":
        mask = None if self.mask is None else self.mask.copy()
        return CompressedTable(h=self.h, m=self.m.copy(), mask=mask)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "h": sketch.to_dict(self.h),
            "m": self.m.tolist(),
            "mask": None if self.mask is None else self.mask.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CompressedTable":
        mask = data.get("mask")
        return cls(
            h=sketch.from_dict(data["h"]),
            m=np.asarray(data["m"], dtype=np.float64).reshape(
                int(data["h"]["num_cols"]), -1
            ),
            mask=None if mask is None else np.asarray(mask, dtype=bool),
        )


@dataclass
class SyntheticStream:
    """
    Regression stream over planted embeddings.

    The ground truth has c cluster centers plus per-id jitter; a sample is an
    id drawn from the popularity law with target ground_truth[id] + noise.
    """

    d1: int
    d2: int
    clusters: int = 64
    noise_sigma: float = 0.0
    jitter: float = 0.05
    popularity: str = "uniform"
    seed: int = 0
    ground_truth: np.ndarray = field(init=False, repr=False)
    _weights: Optional[np.ndarray] = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        if self.d1 < 1 or self.d2 < 1 or self.clusters < 1:
            raise CQRValidationError("d1, d2 and clusters must be >= 1")
        if self.noise_sigma < 0 or self.jitter < 0:
            raise CQRValidationError("noise_sigma and jitter must be >= 0")
        if self.popularity not in POPULARITY_LAWS:
            raise CQRValidationError(
                f"popularity must be one of {', '.join(POPULARITY_LAWS)} (got {self.popularity!r})"
            )
        centers = sample_gaussian(self.clusters, self.d2, self.seed, 0)
        labels = make_rng(self.seed, 1).integers(self.clusters, size=self.d1)
        truth = centers[labels]
        if self.jitter > 0:
            truth = truth + self.jitter * sample_gaussian(self.d1, self.d2, self.seed, 2)
        truth.flags.writeable = False
        self.ground_truth = truth
        if self.popularity == "zipf":
            ranks = make_rng(self.seed, 3).permutation(self.d1) + 1.0
            self._weights = (1.0 / ranks) / np.sum(1.0 / ranks)

    def sample(self, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """count (id, target) pairs"""
        if self._weights is None:
            ids = rng.integers(self.d1, size=count)
        else:
            ids = rng.choice(self.d1, size=count, p=self._weights)
        targets = self.ground_truth[ids]
        if self.noise_sigma > 0:
            targets = targets + self.noise_sigma * rng.standard_normal((count, self.d2))
        return ids, targets


@dataclass
class TrainConfig:
    method: str = "cqr"
    k: int = 64
    learning_rate: float = 0.02
    lr_schedule: str = "inverse_time"
    epochs: int = 5
    blocks: int = 2
    hashes_per_block: int = 2
    cqr_cluster_after: float = 1.0
    cqr_split: float = 0.5
    injective: bool = False
    eval_every: int = 0
    eval_samples: int = EVAL_SAMPLES
    max_iters: int = DEFAULT_MAX_ITERS
    subsample_size: int = SUBSAMPLE_THRESHOLD
    seed: int = 0

    @property
    def cluster_columns(self) -> int:
        """Codewords learned by clustering; the rest are fresh sketch columns"""
        return int(round((1.0 - self.cqr_split) * self.k))

    @property
    def sketch_columns(self) -> int:
        return self.k - self.cluster_columns


@dataclass
class CurvePoint:
    """
    eval_loss is the current table scored on the fixed eval set.
    window_loss is the running mean squared error of the training samples
    since the previous point, each scored just before its update; None at
    step 0.
    """

    step: int
    eval_loss: float
    window_loss: Optional[float] = None


@dataclass
class TrainResult:
    table: CompressedTable
    curve: List[CurvePoint]
    cluster_report: Optional[Dict[str, float]] = None

    @property
    def final_loss(self) -> float:
        return self.curve[-1].eval_loss

    def to_rows(self, method: str, seed: int) -> List[Dict[str, Any]]:
        return [
            {
                "method": method,
                "seed": seed,
                "params": self.table.parameter_count,
                "step": point.step,
                "eval_loss": point.eval_loss,
                "window_loss": point.window_loss,
            }
            for point in self.curve
        ]


def _sgd_update(table: CompressedTable, i: int, target: np.ndarray, lr: float) -> float:
    """In-place M <- M - lr * 2 v^T (vM - target) for v = e_i H; returns the pre-update loss"""
    h = table.h
    start, stop = h.indptr[i], h.indptr[i + 1]
    columns = h.indices[start:stop]
    weights = h.data[start:stop]
    residual = weights @ table.m[columns] - target
    gradient = 2.0 * weights[:, None] * residual[None, :]
    if table.mask is not None:
        gradient = gradient * table.mask[columns]
    table.m[columns] -= lr * gradient
    return float(residual @ residual)


def sgd_step(table: CompressedTable, i: int, target, lr: float) -> CompressedTable:
    """One squared-error SGD step; only the rows of M in the sketch of i change"""
    target = np.asarray(target, dtype=np.float64)
    if not np.all(np.isfinite(target)):
        raise NonFiniteError("target contains NaN or Inf entries")
    if target.shape != (table.d2,):
        raise CQRValidationError(f"target must have length d2={table.d2} (got {target.shape})")
    if not 0 <= i < table.d1:
        raise IndexError(f"id {i} out of range [0, {table.d1})")
    updated = table.copy()
    _sgd_update(updated, i, target, lr)
    return updated


def hit_rate(h: SparseHashMatrix) -> float:
    """Expected squared weight landing on one row of M per uniformly drawn id"""
    if h.num_cols == 0:
        return 0.0
    return float(np.sum(h.data**2)) / (h.num_rows * h.num_cols)


def learning_rates(cfg: TrainConfig, rate: float, start: int, count: int) -> np.ndarray:
    """Step sizes for the samples start, ..., start + count - 1 since H was built"""
    if cfg.lr_schedule == "constant":
        return np.full(count, cfg.learning_rate)
    elapsed = start + np.arange(count, dtype=np.float64)
    return cfg.learning_rate / (1.0 + 2.0 * cfg.learning_rate * rate * elapsed)


def evaluate(
    table: CompressedTable,
    stream: SyntheticStream,
    samples: int = EVAL_SAMPLES,
    eval_seed: int = EVAL_SEED,
) -> float:
    """Mean squared error over a fixed set of freshly drawn samples"""
    ids, targets = stream.sample(samples, make_rng(stream.seed, eval_seed))
    errors = table.lookup(ids) - targets
    return float(np.mean(np.sum(errors**2, axis=1)))


def _sketched_table(method: str, d1: int, d2: int, cfg: TrainConfig) -> CompressedTable:
    seed = derive_seed(cfg.seed, 0)
    if method in ("qr_concat", "qr_hybrid"):
        spec = SketchSpec(
            method,
            d1,
            blocks=cfg.blocks,
            rows_per_block=cfg.k,
            hashes_per_block=cfg.hashes_per_block,
            seed=seed,
        )
        mask = _block_mask(cfg.blocks, cfg.k, d2)
    else:
        spec = SketchSpec(method, d1, k=cfg.k, injective=cfg.injective, seed=seed)
        mask = None
    h = sketch.build(spec)
    return CompressedTable(h=h, m=np.zeros((h.num_cols, d2)), mask=mask)


class _Trainer:
    """SGD loop over one stream with periodic evaluation"""

    def __init__(self, stream: SyntheticStream, cfg: TrainConfig):
        self.stream = stream
        self.cfg = cfg
        self.rng = make_rng(cfg.seed, 10)
        self.window = cfg.eval_every or stream.d1
        self.step = 0
        self.phase_start = 0
        self.rate = 0.0
        self.window_sum = 0.0
        self.window_count = 0
        self.curve: List[CurvePoint] = []

    def start(self, table: CompressedTable) -> None:
        """Restart the step-size schedule for a freshly built H"""
        self.phase_start = self.step
        self.rate = hit_rate(table.h)

    def record(self, table: CompressedTable, window_loss: Optional[float] = None) -> None:
        if self.window_count:
            window_loss = self.window_sum / self.window_count
        self.window_sum, self.window_count = 0.0, 0
        loss = evaluate(table, self.stream, self.cfg.eval_samples)
        self.curve.append(CurvePoint(step=self.step, eval_loss=loss, window_loss=window_loss))
        CQRLogger.debug(f"{self.cfg.method} step {self.step}: eval loss {loss:.6g}")

    def run(self, table: CompressedTable, samples: int) -> None:
        """Train for samples steps, evaluating at every window boundary"""
        remaining = samples
        while remaining > 0:
            count = min(remaining, self.window - self.step % self.window)
            ids, targets = self.stream.sample(count, self.rng)
            lrs = learning_rates(self.cfg, self.rate, self.step - self.phase_start, count)
            for i, target, lr in zip(ids, targets, lrs):
                self.window_sum += _sgd_update(table, int(i), target, float(lr))
            self.window_count += count
            self.step += count
            remaining -= count
            if self.step % self.window == 0:
                self.record(table)


def _check_config(stream: SyntheticStream, cfg: TrainConfig) -> None:
    report = ParameterValidator.check_train_config(cfg, stream.d1, stream.d2)
    if cfg.method not in TRAIN_METHODS:
        choices = ", ".join(TRAIN_METHODS)
        report.errors.append(f"method must be one of {choices} (got {cfg.method!r})")
    if cfg.lr_schedule not in LR_SCHEDULES:
        choices = ", ".join(LR_SCHEDULES)
        report.errors.append(f"lr_schedule must be one of {choices} (got {cfg.lr_schedule!r})")
    if cfg.eval_every < 0 or cfg.eval_samples < 1:
        report.errors.append("eval_every must be >= 0 and eval_samples >= 1")
    if cfg.method in ("qr_hybrid", "cqr") and cfg.hashes_per_block < 1:
        report.errors.append(f"hashes_per_block must be >= 1 (got {cfg.hashes_per_block})")
    report.raise_if_errors()
    for warning in report.warnings:
        CQRLogger.warning(warning)


def cluster_and_expand(
    table: CompressedTable, cfg: TrainConfig, stream: Optional[SyntheticStream] = None
) -> Tuple[CompressedTable, Dict[str, float]]:
    """
    Replace H by [k-means assignments of T | fresh signed count sketch].

    M restarts as the centroids stacked over zeros, so the expanded table
    initially equals the clustered table. Tables with more than
    SUBSAMPLE_THRESHOLD ids are clustered from a row sample.
    """
    d1, d2 = table.d1, table.d2
    k_c, k_s = cfg.cluster_columns, cfg.sketch_columns
    cluster_seed = derive_seed(cfg.seed, 1)

    if d1 > SUBSAMPLE_THRESHOLD:
        clusters = subsampled_kmeans(
            table.lookup,
            d1,
            min(cfg.subsample_size, d1),
            k_c,
            cluster_seed,
            max_iters=cfg.max_iters,
        )
    else:
        clusters = kmeans(table.materialize(), k_c, cluster_seed, max_iters=cfg.max_iters)

    h = sketch.from_assignments(clusters.assignments, k_c)
    m = clusters.centroids.copy()
    if k_s > 0:
        fresh = sketch.count_sketch(d1, k_s, derive_seed(cfg.seed, 2))
        h = sketch.hconcat(h, fresh)
        m = np.vstack([m, np.zeros((k_s, d2))])
    expanded = CompressedTable(h=h, m=m)

    report = {"kmeans_cost": clusters.cost, "cluster_columns": k_c, "sketch_columns": k_s}
    if stream is not None:
        ids, _ = stream.sample(cfg.eval_samples, make_rng(stream.seed, EVAL_SEED))
        shift = table.lookup(ids) - expanded.lookup(ids)
        report["cluster_shift"] = float(np.mean(np.sum(shift**2, axis=1)))
    return expanded, report


def _product_quantized(table: CompressedTable, cfg: TrainConfig) -> CompressedTable:
    """PQ of a trained full table as a blocked CompressedTable"""
    pq = product_quantize(
        table.materialize(), cfg.blocks, cfg.k, derive_seed(cfg.seed, 3), cfg.max_iters
    )
    h = sketch.empty(table.d1)
    m = np.zeros((cfg.blocks * cfg.k, table.d2))
    for j, (columns, block) in enumerate(zip(pq.column_slices, pq.blocks)):
        h = sketch.hconcat(h, sketch.from_assignments(block.assignments, cfg.k))
        m[j * cfg.k : (j + 1) * cfg.k, columns] = block.centroids
    return CompressedTable(h=h, m=m, mask=_block_mask(cfg.blocks, cfg.k, table.d2))


def train(
    stream: SyntheticStream,
    cfg: TrainConfig,
    progress: Optional[Callable[[CurvePoint], None]] = None,
) -> TrainResult:
    """
    Train a compressed table over epochs * d1 stream samples.

    The curve holds the eval loss of the current table on the fixed eval
    set at step 0 and after every eval window (one epoch by default). For
    cqr the cluster-and-expand step happens after cqr_cluster_after of the
    first epoch, the step-size schedule restarts on the expanded H and the
    report records eval loss before and after clustering.
    """
    _check_config(stream, cfg)
    trainer = _Trainer(stream, cfg)
    total = cfg.epochs * stream.d1
    cluster_report = None

    if cfg.method == "cqr":
        table = _sketched_table("qr_hybrid", stream.d1, stream.d2, cfg)
        trainer.start(table)
        trainer.record(table)
        before = max(1, int(cfg.cqr_cluster_after * stream.d1))
        trainer.run(table, before)

        pre = evaluate(table, stream, cfg.eval_samples)
        table, cluster_report = cluster_and_expand(table, cfg, stream)
        trainer.start(table)
        post = evaluate(table, stream, cfg.eval_samples)
        cluster_report.update(
            {"pre_cluster_eval": pre, "post_cluster_eval": post, "samples_before_cluster": before}
        )
        CQRLogger.info(
            f"cqr clustered after {before} samples: eval {pre:.6g} -> {post:.6g} "
            f"(k-means cost {cluster_report['kmeans_cost']:.6g})"
        )
        trainer.run(table, total - before)
    elif cfg.method == "pq":
        full = _full_table_config(cfg, stream.d1)
        table = _sketched_table("hashing_trick", stream.d1, stream.d2, full)
        trainer.start(table)
        trainer.record(table)
        trainer.run(table, total)
        table = _product_quantized(table, cfg)
        # the last point reports the quantized table, not the full one
        window_loss = None
        if trainer.curve[-1].step == trainer.step:
            window_loss = trainer.curve.pop().window_loss
        trainer.record(table, window_loss)
    else:
        table = _sketched_table(cfg.method, stream.d1, stream.d2, cfg)
        trainer.start(table)
        trainer.record(table)
        trainer.run(table, total)

    if trainer.curve[-1].step != trainer.step:
        trainer.record(table)
    if progress is not None:
        for point in trainer.curve:
            progress(point)
    return TrainResult(table=table, curve=trainer.curve, cluster_report=cluster_report)


def _full_table_config(cfg: TrainConfig, d1: int) -> TrainConfig:
    return TrainConfig(
        method="hashing_trick",
        k=d1,
        learning_rate=cfg.learning_rate,
        lr_schedule=cfg.lr_schedule,
        epochs=cfg.epochs,
        injective=True,
        seed=cfg.seed,
    )
