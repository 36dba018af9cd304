"""
CQR on the least-squares testbed

Finds T in R^{d1 x d2} minimizing ||XT - Y||_F^2 under a compressed
parametrization T = HM, iterating between a new H and an exact M-solve:

- multi-step CQR: H = [k-means assignments of T | fresh count sketch]
- dense CQR: H = [T | Gaussian noise], with plain or SVD-aligned ("smart")
  noise, and M either free or of the restricted form [I | M']
- baselines: one-shot count sketch and k-means of the optimal T*
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

from ..utils.logging import CQRLogger
from ..utils.validation import CQRValidationError, ParameterValidator
from .cluster import DEFAULT_MAX_ITERS, gaussian_codebook_assign, kmeans
from .hashing import derive_seed
from .linalg import (
    as_dense,
    frobenius_sq,
    orthonormal_columns,
    rho,
    sample_gaussian,
    singular_values,
    solve_least_squares,
)
from .models import ConvergenceTrace, StepSummary
from .sketch import (
    SketchFamily,
    SketchSpec,
    SparseHashMatrix,
    build,
    count_sketch,
    from_assignments,
    hconcat,
    sketch_product,
)
from .theory import BoundParams, theorem_bound

T = TypeVar("T")
R = TypeVar("R")

PROBLEM_KINDS = ("gaussian", "equal_singular", "low_rank")
LOW_RANK = 10


class SolverKind(str, Enum):
    MULTISTEP_SPARSE = "multistep_sparse"
    DENSE_PLAIN = "dense_plain"
    DENSE_SMART = "dense_smart"
    DENSE_PLAIN_HALFM = "dense_plain_halfM"
    DENSE_SMART_HALFM = "dense_smart_halfM"
    COUNTSKETCH_ONESHOT = "countsketch_oneshot"
    KMEANS_OF_TSTAR = "kmeans_of_tstar"


@dataclass(frozen=True)
class SolverVariant:
    """Which H-update and M-optimization rule a run uses"""

    kind: SolverKind

    @classmethod
    def parse(cls, name: str) -> "SolverVariant":
        try:
            return cls(SolverKind(name))
        except ValueError:
            choices = ", ".join(kind.value for kind in SolverKind)
            raise CQRValidationError(f"unknown method {name!r} (choose from {choices})") from None

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def is_dense(self) -> bool:
        return self.kind.value.startswith("dense_")

    @property
    def smart_noise(self) -> bool:
        return self.kind in (SolverKind.DENSE_SMART, SolverKind.DENSE_SMART_HALFM)

    @property
    def full_m(self) -> bool:
        return self.kind in (SolverKind.DENSE_PLAIN, SolverKind.DENSE_SMART)


@dataclass(frozen=True, eq=False)
class LeastSquaresProblem:
    """min_T ||XT - Y||_F^2 with its optimum precomputed"""

    x: np.ndarray
    y: np.ndarray
    t_star: np.ndarray
    loss_star: float

    @classmethod
    def from_arrays(cls, x, y, strict: bool = False) -> "LeastSquaresProblem":
        """
        Validate (X, Y) and solve for T*.

        The n > d1 > d2 regime is enforced only when strict; otherwise a
        violation is logged as a warning.
        """
        x = as_dense(x, "X")
        y = as_dense(y, "Y")
        if x.shape[0] != y.shape[0]:
            raise CQRValidationError(f"X has {x.shape[0]} rows but Y has {y.shape[0]}")
        report = ParameterValidator.check_problem_sizes(
            x.shape[0], x.shape[1], y.shape[1], strict=strict
        )
        report.raise_if_errors()
        for warning in report.warnings:
            CQRLogger.warning(warning)

        t_star = solve_least_squares(x, y)
        t_star.flags.writeable = False
        return cls(x=x, y=y, t_star=t_star, loss_star=frobenius_sq(x @ t_star - y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d1(self) -> int:
        return self.x.shape[1]

    @property
    def d2(self) -> int:
        return self.y.shape[1]

    @property
    def xt_star_norm_sq(self) -> float:
        return frobenius_sq(self.x @ self.t_star)

    def loss(self, t: np.ndarray) -> float:
        return frobenius_sq(self.x @ t - self.y)

    def bound_params(self, k: int, rho_value: Optional[float] = None) -> BoundParams:
        return BoundParams(
            rho=rho(self.x) if rho_value is None else rho_value,
            xt_star_norm_sq=self.xt_star_norm_sq,
            loss_star=self.loss_star,
            k=k,
            d2=self.d2,
        )


def make_problem(
    n: int,
    d1: int,
    d2: int,
    seed: int,
    noise: float = 0.1,
    kind: str = "gaussian",
) -> LeastSquaresProblem:
    """
    Random problem Y = X T* + noise * N(0, 1) with planted Gaussian T*.

    kind selects X: "gaussian" (IID), "equal_singular" (orthonormal columns,
    so rho = 1/d1) or "low_rank" (rank-10 plus 1e-3 Gaussian noise).
    """
    report = ParameterValidator.check_problem_sizes(n, d1, d2, strict=True)
    if noise < 0:
        report.errors.append(f"noise must be >= 0 (got {noise})")
    if kind not in PROBLEM_KINDS:
        choices = ", ".join(PROBLEM_KINDS)
        report.errors.append(f"unknown problem kind {kind!r} (choose from {choices})")
    report.raise_if_errors()

    if kind == "gaussian":
        x = sample_gaussian(n, d1, seed, 0)
    elif kind == "equal_singular":
        x = orthonormal_columns(n, d1, derive_seed(seed, 0))
    else:
        rank = min(LOW_RANK, d1)
        x = sample_gaussian(n, rank, seed, 0, 0) @ sample_gaussian(rank, d1, seed, 0, 1)
        x = x + 1e-3 * sample_gaussian(n, d1, seed, 0, 2)

    t_planted = sample_gaussian(d1, d2, seed, 1)
    y = x @ t_planted
    if noise > 0:
        y = y + noise * sample_gaussian(n, d2, seed, 2)
    return LeastSquaresProblem.from_arrays(x, y, strict=True)


def _check_width(p: LeastSquaresProblem, k: int, dense: bool) -> None:
    if dense:
        if k <= p.d2:
            raise CQRValidationError(
                f"k must exceed d2 (got k={k}, d2={p.d2}); the bound is vacuous"
            )
        if k > p.d1:
            CQRLogger.debug(f"k={k} exceeds d1={p.d1}; noise block can span R^d1")
        return
    report = ParameterValidator.check_sketch_width(p.d1, p.d2, k, allow_full=True)
    report.raise_if_errors()
    for warning in report.warnings:
        CQRLogger.warning(warning)


def _solve_with_sketch(p: LeastSquaresProblem, h: SparseHashMatrix) -> np.ndarray:
    """T = H argmin_M ||XHM - Y||"""
    m = solve_least_squares(sketch_product(p.x, h), p.y)
    return np.asarray(h.csr @ m)


def _bootstrap_sketch(d1: int, k: int, seed: int) -> SparseHashMatrix:
    """Two concatenated count sketches (2k columns, 2 nonzeros per row)"""
    return hconcat(
        count_sketch(d1, k, derive_seed(seed, 1, 0)),
        count_sketch(d1, k, derive_seed(seed, 1, 1)),
    )


def multi_step_cqr(
    p: LeastSquaresProblem,
    k: int,
    steps: int,
    seed: int,
    assign: str = "kmeans",
    max_iters: int = DEFAULT_MAX_ITERS,
) -> ConvergenceTrace:
    """
    Sparse multi-step CQR.

    Step 1 solves with two concatenated count sketches. Every later step
    clusters the current T into k codewords and solves again with
    H = [assignments | fresh count sketch of k columns]. assign="gaussian"
    swaps k-means for assignment to a random Gaussian codebook.
    """
    _check_width(p, k, dense=False)
    if steps < 0:
        raise CQRValidationError(f"steps must be >= 0 (got {steps})")
    if assign not in ("kmeans", "gaussian"):
        raise CQRValidationError(f"assign must be 'kmeans' or 'gaussian' (got {assign!r})")

    t = np.zeros((p.d1, p.d2))
    losses = [frobenius_sq(p.y)]
    for step in range(1, steps + 1):
        if step == 1:
            h = _bootstrap_sketch(p.d1, k, seed)
        else:
            cluster_seed = derive_seed(seed, step, 2)
            if assign == "kmeans":
                clusters = kmeans(t, k, cluster_seed, max_iters=max_iters)
            else:
                clusters = gaussian_codebook_assign(t, k, cluster_seed)
            h = hconcat(
                from_assignments(clusters.assignments, k),
                count_sketch(p.d1, k, derive_seed(seed, step, 1)),
            )
        t = _solve_with_sketch(p, h)
        losses.append(p.loss(t))
        CQRLogger.debug(f"multistep k={k} seed={seed} step {step}: loss {losses[-1]:.6g}")

    return ConvergenceTrace(method=SolverKind.MULTISTEP_SPARSE.value, k=k, seed=seed, losses=losses)


def dense_step(
    x: np.ndarray, y: np.ndarray, t_prev: np.ndarray, g: np.ndarray, full_m: bool
) -> np.ndarray:
    """
    One dense CQR update from T_{i-1} with noise block g.

    full_m solves M freely over H = [T_{i-1} | g]; otherwise M = [I | M']
    and only M' is optimized, so M' = 0 keeps T_{i-1}.
    """
    if full_m:
        h = np.hstack([t_prev, g])
        return h @ solve_least_squares(x @ h, y)
    return t_prev + g @ solve_least_squares(x @ g, y - x @ t_prev)


def dense_cqr(
    p: LeastSquaresProblem,
    k: int,
    steps: int,
    variant: SolverVariant,
    seed: int,
) -> ConvergenceTrace:
    """
    Dense CQR with H_i = [T_{i-1} | G_i] and G_i of k - d2 columns.

    Smart noise draws G_i = V diag(s)^-1 G' from the SVD of X, which makes the
    effective design have equal singular values; its bound uses rho = 1/d1.
    """
    if not variant.is_dense:
        raise CQRValidationError(f"{variant.name} is not a dense CQR variant")
    _check_width(p, k, dense=True)
    if steps < 0:
        raise CQRValidationError(f"steps must be >= 0 (got {steps})")

    width = k - p.d2
    basis = None
    if variant.smart_noise:
        if p.n < p.d1:
            raise CQRValidationError("smart noise needs n >= d1")
        spectrum = singular_values(p.x)
        if spectrum.rank < p.d1:
            raise CQRValidationError("smart noise needs a nonsingular X (diag(s)^-1 undefined)")
        basis = spectrum.right_basis / spectrum.singular_values[None, :]

    t = np.zeros((p.d1, p.d2))
    losses = [frobenius_sq(p.y)]
    for step in range(1, steps + 1):
        g = sample_gaussian(p.d1, width, seed, step)
        if basis is not None:
            g = basis @ g
        t = dense_step(p.x, p.y, t, g, variant.full_m)
        losses.append(p.loss(t))

    rho_value = 1.0 / p.d1 if variant.smart_noise else rho(p.x)
    bounds = None
    if rho_value > 0:
        params = p.bound_params(k, rho_value)
        bounds = [theorem_bound(params, step) for step in range(steps + 1)]
    return ConvergenceTrace(method=variant.name, k=k, seed=seed, losses=losses, bounds=bounds)


def baseline_countsketch(p: LeastSquaresProblem, k: int, seed: int) -> float:
    """One-shot loss with H = two concatenated count sketches"""
    if k < 1:
        raise CQRValidationError(f"k must be >= 1 (got {k})")
    return p.loss(_solve_with_sketch(p, _bootstrap_sketch(p.d1, k, seed)))


def baseline_kmeans_of_tstar(
    p: LeastSquaresProblem, k: int, seed: int, max_iters: int = DEFAULT_MAX_ITERS
) -> float:
    """Cluster the optimal T* into k codewords and re-solve M"""
    if not 1 <= k <= p.d1:
        raise CQRValidationError(f"k must be in [1, d1={p.d1}] (got {k})")
    clusters = kmeans(p.t_star, k, derive_seed(seed, 0, 2), max_iters=max_iters)
    return p.loss(_solve_with_sketch(p, from_assignments(clusters.assignments, k)))


def baseline_trace(
    p: LeastSquaresProblem, k: int, seed: int, variant: SolverVariant
) -> ConvergenceTrace:
    """A baseline loss as a two-point trace (start, result)"""
    if variant.kind == SolverKind.COUNTSKETCH_ONESHOT:
        loss = baseline_countsketch(p, k, seed)
    elif variant.kind == SolverKind.KMEANS_OF_TSTAR:
        loss = baseline_kmeans_of_tstar(p, k, seed)
    else:
        raise CQRValidationError(f"{variant.name} is not a baseline")
    return ConvergenceTrace(method=variant.name, k=k, seed=seed, losses=[frobenius_sq(p.y), loss])


def run_method(
    p: LeastSquaresProblem, variant: SolverVariant, k: int, steps: int, seed: int
) -> ConvergenceTrace:
    """Dispatch one run by variant"""
    if variant.kind == SolverKind.MULTISTEP_SPARSE:
        return multi_step_cqr(p, k, steps, seed)
    if variant.is_dense:
        return dense_cqr(p, k, steps, variant, seed)
    return baseline_trace(p, k, seed, variant)


def single_step_comparison(
    p: LeastSquaresProblem, k: int, seed: int, max_iters: int = DEFAULT_MAX_ITERS
) -> Dict[str, float]:
    """
    Losses of one sketch -> cluster -> re-solve round at equal memory.

    loss_cs uses the sum of two count sketches (k columns, two signed entries
    per row), loss_cqr re-solves with k-means assignments of that solution and
    loss_km with k-means assignments of T*. Typically
    loss_star <= loss_km <= loss_cqr <= loss_cs.
    """
    if not 1 <= k <= p.d1:
        raise CQRValidationError(f"k must be in [1, d1={p.d1}] (got {k})")
    h_cs = build(
        SketchSpec(
            SketchFamily.HASH_EMBEDDING.value,
            p.d1,
            k=k,
            weighted=True,
            seed=derive_seed(seed, 0),
        )
    )
    t_cs = _solve_with_sketch(p, h_cs)
    cqr = kmeans(t_cs, k, derive_seed(seed, 1), max_iters=max_iters)
    t_cqr = _solve_with_sketch(p, from_assignments(cqr.assignments, k))

    result = {
        "loss_star": p.loss_star,
        "loss_km": baseline_kmeans_of_tstar(p, k, seed, max_iters=max_iters),
        "loss_cqr": p.loss(t_cqr),
        "loss_cs": p.loss(t_cs),
    }
    result["ordered"] = float(
        result["loss_star"] <= result["loss_km"] <= result["loss_cqr"] <= result["loss_cs"]
    )
    return result


def run_repetitions(fn: Callable[[T], R], seeds: Sequence[T], threads: int = 1) -> List[R]:
    """fn over seeds, in seed order regardless of thread scheduling"""
    if threads <= 1 or len(seeds) <= 1:
        return [fn(seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, seeds))


def summarize_traces(traces: Iterable[ConvergenceTrace]) -> List[StepSummary]:
    """Per-step mean and standard error; bounds taken from the first trace"""
    traces = list(traces)
    if not traces:
        return []
    steps = min(len(trace.losses) for trace in traces)
    losses = np.array([trace.losses[:steps] for trace in traces])
    means = losses.mean(axis=0)
    if len(traces) > 1:
        stderrs = losses.std(axis=0, ddof=1) / np.sqrt(len(traces))
    else:
        stderrs = np.zeros(steps)
    bounds = traces[0].bounds
    return [
        StepSummary(
            step=step,
            mean=float(means[step]),
            stderr=float(stderrs[step]),
            bound=None if bounds is None else bounds[step],
        )
        for step in range(steps)
    ]
