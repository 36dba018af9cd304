"""
cqrsketch Public API

High-level functions behind the CLI subcommands, usable directly from
notebooks or other experiment drivers. Each call is deterministic in its
seed; threads only changes how repetitions are scheduled.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .core import solver, theory
from .core.collapse import collapse_report
from .core.models import ConvergenceTrace
from .core.training import SyntheticStream, TrainConfig, TrainResult, train
from .parsers.table_parser import AssignmentTableParser
from .utils.logging import CQRLogger
from .utils.validation import CQRValidationError

VERIFY_CHECKS = ("theorem", "vector_lemma", "iid_lemma")


def run_lstsq(
    n: int,
    d1: int,
    d2: int,
    k: int,
    steps: int,
    reps: int = 1,
    method: str = "multistep_sparse",
    noise: float = 0.1,
    problem: str = "gaussian",
    assign: str = "kmeans",
    seed: int = 0,
    threads: int = 1,
) -> List[ConvergenceTrace]:
    """
    Run one solver on a random least-squares problem, reps times.

    The problem is drawn once from seed; repetition r runs the solver with
    seed + r, so traces are paired across methods that share a seed.

    Args:
        n, d1, d2: Problem sizes, n > d1 > d2
        k: Sketch width (codewords for multi-step, H columns for dense)
        steps: Number of H updates; every trace has steps + 1 losses
        reps: Number of solver seeds
        method: A SolverKind value, e.g. "multistep_sparse" or "dense_smart"
        noise: Standard deviation of the additive noise in Y
        problem: "gaussian", "equal_singular" or "low_rank"
        assign: "kmeans" or "gaussian" codebook for multi-step re-clustering
        seed: Base seed
        threads: Worker threads for repetitions

    Returns:
        Traces in repetition order

    Example:
        import cqrsketch

        traces = cqrsketch.run_lstsq(500, 100, 4, k=16, steps=100, reps=20)
        print(traces[0].final_loss)
    """
    if reps < 1:
        raise CQRValidationError(f"reps must be >= 1 (got {reps})")
    variant = solver.SolverVariant.parse(method)
    p = solver.make_problem(n, d1, d2, seed, noise=noise, kind=problem)
    CQRLogger.info(
        f"lstsq {variant.name}: n={n} d1={d1} d2={d2} k={k} steps={steps} reps={reps} "
        f"loss*={p.loss_star:.6g}"
    )

    def one(rep_seed: int) -> ConvergenceTrace:
        if variant.kind == solver.SolverKind.MULTISTEP_SPARSE:
            return solver.multi_step_cqr(p, k, steps, rep_seed, assign=assign)
        return solver.run_method(p, variant, k, steps, rep_seed)

    traces = solver.run_repetitions(one, [seed + rep for rep in range(reps)], threads)
    mean_final = sum(trace.final_loss for trace in traces) / len(traces)
    CQRLogger.info(f"lstsq {variant.name}: mean final loss {mean_final:.6g}")
    return traces


def run_verify(
    check: str,
    seed: int = 0,
    threads: int = 1,
    n: Optional[int] = None,
    d1: int = 50,
    d2: int = 4,
    k: int = 10,
    steps: int = 100,
    reps: int = 40,
    problem: str = "gaussian",
    noise: float = 0.1,
    d: int = 5,
    instances: int = 1,
    p: Sequence[float] = (0.5, 0.5),
    dist: str = "exponential",
) -> Dict[str, Any]:
    """
    Monte-Carlo check of the dense CQR bound or one of its lemmas.

    Args:
        check: "theorem", "vector_lemma" or "iid_lemma"
        seed: Base seed
        threads: Worker threads (theorem repetitions only)
        n: Rows of X (theorem: default 200, vector lemma: default 20); unused for iid
        d1, d2, k, steps, problem, noise: Theorem sizes and problem kind
        reps: Monte-Carlo repetitions (solver runs, Gaussian draws or samples)
        d: Columns of X for the vector lemma
        instances: Independent (X, t) instances for the vector lemma
        p: Weight vector for the IID lemma; its length is n
        dist: "exponential" or "chi_square_1" for the IID lemma

    Returns:
        JSON-ready report dict with a top-level boolean "passed"

    Example:
        import cqrsketch

        report = cqrsketch.run_verify("iid_lemma", p=[0.5, 0.5], reps=100000)
        assert report["passed"]
    """
    if check == "theorem":
        report = theory.verify_theorem(
            200 if n is None else n,
            d1,
            d2,
            k,
            steps,
            reps,
            seed,
            kind=problem,
            noise=noise,
            threads=threads,
        )
        return report.to_dict()

    if check == "vector_lemma":
        if instances < 1:
            raise CQRValidationError(f"instances must be >= 1 (got {instances})")
        rows = 20 if n is None else n
        reports = [
            theory.verify_vector_lemma(rows, d, reps, seed + i).to_dict() for i in range(instances)
        ]
        return {
            "check": "vector_lemma",
            "passed": all(r["passed"] for r in reports),
            "instances": reports,
        }

    if check == "iid_lemma":
        weights = [float(value) for value in p]
        return theory.verify_iid_lemma(len(weights), weights, dist, reps, seed).to_dict()

    raise CQRValidationError(f"unknown check {check!r} (choose from {', '.join(VERIFY_CHECKS)})")


def run_train(
    method: str = "cqr",
    d1: int = 10000,
    d2: int = 8,
    k: int = 64,
    epochs: int = 5,
    learning_rate: float = 0.02,
    lr_schedule: str = "inverse_time",
    clusters: int = 64,
    cluster_after: float = 1.0,
    split: float = 0.5,
    blocks: int = 2,
    hashes_per_block: int = 2,
    noise_sigma: float = 0.0,
    jitter: float = 0.05,
    popularity: str = "uniform",
    eval_samples: int = 2000,
    eval_every: int = 0,
    injective: bool = False,
    reps: int = 1,
    seed: int = 0,
    threads: int = 1,
) -> List[Tuple[int, TrainResult]]:
    """
    Train a compressed embedding table on a synthetic stream, reps times.

    Repetition r uses seed + r for both the stream and the table, so two
    methods run with the same seed see the same planted embeddings.

    Args:
        method: "hashing_trick", "hash_embedding", "qr_concat", "qr_hybrid",
                "cqr" or "pq"
        d1, d2: Number of ids and embedding dimension
        k: Columns of H (rows per block for blocked methods)
        epochs: Stream passes of d1 samples each
        learning_rate: Base SGD step size
        lr_schedule: "inverse_time" (decays with hits per codebook row) or "constant"
        clusters: Planted clusters in the ground truth
        cluster_after: Fraction of the first epoch before CQR clusters
        split: Fraction of k kept as fresh sketch columns after clustering
        blocks, hashes_per_block: Blocked sketch layout
        noise_sigma, jitter, popularity: Stream parameters
        eval_samples, eval_every: Evaluation set size and window (0 = per epoch)
        injective: Collision-free hashing trick (needs k >= d1)
        reps: Number of seeds
        seed: Base seed
        threads: Worker threads for repetitions

    Returns:
        (seed, TrainResult) pairs in repetition order

    Example:
        import cqrsketch

        results = cqrsketch.run_train("cqr", d1=2000, d2=8, k=64, epochs=3)
        seed, result = results[0]
        print(result.final_loss)
    """
    if reps < 1:
        raise CQRValidationError(f"reps must be >= 1 (got {reps})")

    def one(rep_seed: int) -> Tuple[int, TrainResult]:
        stream = SyntheticStream(
            d1=d1,
            d2=d2,
            clusters=clusters,
            noise_sigma=noise_sigma,
            jitter=jitter,
            popularity=popularity,
            seed=rep_seed,
        )
        cfg = TrainConfig(
            method=method,
            k=k,
            learning_rate=learning_rate,
            lr_schedule=lr_schedule,
            epochs=epochs,
            blocks=blocks,
            hashes_per_block=hashes_per_block,
            cqr_cluster_after=cluster_after,
            cqr_split=split,
            injective=injective,
            eval_every=eval_every,
            eval_samples=eval_samples,
            seed=rep_seed,
        )
        result = train(stream, cfg)
        CQRLogger.info(
            f"train {method} seed={rep_seed}: {result.table.parameter_count} params, "
            f"final eval loss {result.final_loss:.6g}"
        )
        return rep_seed, result

    return solver.run_repetitions(one, [seed + rep for rep in range(reps)], threads)


def run_collapse(
    input_path: Union[str, Path],
    tuple_order: Optional[int] = None,
    reference_path: Optional[Union[str, Path]] = None,
) -> Dict[str, Any]:
    """
    Entropy diagnostics of an assignment table CSV.

    Args:
        input_path: CSV with one row per id and one column per partition
        tuple_order: Also report the t-tuple entropy for this t
        reference_path: Optional reference table (e.g. product quantization
                        of a full table) whose h1/h2 are reported alongside

    Returns:
        Report dict with n, c, h1, h2, per_column and max_entropy

    Example:
        import cqrsketch

        report = cqrsketch.run_collapse("assignments.csv")
        print(report["h1"], report["h2"])
    """
    parser = AssignmentTableParser()
    table = parser.parse_file(input_path)
    reference = None if reference_path is None else parser.parse_file(reference_path)
    CQRLogger.info(f"collapse: {table.n} ids x {table.c} columns from {input_path}")
    return collapse_report(table, tuple_order=tuple_order, reference=reference)
