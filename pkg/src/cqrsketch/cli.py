#!/usr/bin/env python3
"""
cqrsketch CLI
Experiment driver: least-squares CQR runs, bound verification, embedding
training and table-collapse diagnostics, each written with a run manifest
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from . import __version__, api
from .config import load_defaults
from .core.models import CURVE_COLUMNS, SUMMARY_COLUMNS, TRACE_COLUMNS, RunManifest
from .core.sketch import SketchSpecError
from .parsers.json_parser import read_manifest
from .utils.logging import CQRLogger
from .utils.validation import CQRValidationError
from .writers.csv_writer import CSVWriter
from .writers.json_writer import write_checkpoint, write_json, write_manifest

LSTSQ_METHODS = {
    "multistep": "multistep_sparse",
    "dense": "dense_plain",
    "dense-smart": "dense_smart",
    "dense-half": "dense_plain_halfM",
    "dense-smart-half": "dense_smart_halfM",
    "countsketch": "countsketch_oneshot",
    "kmeans-star": "kmeans_of_tstar",
}
TRAIN_METHODS = {
    "hash": "hashing_trick",
    "hemb": "hash_embedding",
    "qr-concat": "qr_concat",
    "qr-hybrid": "qr_hybrid",
    "cqr": "cqr",
    "pq": "pq",
}
VERIFY_CHECKS = {"theorem": "theorem", "vector-lemma": "vector_lemma", "iid-lemma": "iid_lemma"}
DISTRIBUTIONS = {"exp": "exponential", "chisq": "chi_square_1"}
PROBLEMS = ("gaussian", "equal_singular", "low_rank")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

Executor = Callable[[Dict[str, Any], int, Path, int], Tuple[int, List[Path]]]


def _lookup(table: Dict[str, str], name: str, what: str) -> str:
    """CLI spelling or canonical name to canonical name"""
    if name in table:
        return table[name]
    if name in table.values():
        return name
    raise CQRValidationError(f"unknown {what} {name!r} (choose from {', '.join(table)})")


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers (got {text!r})")


def _resolve(args: argparse.Namespace, defaults: Dict[str, Any], names: List[str]) -> Dict:
    """Command-line values over the defaults file"""
    resolved = {}
    for name in names:
        value = getattr(args, name, None)
        resolved[name] = defaults.get(name) if value is None else value
    return resolved


# Executors: (parameters, seed, out, threads) -> (exit code, written files)


def _execute_lstsq(params: Dict[str, Any], seed: int, out: Path, threads: int):
    traces = api.run_lstsq(
        n=int(params["n"]),
        d1=int(params["d1"]),
        d2=int(params["d2"]),
        k=int(params["k"]),
        steps=int(params["steps"]),
        reps=int(params["reps"]),
        method=_lookup(LSTSQ_METHODS, params["method"], "method"),
        noise=float(params["noise"]),
        problem=params["problem"],
        assign=params["assign"],
        seed=seed,
        threads=threads,
    )
    rows = [row for trace in traces for row in trace.to_rows()]
    writer = CSVWriter(TRACE_COLUMNS, sort_keys=("method", "k", "seed", "step"))
    writer.write(out, rows)
    print(f"✓ Wrote {len(traces)} trace(s): {out}")
    return 0, [out]


def _execute_verify(params: Dict[str, Any], seed: int, out: Path, threads: int):
    check = _lookup(VERIFY_CHECKS, params["check"], "check")
    if out.suffix.lower() == ".csv" and check != "theorem":
        raise CQRValidationError(f"only the theorem check has a CSV form (got {check})")

    report = api.run_verify(
        check,
        seed=seed,
        threads=threads,
        n=params["n"],
        d1=int(params["d1"]),
        d2=int(params["d2"]),
        k=int(params["k"]),
        steps=int(params["steps"]),
        reps=int(params["reps"]),
        problem=params["problem"],
        noise=float(params["noise"]),
        d=int(params["d"]),
        instances=int(params["instances"]),
        p=params["p"],
        dist=_lookup(DISTRIBUTIONS, params["dist"], "distribution"),
    )
    if out.suffix.lower() == ".csv":
        CSVWriter(SUMMARY_COLUMNS, sort_keys=("step",)).write(out, report["steps"])
    else:
        write_json(out, report)

    if report["passed"]:
        CQRLogger.success(f"{check} check passed")
        print(f"✓ {check} check passed: {out}")
        return 0, [out]
    CQRLogger.warning(f"{check} check failed")
    print(f"✗ {check} check failed: {out}")
    return 1, [out]


def _execute_train(params: Dict[str, Any], seed: int, out: Path, threads: int):
    method = _lookup(TRAIN_METHODS, params["method"], "method")
    results = api.run_train(
        method=method,
        d1=int(params["d1"]),
        d2=int(params["d2"]),
        k=int(params["k"]),
        epochs=int(params["epochs"]),
        learning_rate=float(params["lr"]),
        lr_schedule=params["lr_schedule"],
        clusters=int(params["clusters"]),
        cluster_after=float(params["cluster_after"]),
        split=float(params["split"]),
        blocks=int(params["blocks"]),
        hashes_per_block=int(params["hashes_per_block"]),
        noise_sigma=float(params["noise_sigma"]),
        jitter=float(params["jitter"]),
        popularity=params["popularity"],
        eval_samples=int(params["eval_samples"]),
        eval_every=int(params["eval_every"]),
        injective=bool(params["injective"]),
        reps=int(params["reps"]),
        seed=seed,
        threads=threads,
    )

    rows = [row for rep_seed, result in results for row in result.to_rows(method, rep_seed)]
    CSVWriter(CURVE_COLUMNS, sort_keys=("seed", "step")).write(out, rows)
    written = [out]
    for rep_seed, result in results:
        checkpoint = out.with_suffix(f".seed{rep_seed}.checkpoint.json")
        write_checkpoint(checkpoint, result.table, result.cluster_report)
        written.append(checkpoint)
    print(f"✓ Wrote loss curves for {len(results)} seed(s): {out}")
    return 0, written


def _execute_collapse(params: Dict[str, Any], seed: int, out: Path, threads: int):
    tuple_order = params.get("tuple")
    report = api.run_collapse(
        params["input"],
        tuple_order=None if tuple_order is None else int(tuple_order),
        reference_path=params.get("reference"),
    )
    write_json(out, report)
    print(f"✓ Collapse report: {out}")
    return 0, [out]


EXECUTORS: Dict[str, Executor] = {
    "lstsq": _execute_lstsq,
    "verify": _execute_verify,
    "train": _execute_train,
    "collapse": _execute_collapse,
}


def _lstsq_parameters(args: argparse.Namespace) -> Dict[str, Any]:
    names = ["n", "d1", "d2", "k", "steps", "reps", "method", "noise", "problem", "assign"]
    params = _resolve(args, load_defaults("lstsq"), names)
    if args.equal_singular:
        params["problem"] = "equal_singular"
    params["assign"] = params["assign"] or "kmeans"
    return params


def _verify_parameters(args: argparse.Namespace) -> Dict[str, Any]:
    defaults = load_defaults("verify")
    names = ["check", "d1", "d2", "k", "steps", "noise", "problem", "d", "instances", "dist"]
    params = _resolve(args, defaults, names)
    if args.equal_singular:
        params["problem"] = "equal_singular"

    check = _lookup(VERIFY_CHECKS, params["check"], "check")
    # n and reps mean different things per check
    size_key, reps_key = {
        "theorem": ("n", "theorem_reps"),
        "vector_lemma": ("vector_n", "vector_reps"),
        "iid_lemma": (None, "iid_reps"),
    }[check]
    params["n"] = args.n if args.n is not None else defaults.get(size_key) if size_key else None
    params["reps"] = args.reps if args.reps is not None else defaults.get(reps_key)
    params["p"] = args.p if args.p is not None else _float_list(str(defaults.get("p", "")))
    return params


def _train_parameters(args: argparse.Namespace) -> Dict[str, Any]:
    names = [
        "method",
        "d1",
        "d2",
        "k",
        "epochs",
        "lr",
        "lr_schedule",
        "clusters",
        "cluster_after",
        "split",
        "blocks",
        "hashes_per_block",
        "noise_sigma",
        "jitter",
        "popularity",
        "eval_samples",
        "eval_every",
        "reps",
    ]
    params = _resolve(args, load_defaults("train"), names)
    params["injective"] = bool(args.injective)
    return params


def _collapse_parameters(args: argparse.Namespace) -> Dict[str, Any]:
    params = _resolve(args, load_defaults("collapse"), ["tuple"])
    params["input"] = str(args.input)
    params["reference"] = None if args.reference is None else str(args.reference)
    return params


PARAMETER_BUILDERS: Dict[str, Callable[[argparse.Namespace], Dict[str, Any]]] = {
    "lstsq": _lstsq_parameters,
    "verify": _verify_parameters,
    "train": _train_parameters,
    "collapse": _collapse_parameters,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Base seed (default from defaults.yaml)")
    common.add_argument("--threads", type=int, help="Worker threads for repetitions")
    common.add_argument("--log-level", choices=LOG_LEVELS, help="Log file verbosity")

    parser = argparse.ArgumentParser(
        prog="cqrsketch",
        description="Compressed embedding tables as learned sparse linear maps.\n"
        "Every run writes its outputs plus <out>.manifest.json for exact reruns.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Command: lstsq
    lstsq = subparsers.add_parser(
        "lstsq", parents=[common], help="Run a CQR solver on random least-squares problems"
    )
    lstsq.add_argument("--n", type=int, help="Rows of X")
    lstsq.add_argument("--d1", type=int, help="Columns of X (rows of T)")
    lstsq.add_argument("--d2", type=int, help="Columns of Y")
    lstsq.add_argument("--k", type=int, help="Sketch width")
    lstsq.add_argument("--steps", type=int, help="Number of H updates")
    lstsq.add_argument("--reps", type=int, help="Number of solver seeds")
    lstsq.add_argument("--method", choices=list(LSTSQ_METHODS), help="Solver variant")
    lstsq.add_argument("--noise", type=float, help="Noise level of Y")
    lstsq.add_argument("--problem", choices=PROBLEMS, help="Design matrix family")
    lstsq.add_argument(
        "--equal-singular", action="store_true", help="Orthonormal X (shorthand for --problem)"
    )
    lstsq.add_argument(
        "--assign", choices=("kmeans", "gaussian"), help="Multi-step re-clustering rule"
    )
    lstsq.add_argument("--out", required=True, help="Trace CSV path")

    # Command: verify
    verify = subparsers.add_parser(
        "verify", parents=[common], help="Monte-Carlo check of the convergence bound or a lemma"
    )
    verify.add_argument("--check", choices=list(VERIFY_CHECKS), help="What to verify")
    verify.add_argument("--n", type=int, help="Rows of X (theorem, vector-lemma)")
    verify.add_argument("--d1", type=int, help="Columns of X (theorem)")
    verify.add_argument("--d2", type=int, help="Columns of Y (theorem)")
    verify.add_argument("--k", type=int, help="Sketch width (theorem)")
    verify.add_argument("--steps", type=int, help="Dense CQR steps (theorem)")
    verify.add_argument("--reps", type=int, help="Monte-Carlo repetitions")
    verify.add_argument("--noise", type=float, help="Noise level of Y (theorem)")
    verify.add_argument("--problem", choices=PROBLEMS[:2], help="Design matrix family (theorem)")
    verify.add_argument(
        "--equal-singular", action="store_true", help="Orthonormal X; adds the corollary bound"
    )
    verify.add_argument("--d", type=int, help="Columns of X (vector-lemma)")
    verify.add_argument("--instances", type=int, help="Random (X, t) instances (vector-lemma)")
    verify.add_argument("--p", type=_float_list, help="Weights, e.g. 0.5,0.5 (iid-lemma)")
    verify.add_argument("--dist", choices=list(DISTRIBUTIONS), help="Distribution (iid-lemma)")
    verify.add_argument("--out", required=True, help="Report path (.json, or .csv for theorem)")

    # Command: train
    train = subparsers.add_parser(
        "train", parents=[common], help="Train a compressed embedding table on a synthetic stream"
    )
    train.add_argument("--method", choices=list(TRAIN_METHODS), help="Table compression method")
    train.add_argument("--d1", type=int, help="Number of ids")
    train.add_argument("--d2", type=int, help="Embedding dimension")
    train.add_argument("--k", type=int, help="Columns of H (rows per block when blocked)")
    train.add_argument("--epochs", type=int, help="Passes of d1 samples")
    train.add_argument("--lr", type=float, help="Base SGD learning rate")
    train.add_argument(
        "--lr-schedule", choices=("inverse_time", "constant"), help="Step-size schedule"
    )
    train.add_argument("--clusters", type=int, help="Planted clusters in the ground truth")
    train.add_argument("--cluster-after", type=float, help="Fraction of epoch 1 before clustering")
    train.add_argument("--split", type=float, help="Fraction of k kept as fresh sketch columns")
    train.add_argument("--blocks", type=int, help="Blocks for qr-concat, qr-hybrid, cqr and pq")
    train.add_argument("--hashes-per-block", type=int, help="Hashed rows summed per block")
    train.add_argument("--noise-sigma", type=float, help="Target noise")
    train.add_argument("--jitter", type=float, help="Per-id spread around cluster centers")
    train.add_argument("--popularity", choices=("uniform", "zipf"), help="Id sampling law")
    train.add_argument("--eval-samples", type=int, help="Evaluation set size")
    train.add_argument("--eval-every", type=int, help="Evaluation window in samples (0 = epoch)")
    train.add_argument("--reps", type=int, help="Number of seeds")
    train.add_argument(
        "--injective", action="store_true", default=None, help="Collision-free hash (k >= d1)"
    )
    train.add_argument("--out", required=True, help="Loss-curve CSV path")

    # Command: collapse
    collapse = subparsers.add_parser(
        "collapse", parents=[common], help="Entropy diagnostics of an assignment table"
    )
    collapse.add_argument("--input", required=True, help="Assignment table CSV")
    collapse.add_argument("--tuple", type=int, help="Also report the t-tuple entropy")
    collapse.add_argument("--reference", help="Reference table CSV (e.g. product quantization)")
    collapse.add_argument("--out", required=True, help="Report JSON path")

    # Command: rerun
    rerun = subparsers.add_parser(
        "rerun", parents=[common], help="Re-execute a run from its manifest"
    )
    rerun.add_argument("--manifest", required=True, help="<out>.manifest.json of an earlier run")
    rerun.add_argument("--out", help="Write to this path instead of the recorded one")

    return parser


def _report_error(message: str) -> None:
    """Log when a run logger exists, otherwise straight to stderr"""
    if CQRLogger.get_logger() is None:
        print(f"Error: {message}", file=sys.stderr)
        return
    if "\n" in message:
        CQRLogger.error("Error during run:")
        for line in message.split("\n"):
            if line.strip():
                CQRLogger.error(f"  {line}")
    else:
        CQRLogger.error(f"Error during run: {message}")


def _plan(args: argparse.Namespace, general: Dict[str, Any]) -> Tuple[str, Dict, int, Path]:
    """Subcommand, parameters, seed and output path of this invocation"""
    if args.command == "rerun":
        manifest = read_manifest(args.manifest)
        if manifest.subcommand not in EXECUTORS:
            raise CQRValidationError(f"manifest has unknown subcommand {manifest.subcommand!r}")
        if args.out is not None:
            out = Path(args.out)
        elif manifest.outputs:
            out = Path(manifest.outputs[0])
        else:
            raise CQRValidationError("manifest records no output path; pass --out")
        seed = manifest.seed if args.seed is None else args.seed
        return manifest.subcommand, manifest.parameters, seed, out

    params = PARAMETER_BUILDERS[args.command](args)
    seed = int(general.get("seed", 0)) if args.seed is None else args.seed
    return args.command, params, seed, Path(args.out)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and write its manifest"""
    parser = _build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 2

    try:
        general = load_defaults("general")
        threads = int(general.get("threads", 1)) if args.threads is None else args.threads
        level_name = args.log_level or str(general.get("log_level", "INFO")).upper()
        if threads < 1:
            raise CQRValidationError(f"threads must be >= 1 (got {threads})")

        subcommand, params, seed, out = _plan(args, general)

        # Setup logging for this run
        CQRLogger.setup_logger(out, getattr(logging, level_name, logging.INFO))
        CQRLogger.info(f"Starting {subcommand} (seed={seed}, threads={threads})")

        try:
            code, outputs = EXECUTORS[subcommand](params, seed, out, threads)
        except KeyError as e:
            raise CQRValidationError(f"{subcommand} parameters lack {e}") from None

        manifest = RunManifest(
            subcommand=subcommand,
            parameters=params,
            seed=seed,
            version=__version__,
            outputs=[str(path) for path in outputs],
        )
        manifest_file = write_manifest(out, manifest)
        CQRLogger.info(f"Manifest: {manifest_file}")
        return code

    except (CQRValidationError, SketchSpecError) as e:
        _report_error(str(e))
        return 2 if getattr(e, "usage", True) else 1
    except Exception as e:
        import traceback

        _report_error(str(e) or type(e).__name__)
        CQRLogger.debug("Full traceback:")
        CQRLogger.debug(traceback.format_exc())
        return 1
    finally:
        # Always print log file path for easy access
        log_path = CQRLogger.get_log_file_path()
        if log_path:
            print(f"\nLog file: {log_path}")
        CQRLogger.cleanup()


if __name__ == "__main__":
    sys.exit(main())
