"""
Convergence bounds for dense CQR and their Monte-Carlo checks

The expected loss after i dense CQR steps is bounded by

    (1 - rho)^(i (k - d2)) ||X T*||_F^2 + ||X T* - Y||_F^2

where rho = sigma_min(X)^2 / ||X||_F^2. With equal singular values
rho = 1/d1 and the bound is at most exp(-i (k - d2) / d1) ||X T*||^2 + loss*.

verify_* functions estimate the bounded expectations by simulation and pass
when the estimate is within three standard errors of the bound.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.validation import CQRValidationError, ParameterValidator, ValidationReport
from .hashing import derive_seed, make_rng
from .linalg import frobenius_sq, rho, sample_gaussian
from .models import SUMMARY_COLUMNS, StepSummary

IID_DISTRIBUTIONS = ("exponential", "chi_square_1")
THEOREM_PROBLEM_KINDS = ("gaussian", "equal_singular")


@dataclass(frozen=True)
class BoundParams:
    rho: float
    xt_star_norm_sq: float
    loss_star: float
    k: int
    d2: int

    def __post_init__(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise CQRValidationError(f"rho must be in (0, 1] (got {self.rho})")
        if self.xt_star_norm_sq < 0 or self.loss_star < 0:
            raise CQRValidationError("norms in a bound must be non-negative")


def _check_bound_width(bp: BoundParams, i: int) -> None:
    if bp.k <= bp.d2:
        raise CQRValidationError(f"k must exceed d2 (got k={bp.k}, d2={bp.d2})")
    if i < 0:
        raise CQRValidationError(f"iteration must be >= 0 (got {i})")


def theorem_bound(bp: BoundParams, i: int) -> float:
    """(1 - rho)^(i (k - d2)) ||XT*||^2 + loss*"""
    _check_bound_width(bp, i)
    return (1.0 - bp.rho) ** (i * (bp.k - bp.d2)) * bp.xt_star_norm_sq + bp.loss_star


def corollary_bound(bp: BoundParams, i: int, d1: int) -> float:
    """exp(-i (k - d2) / d1) ||XT*||^2 + loss*, valid when rho = 1/d1"""
    _check_bound_width(bp, i)
    return math.exp(-i * (bp.k - bp.d2) / d1) * bp.xt_star_norm_sq + bp.loss_star


@dataclass
class TheoremReport:
    """Per-step Monte-Carlo means of dense CQR against the bound"""

    parameters: Dict[str, Any]
    rho: float
    half_m: List[StepSummary]
    full_m: List[StepSummary]
    corollary: Optional[List[float]] = None

    @property
    def nested(self) -> List[bool]:
        """Free M is no worse than [I | M'] at every step, up to 3 stderr"""
        return [
            full.mean <= half.mean + 3.0 * math.hypot(full.stderr, half.stderr) + 1e-9 * half.mean
            for half, full in zip(self.half_m, self.full_m)
        ]

    @property
    def passed(self) -> bool:
        return all(step.passed for step in self.half_m) and all(self.nested)

    def to_rows(self) -> List[Dict[str, Any]]:
        return [step.to_row() for step in self.half_m]

    def to_dict(self) -> Dict[str, Any]:
        steps = []
        for index, (half, full, nested) in enumerate(zip(self.half_m, self.full_m, self.nested)):
            row = half.to_row()
            row.update({"full_mean": full.mean, "full_stderr": full.stderr, "nested": nested})
            if self.corollary is not None:
                row["corollary_bound"] = self.corollary[index]
            steps.append(row)
        return {
            "check": "theorem",
            "parameters": self.parameters,
            "rho": self.rho,
            "passed": self.passed,
            "columns": SUMMARY_COLUMNS,
            "steps": steps,
        }


@dataclass
class LemmaReport:
    """Monte-Carlo estimate of a scalar expectation against its bound"""

    check: str
    estimate: float
    stderr: float
    bound: float
    passed: bool
    reps: int
    degenerate: bool = False
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check": self.check,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "bound": self.bound,
            "passed": self.passed,
            "reps": self.reps,
            "degenerate": self.degenerate,
            **self.details,
        }


def _mean_stderr(samples: np.ndarray) -> Tuple[float, float]:
    mean = float(samples.mean())
    if samples.size < 2:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / math.sqrt(samples.size))


def verify_theorem(
    n: int,
    d1: int,
    d2: int,
    k: int,
    steps: int,
    reps: int,
    seed: int,
    kind: str = "gaussian",
    noise: float = 0.1,
    threads: int = 1,
) -> TheoremReport:
    """
    Run dense CQR with M = [I | M'] (the form the bound is proven for) and with
    free M on one random problem, reps times each with shared noise seeds.
    """
    from .solver import (
        SolverKind,
        SolverVariant,
        dense_cqr,
        make_problem,
        run_repetitions,
        summarize_traces,
    )

    report = ParameterValidator.check_theorem_sizes(n, d1, d2, k)
    if steps < 0:
        report.errors.append(f"steps must be >= 0 (got {steps})")
    if reps < 1:
        report.errors.append(f"reps must be >= 1 (got {reps})")
    if kind not in THEOREM_PROBLEM_KINDS:
        choices = ", ".join(THEOREM_PROBLEM_KINDS)
        report.errors.append(f"kind must be one of {choices} (got {kind!r})")
    report.raise_if_errors()

    problem = make_problem(n, d1, d2, seed, noise=noise, kind=kind)
    half = SolverVariant(SolverKind.DENSE_PLAIN_HALFM)
    full = SolverVariant(SolverKind.DENSE_PLAIN)
    rep_seeds = [derive_seed(seed, rep + 1) for rep in range(reps)]

    half_traces = run_repetitions(
        lambda s: dense_cqr(problem, k, steps, half, s), rep_seeds, threads
    )
    full_traces = run_repetitions(
        lambda s: dense_cqr(problem, k, steps, full, s), rep_seeds, threads
    )

    params = problem.bound_params(k)
    corollary = None
    if kind == "equal_singular":
        corollary = [corollary_bound(params, step, d1) for step in range(steps + 1)]

    return TheoremReport(
        parameters={
            "n": n,
            "d1": d1,
            "d2": d2,
            "k": k,
            "steps": steps,
            "reps": reps,
            "seed": seed,
            "kind": kind,
            "noise": noise,
        },
        rho=params.rho,
        half_m=summarize_traces(half_traces),
        full_m=summarize_traces(full_traces),
        corollary=corollary,
    )


def vector_residual(
    x: np.ndarray, t: np.ndarray, g: np.ndarray, m: Optional[float] = None
) -> float:
    """
    ||X(g m - t)||^2 for a scalar m.

    Without m the minimizing m = <Xt, Xg> / ||Xg||^2 is used (0 if Xg = 0).
    """
    xt = x @ t
    xg = x @ g
    if m is None:
        denominator = float(xg @ xg)
        m = float(xg @ xt) / denominator if denominator > 0 else 0.0
    return frobenius_sq(xg * m - xt)


def verify_vector_lemma(
    n: int,
    d: int,
    reps: int,
    seed: int,
    x: Optional[np.ndarray] = None,
    t: Optional[np.ndarray] = None,
) -> LemmaReport:
    """E_g[inf_m ||X(gm - t)||^2] <= (1 - rho) ||Xt||^2 for g ~ N(0, I_d)"""
    report = ParameterValidator.check_positive(ValidationReport(), reps=reps)
    if not n >= d >= 2:
        report.errors.append(f"expected n >= d >= 2 (got n={n}, d={d})")
    report.raise_if_errors()

    x = sample_gaussian(n, d, seed, 0) if x is None else np.asarray(x, dtype=np.float64)
    t = sample_gaussian(d, 1, seed, 1)[:, 0] if t is None else np.asarray(t, dtype=np.float64)
    if x.shape != (n, d) or t.shape != (d,):
        raise CQRValidationError(f"expected X of shape ({n}, {d}) and t of length {d}")

    xt = x @ t
    target = frobenius_sq(xt)
    if target == 0.0:
        return LemmaReport(
            check="vector_lemma", estimate=0.0, stderr=0.0, bound=0.0,
            passed=True, reps=reps, degenerate=True,
        )

    rho_x = rho(x)
    bound = (1.0 - rho_x) * target
    g = make_rng(seed, 2).standard_normal((reps, d))
    xg = g @ x.T
    norms = np.einsum("ij,ij->i", xg, xg)
    m = np.divide(xg @ xt, norms, out=np.zeros(reps), where=norms > 0)
    residuals = np.einsum("ij,ij->i", xg * m[:, None] - xt, xg * m[:, None] - xt)

    estimate, stderr = _mean_stderr(residuals)
    return LemmaReport(
        check="vector_lemma",
        estimate=estimate,
        stderr=stderr,
        bound=bound,
        passed=estimate <= bound + 3.0 * stderr,
        reps=reps,
        details={"n": n, "d": d, "seed": seed, "rho": rho_x, "xt_norm_sq": target},
    )


def verify_iid_lemma(
    n: int, p: Sequence[float], dist: str, reps: int, seed: int
) -> LemmaReport:
    """E[a_n / sum_i p_i a_i] >= 1 for IID non-negative a when p_n <= 1/n"""
    report = ParameterValidator.check_probability_vector(list(p), n)
    ParameterValidator.check_positive(report, reps=reps)
    if dist not in IID_DISTRIBUTIONS:
        report.errors.append(f"dist must be one of {', '.join(IID_DISTRIBUTIONS)} (got {dist!r})")
    report.raise_if_errors()

    weights = np.asarray(p, dtype=np.float64)
    rng = make_rng(seed, 3)
    if dist == "exponential":
        a = rng.exponential(size=(reps, n))
    else:
        a = rng.standard_normal((reps, n)) ** 2
    ratios = a[:, -1] / (a @ weights)

    estimate, stderr = _mean_stderr(ratios)
    return LemmaReport(
        check="iid_lemma",
        estimate=estimate,
        stderr=stderr,
        bound=1.0,
        passed=estimate >= 1.0 - 3.0 * stderr,
        reps=reps,
        details={"n": n, "p": [float(v) for v in weights], "dist": dist, "seed": seed},
    )
