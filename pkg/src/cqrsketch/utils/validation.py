"""
Parameter validation for cqrsketch

Collects errors and warnings for experiment parameters before any numerical
work starts. Hypothesis violations (e.g. k <= d2, p_n > 1/n) are usage errors;
the CLI maps them to exit code 2.
"""

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Sequence

if TYPE_CHECKING:
    from ..core.training import TrainConfig


class CQRValidationError(ValueError):
    """Raised when parameters or inputs violate an operation's preconditions"""

    def __init__(self, message: str, usage: bool = True):
        super().__init__(message)
        self.usage = usage


class DimensionMismatchError(ValueError):
    """Raised when matrix shapes do not agree"""


class NonFiniteError(ValueError):
    """Raised when a matrix or vector holds NaN or Inf"""


@dataclass
class ValidationReport:
    """Errors and warnings found while checking one set of parameters"""

    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def has_errors(self) -> bool:
        return len(self.errors) > 0

    @property
    def has_warnings(self) -> bool:
        return len(self.warnings) > 0

    def merge(self, other: "ValidationReport") -> "ValidationReport":
        self.errors.extend(other.errors)
        self.warnings.extend(other.warnings)
        return self

    def raise_if_errors(self) -> None:
        """Raise a usage error listing every collected error"""
        if not self.has_errors:
            return
        if len(self.errors) == 1:
            raise CQRValidationError(self.errors[0])
        raise CQRValidationError(
            "Invalid parameters:\n" + "\n".join(f"  • {error}" for error in self.errors)
        )


class ParameterValidator:
    """Checks shared by the solver, theory, trainer and CLI layers"""

    @staticmethod
    def check_positive(report: ValidationReport, **values: float) -> ValidationReport:
        for name, value in values.items():
            if value is None or value < 1:
                report.errors.append(f"{name} must be >= 1 (got {value})")
        return report

    @staticmethod
    def check_problem_sizes(n: int, d1: int, d2: int, strict: bool = True) -> ValidationReport:
        """Least-squares regime n > d1 > d2 >= 1; a warning only when strict is False"""
        report = ValidationReport()
        ParameterValidator.check_positive(report, n=n, d1=d1, d2=d2)
        if report.has_errors:
            return report
        if not (n > d1 > d2):
            message = f"expected n > d1 > d2 (got n={n}, d1={d1}, d2={d2})"
            (report.errors if strict else report.warnings).append(message)
        return report

    @staticmethod
    def check_sketch_width(d1: int, d2: int, k: int, allow_full: bool = True) -> ValidationReport:
        """d2 < k <= d1; k == d1 (no compression) is a warning when allow_full"""
        report = ValidationReport()
        if k <= d2:
            report.errors.append(f"k must exceed d2 (got k={k}, d2={d2}); the bound is vacuous")
        elif k > d1:
            report.errors.append(
                f"k must not exceed d1 (got k={k}, d1={d1}); nothing is compressed"
            )
        elif k == d1:
            message = f"k equals d1 ({k}); the sketch does not compress"
            (report.warnings if allow_full else report.errors).append(message)
        return report

    @staticmethod
    def check_theorem_sizes(n: int, d1: int, d2: int, k: int) -> ValidationReport:
        """Theorem hypothesis n > d1 > k > d2 >= 1"""
        report = ValidationReport()
        ParameterValidator.check_positive(report, n=n, d1=d1, d2=d2, k=k)
        if not report.has_errors and not (n > d1 > k > d2):
            report.errors.append(
                f"expected n > d1 > k > d2 (got n={n}, d1={d1}, k={k}, d2={d2})"
            )
        return report

    @staticmethod
    def check_probability_vector(p: Sequence[float], n: int) -> ValidationReport:
        """Hypothesis of the IID lemma: p_i >= 0, sum p = 1, p_n <= 1/n"""
        report = ValidationReport()
        if len(p) != n:
            report.errors.append(f"p must have n={n} entries (got {len(p)})")
            return report
        if any(not math.isfinite(value) or value < 0 for value in p):
            report.errors.append("p entries must be finite and non-negative")
        if abs(math.fsum(p) - 1.0) > 1e-9:
            report.errors.append(f"p must sum to 1 (got {math.fsum(p)!r})")
        if p and p[-1] > 1.0 / n + 1e-12:
            report.errors.append(f"p_n must be <= 1/n = {1.0 / n:.6g} (got {p[-1]:.6g})")
        return report

    @staticmethod
    def check_train_config(cfg: "TrainConfig", d1: int, d2: int) -> ValidationReport:
        report = ValidationReport()
        ParameterValidator.check_positive(report, k=cfg.k, epochs=cfg.epochs)
        if not cfg.learning_rate > 0:
            report.errors.append(f"learning_rate must be > 0 (got {cfg.learning_rate})")
        if not 0.0 < cfg.cqr_cluster_after <= 1.0:
            report.errors.append(
                f"cqr_cluster_after must be in (0, 1] (got {cfg.cqr_cluster_after})"
            )
        if not 0.0 <= cfg.cqr_split < 1.0:
            report.errors.append(f"cqr_split must be in [0, 1) (got {cfg.cqr_split})")
        if cfg.method in ("qr_concat", "qr_hybrid", "cqr", "pq"):
            if cfg.blocks < 1:
                report.errors.append(f"blocks must be >= 1 (got {cfg.blocks})")
            elif cfg.blocks > d2:
                report.errors.append(f"blocks must not exceed d2={d2} (got {cfg.blocks})")
        if cfg.method == "cqr" and not report.has_errors:
            clusters = cfg.cluster_columns
            if clusters < 1:
                report.errors.append(
                    f"cqr_split={cfg.cqr_split} leaves no cluster columns out of k={cfg.k}"
                )
        if cfg.injective and (cfg.method != "hashing_trick" or cfg.k < d1):
            report.errors.append(f"injective hashing needs method hashing_trick with k >= d1={d1}")
        if cfg.k > d1:
            report.warnings.append(f"k={cfg.k} exceeds d1={d1}; the table is not compressed")
        return report
