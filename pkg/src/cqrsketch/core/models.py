"""
Result models for cqrsketch runs

Plain dataclasses handed from the numerical core to writers and the CLI.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

TRACE_COLUMNS = ["method", "k", "seed", "step", "loss", "bound"]
SUMMARY_COLUMNS = ["step", "mean", "stderr", "bound", "pass"]
CURVE_COLUMNS = ["method", "seed", "params", "step", "eval_loss", "window_loss"]
MANIFEST_KEYS = ("tool", "version", "subcommand", "parameters", "seed", "outputs")


@dataclass
class ConvergenceTrace:
    """Losses of one solver run; step 0 is the starting point T0 = 0"""

    method: str
    k: int
    seed: int
    losses: List[float] = field(default_factory=list)
    bounds: Optional[List[float]] = None

    @property
    def steps(self) -> int:
        return len(self.losses) - 1

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for step, loss in enumerate(self.losses):
            bound = self.bounds[step] if self.bounds is not None else None
            rows.append(
                {
                    "method": self.method,
                    "k": self.k,
                    "seed": self.seed,
                    "step": step,
                    "loss": loss,
                    "bound": bound,
                }
            )
        return rows


@dataclass
class StepSummary:
    """Mean and standard error of the loss at one step across repetitions"""

    step: int
    mean: float
    stderr: float
    bound: Optional[float] = None

    @property
    def passed(self) -> bool:
        if self.bound is None:
            return True
        return self.mean <= self.bound + 3.0 * self.stderr + 1e-9 * abs(self.bound)

    def to_row(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "mean": self.mean,
            "stderr": self.stderr,
            "bound": self.bound,
            "pass": self.passed,
        }


@dataclass
class RunManifest:
    """
    Everything needed to re-execute a CLI run.

    Written next to the main output as <out>.manifest.json. Thread counts and
    timestamps are left out so reruns produce byte-identical manifests.
    """

    subcommand: str
    parameters: Dict[str, Any]
    seed: int
    version: str
    outputs: List[str] = field(default_factory=list)
    tool: str = "cqrsketch"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        return {key: data[key] for key in MANIFEST_KEYS}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        missing = [key for key in ("subcommand", "parameters", "seed") if key not in data]
        if missing:
            raise ValueError(f"manifest is missing {', '.join(missing)}")
        return cls(
            subcommand=str(data["subcommand"]),
            parameters=dict(data["parameters"]),
            seed=int(data["seed"]),
            version=str(data.get("version", "")),
            outputs=list(data.get("outputs", [])),
            tool=str(data.get("tool", "cqrsketch")),
        )
