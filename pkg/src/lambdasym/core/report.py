import json
from typing import Any, Dict, List, NamedTuple, Optional

SCHEMA_VERSION = 1


class CheckReport(NamedTuple):
    """
    Outcome of a symmetry check: the symbolic verdict ("zero", "nonzero" or
    "undecided") and statistics of |residual| over the sample points.
    """

    subject: str
    verdict: str
    max_residual: float
    mean_residual: float
    samples: int
    seed: int
    tol: float
    passed: bool
    rejected: int = 0
    residual: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "passed": self.passed,
            "rejected": self.rejected,
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, data: dict):
        return CheckReport(
            subject=data["subject"],
            verdict=data["verdict"],
            max_residual=data["max_residual"],
            mean_residual=data["mean_residual"],
            samples=data["samples"],
            seed=data["seed"],
            tol=data["tol"],
            passed=data["passed"],
            rejected=data.get("rejected", 0),
            residual=data.get("residual"),
        )


class VerificationReport(NamedTuple):
    """
    Trajectory verification of a reduced map. status is "pass", "fail" or
    "inconclusive" (every trajectory diverged before a deviation could be measured).
    """

    status: str
    max_deviation: Optional[float]
    trials: int
    steps: int
    divergent: int
    tol: float
    seed: int
    conservation: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "max_deviation": self.max_deviation,
            "trials": self.trials,
            "steps": self.steps,
            "divergent": self.divergent,
            "tol": self.tol,
            "seed": self.seed,
            "conservation": self.conservation,
        }

    @classmethod
    def from_dict(cls, data: dict):
        return VerificationReport(
            status=data["status"],
            max_deviation=data["max_deviation"],
            trials=data["trials"],
            steps=data["steps"],
            divergent=data["divergent"],
            tol=data["tol"],
            seed=data["seed"],
            conservation=data.get("conservation"),
        )


class ConvergenceReport(NamedTuple):
    h_values: List[float]
    errors: List[float]
    # None on the exact path
    ratios: List[Optional[float]]
    passed: bool
    exact: bool = False
    consistency: Optional[List[float]] = None
    reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "h_values": list(self.h_values),
            "errors": list(self.errors),
            "ratios": list(self.ratios),
            "passed": self.passed,
            "exact": self.exact,
            "consistency": None if self.consistency is None else list(self.consistency),
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict):
        return ConvergenceReport(
            h_values=list(data["h_values"]),
            errors=list(data["errors"]),
            ratios=list(data["ratios"]),
            passed=data["passed"],
            exact=data.get("exact", False),
            consistency=data.get("consistency"),
            reason=data.get("reason"),
        )


class RunReport(NamedTuple):
    """
    Everything one CLI run produced. The JSON form has sorted keys so that two
    runs with the same command and seed differ only in `elapsed`.
    """

    version: str
    command: str
    scheme: str
    inputs: Dict[str, Any]
    results: Dict[str, Any]
    passed: bool
    elapsed: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "version": self.version,
            "command": self.command,
            "scheme": self.scheme,
            "inputs": self.inputs,
            "results": self.results,
            "passed": self.passed,
            "elapsed": self.elapsed,
        }

    @classmethod
    def from_dict(cls, data: dict):
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"Unsupported report schema version {data.get('schema_version')}")
        return RunReport(
            version=data["version"],
            command=data["command"],
            scheme=data["scheme"],
            inputs=data["inputs"],
            results=data["results"],
            passed=data["passed"],
            elapsed=data.get("elapsed", 0.0),
            schema_version=data["schema_version"],
        )

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [f"{self.command} {self.scheme}: {'PASS' if self.passed else 'FAIL'}"]
        for key, value in sorted(self.inputs.items()):
            lines.append(f"  {key} = {value}")
        lines.extend(_render(self.results, indent=2))
        lines.append(f"  elapsed = {self.elapsed:.3f}s")
        return "\n".join(lines) + "\n"


def _render(value: Any, indent: int) -> List[str]:
    pad = " " * indent
    lines = []
    if isinstance(value, dict):
        for key, item in sorted(value.items()):
            if isinstance(item, (dict, list)) and item:
                lines.append(f"{pad}{key}:")
                lines.extend(_render(item, indent + 2))
            else:
                lines.append(f"{pad}{key} = {item}")
    elif isinstance(value, list):
        for i, item in enumerate(value):
            if isinstance(item, (dict, list)):
                lines.append(f"{pad}[{i}]")
                lines.extend(_render(item, indent + 2))
            else:
                lines.append(f"{pad}- {item}")
    return lines
