"""Pass/fail records shared by the structural checks and the verification harness."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


@dataclass
class Verdict:
    """Outcome of one property check.

    ``violation`` is the measured worst excess over the asserted inequality
    (0 when it holds with room to spare); the check passes iff
    ``violation <= tolerance``. Checks whose hypotheses cannot be confirmed
    report ``status = "inconclusive"`` instead of failing.
    """

    property_id: str
    statement: str
    violation: float
    tolerance: float
    status: str = ""
    witness: Any = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = PASS if self.violation <= self.tolerance else FAIL

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def line(self) -> str:
        return (
            f"[{self.status.upper():>12}] {self.property_id:<40} "
            f"violation={self.violation:.3e} tol={self.tolerance:.1e}  {self.statement}"
        )


@dataclass
class VerificationReport:
    summary: dict
    verdicts: list[Verdict]
    monotone: bool | None = None
    runtime: float = 0.0

    def __post_init__(self):
        if not self.verdicts:
            raise ValueError("a verification report needs at least one verdict")

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        return 0 if self.all_passed else 1

    def to_json(self, include_runtime: bool = False) -> str:
        doc = {
            "summary": _jsonable(self.summary),
            "monotone": self.monotone,
            "all_passed": self.all_passed,
            "verdicts": [v.to_dict() for v in self.verdicts],
        }
        if include_runtime:
            doc["runtime"] = self.runtime
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"{k}: {v}" for k, v in sorted(self.summary.items())]
        lines.append(f"monotone assembly: {self.monotone}")
        lines.append("-" * 100)
        lines.extend(v.line() for v in self.verdicts)
        lines.append("-" * 100)
        n_pass = sum(v.passed for v in self.verdicts)
        lines.append(f"{n_pass}/{len(self.verdicts)} verdicts passed")
        return "\n".join(lines) + "\n"
