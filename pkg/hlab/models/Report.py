import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np


class Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    HYPOTHESIS_VIOLATED = "hypothesis_violated"


def to_jsonable(value: Any) -> Any:
    """Turn numpy values, complex numbers and infinities into plain JSON values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {"re": to_jsonable(value.real.tolist()), "im": to_jsonable(value.imag.tolist())}
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(value.real)), "im": to_jsonable(float(value.imag))}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, Enum):
        return value.value
    return value


@dataclass
class Report:
    """Outcome of a sampled verification sweep over an operator or cone."""
    check: str
    subject: str
    n: int
    samples: int
    max_violation: float = 0.0
    witnesses: List[Dict[str, Any]] = field(default_factory=list)
    passed: bool = True
    anchor: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)

    MAX_WITNESSES = 5

    def record(self, violation: float, tolerance: float, **witness) -> None:
        """Fold one sample's violation in; keep the worst few witnesses. Non-finite violations fail."""
        violation = float(violation)
        if math.isnan(violation):
            violation = math.inf
        self.max_violation = max(self.max_violation, violation)
        if violation > tolerance:
            self.passed = False
            witness["violation"] = violation
            self.witnesses.append(witness)
            self.witnesses.sort(key=lambda w: -w["violation"])
            del self.witnesses[self.MAX_WITNESSES:]

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "check": self.check,
            "operator": self.subject,
            "n": self.n,
            "samples": self.samples,
            "max_violation": self.max_violation,
            "witnesses": self.witnesses,
            "pass": self.passed,
            "anchors": [self.anchor] if self.anchor else [],
        }
        out.update(self.extra)
        return to_jsonable(out)


@dataclass
class CheckReport:
    """Outcome of a grid check; `epsilon` is the slack the check realized."""
    name: str
    grid_size: int
    max_violation: float
    tolerance: float
    witness: Optional[Sequence[complex]] = None
    margin: float = 0.0
    epsilon: Optional[float] = None
    status: Status = Status.PASS
    anchor: str = ""
    hypothesis: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.status != Status.HYPOTHESIS_VIOLATED:
            self.status = Status.PASS if self.max_violation <= self.tolerance else Status.FAIL

    @property
    def passed(self) -> bool:
        return self.status == Status.PASS

    @classmethod
    def hypothesis_violated(cls, name: str, grid_size: int, error, anchor: str = "") -> "CheckReport":
        return cls(
            name=name,
            grid_size=grid_size,
            max_violation=math.inf,
            tolerance=0.0,
            witness=error.point,
            margin=error.value if error.value is not None else math.nan,
            status=Status.HYPOTHESIS_VIOLATED,
            anchor=anchor,
            hypothesis=error.inequality,
        )

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "check": self.name,
            "grid_size": self.grid_size,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "witnesses": [] if self.witness is None else [{"z": list(np.asarray(self.witness))}],
            "margin": self.margin,
            "epsilon": self.epsilon,
            "status": self.status,
            "pass": self.passed,
            "anchors": [self.anchor] if self.anchor else [],
        }
        if self.hypothesis is not None:
            out["hypothesis"] = self.hypothesis
        out.update(self.extra)
        return to_jsonable(out)


def dump_json(document: Dict[str, Any]) -> str:
    """Stable, full-precision JSON text; identical input gives identical bytes."""
    return json.dumps(to_jsonable(document), indent=2, sort_keys=True) + "\n"


def dump_csv(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buffer.getvalue()


def _csv_cell(value: Any) -> str:
    value = to_jsonable(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)
