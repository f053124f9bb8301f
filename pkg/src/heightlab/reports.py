"""Audit report record and its one-line text format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any


@dataclass
class AuditReport:
    """Outcome of one certified inequality check.

    ``margin`` is the smallest slack of the tested inequality (negative when
    violated). Failing reports carry the full inputs in ``counterexample``.
    """

    name: str
    instance: str
    passed: bool
    margin: float
    counterexample: dict[str, Any] | None = None
    in_hypothesis: bool = True
    details: dict[str, Any] = field(default_factory=dict)

    def to_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        instance = self.instance if self.in_hypothesis else f"{self.instance};out-of-hypothesis"
        return f"AUDIT {self.name} {status} margin={self.margin:.6g} instance={instance}"

    def __str__(self):
        return self.to_line()

    def counterexample_json(self) -> str:
        return json.dumps(
            {"audit": self.name, "instance": self.instance, "margin": float(self.margin),
             "counterexample": self.counterexample},
            indent=2,
            default=str,
        )


def parse_line(line: str) -> dict[str, Any]:
    """Inverse of :meth:`AuditReport.to_line` (fields as strings/floats)."""
    parts = line.strip().split(" ", 4)
    if len(parts) != 5 or parts[0] != "AUDIT":
        raise ValueError(f"not an audit line: {line!r}")
    _, name, status, margin, instance = parts
    return {
        "name": name,
        "passed": status == "PASS",
        "margin": float(margin.removeprefix("margin=")),
        "instance": instance.removeprefix("instance="),
    }
