"""Structured check records and suite reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


def format_point(p) -> str:
    return "(" + ", ".join(f"{float(x):.6g}" for x in p) + ")"


@dataclass(frozen=True)
class CheckRecord:
    """One verified identity: ``residual <= tolerance`` means pass.

    ``expect_fail`` marks witness checks that must exceed the tolerance.
    """

    check: str
    location: str
    residual: float
    tolerance: float
    expect_fail: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        if math.isnan(self.residual):
            return False
        within = self.residual <= self.tolerance
        return not within if self.expect_fail else within

    def to_dict(self) -> dict:
        out = {
            "check": self.check,
            "location": self.location,
            "residual": self.residual if math.isfinite(self.residual) else str(self.residual),
            "tolerance": self.tolerance,
            "status": "pass" if self.passed else "fail",
        }
        if self.expect_fail:
            out["expect"] = "exceed-tolerance"
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class SuiteReport:
    fixture: str
    suite: str
    seed: int
    records: list[CheckRecord] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if not r.passed]

    def extend(self, records) -> None:
        self.records.extend(records)

    def sorted_records(self) -> list[CheckRecord]:
        return sorted(self.records, key=lambda r: (r.check, r.location))

    def body(self) -> dict:
        """Everything except wall time; identical for identical config and seed."""
        return {
            "fixture": self.fixture,
            "suite": self.suite,
            "seed": self.seed,
            "passed": self.passed,
            "counts": {"total": len(self.records), "failed": len(self.failures())},
            "records": [r.to_dict() for r in self.sorted_records()],
        }

    def to_json(self) -> str:
        doc = self.body()
        doc["wall_time"] = round(self.wall_time, 6)
        return json.dumps(doc, indent=2)

    def summary(self) -> str:
        by_check: dict[str, list[CheckRecord]] = {}
        for r in self.sorted_records():
            by_check.setdefault(r.check, []).append(r)
        width = max([len(c) for c in by_check] + [5])
        lines = [f"{'check':<{width}}  {'n':>4}  {'fail':>4}  {'worst':>10}  {'tol':>8}"]
        for check, recs in by_check.items():
            fails = sum(not r.passed for r in recs)
            worst = max(r.residual for r in recs)
            lines.append(f"{check:<{width}}  {len(recs):>4}  {fails:>4}  {worst:>10.3e}  {recs[0].tolerance:>8.1e}")
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"{self.fixture} / {self.suite}: {verdict} ({len(self.records)} checks, {self.wall_time:.2f}s)")
        return "\n".join(lines)
