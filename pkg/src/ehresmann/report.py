"""Check records shared by the validators, scenario suites and the CLI."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class CheckRecord:
    """One verified identity: its worst deviation against a threshold."""

    check_id: str
    reference: str
    max_dev: float
    threshold: float
    passed: bool
    worst_point: tuple | None = None

    def as_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "reference": self.reference,
            "max_dev": self.max_dev,
            "threshold": self.threshold,
            "pass": self.passed,
            "worst_point": list(self.worst_point)
            if self.worst_point is not None else None,
        }


class DevTracker:
    """Accumulates the worst deviation and where it happened."""

    def __init__(self):
        self.max_dev = 0.0
        self.worst_point = None

    def update(self, dev: float, point=None):
        if dev > self.max_dev:
            self.max_dev = dev
            self.worst_point = tuple(point) if point is not None else None

    def record(self, check_id: str, reference: str,
               threshold: float) -> CheckRecord:
        return CheckRecord(check_id, reference, self.max_dev, threshold,
                           self.max_dev < threshold, self.worst_point)
