"""Verification reports: residual checks with JSON and aligned-text rendering."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np


@dataclass
class Check:
    name: str
    max_residual: float
    tolerance: float
    passed: bool
    points: int
    seed: int | None = None
    # informational entries are reported but never affect the verdict
    informational: bool = False
    note: str = ""

    @classmethod
    def at_most(cls, name: str, residual: float, tol: float, points: int, seed: int | None = None,
                note: str = "") -> "Check":
        residual = float(residual)
        return cls(name, residual, tol, bool(residual <= tol), points, seed, note=note)

    @classmethod
    def at_least(cls, name: str, value: float, threshold: float, points: int,
                 seed: int | None = None, note: str = "") -> "Check":
        value = float(value)
        return cls(name, value, threshold, bool(value >= threshold), points, seed,
                   note=note or f"passes when value >= {threshold:g}")

    @classmethod
    def info(cls, name: str, value: float, points: int, seed: int | None = None, note: str = "") -> "Check":
        return cls(name, float(value), math.nan, True, points, seed, informational=True, note=note)


@dataclass
class VerificationReport:
    command: str
    source: str = ""
    checks: list[Check] = field(default_factory=list)
    values: dict[str, Any] = field(default_factory=dict)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, checks) -> None:
        self.checks.extend(checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def summary(self) -> dict[str, int]:
        scored = [c for c in self.checks if not c.informational]
        return {
            "checks": len(scored),
            "passed": sum(c.passed for c in scored),
            "failed": sum(not c.passed for c in scored),
            "informational": len(self.checks) - len(scored),
        }

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.informational and not c.passed]

    def to_dict(self) -> dict[str, Any]:
        return _clean({
            "command": self.command,
            "source": self.source,
            "passed": self.passed,
            "summary": self.summary(),
            "checks": [asdict(c) for c in self.checks],
            "values": self.values,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        head = ("check", "max_residual", "tolerance", "status", "points", "seed")
        rows = []
        for c in self.checks:
            status = "info" if c.informational else ("pass" if c.passed else "FAIL")
            tol = "-" if c.informational else f"{c.tolerance:.1e}"
            rows.append((c.name, f"{c.max_residual:.3e}", tol, status, str(c.points),
                         "-" if c.seed is None else str(c.seed)))
        widths = [max(len(r[i]) for r in [head, *rows]) for i in range(len(head))]
        lines = [f"{self.command}: {self.source}".rstrip(": ")]
        if rows:
            lines.append("  ".join(h.ljust(w) for h, w in zip(head, widths)))
            lines.append("  ".join("-" * w for w in widths))
        for r in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        notes = [(c.name, c.note) for c in self.checks if c.note]
        if notes:
            lines.append("")
            lines.extend(f"note [{name}]: {note}" for name, note in notes)
        if self.values:
            lines.append("")
            for key in sorted(self.values):
                lines.append(f"{key}: {json.dumps(_clean(self.values[key]), sort_keys=True)}")
        s = self.summary()
        if not self.checks:
            return "\n".join(lines)
        lines.append("")
        lines.append(f"{s['passed']}/{s['checks']} checks passed"
                     + (f", {s['informational']} informational" if s["informational"] else ""))
        return "\n".join(lines)


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy to python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def relative_residual(direct: np.ndarray, oracle: np.ndarray) -> float:
    """``max |direct - oracle| / max(1, |oracle|)``, elementwise."""
    direct, oracle = np.asarray(direct, float), np.asarray(oracle, float)
    if direct.size == 0:
        return 0.0
    return float(np.max(np.abs(direct - oracle) / np.maximum(1.0, np.abs(oracle))))


def absolute_residual(values: np.ndarray) -> float:
    values = np.asarray(values, float)
    return float(np.max(np.abs(values))) if values.size else 0.0
