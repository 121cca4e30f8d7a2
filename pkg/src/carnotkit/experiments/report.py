"""Run reports with deterministic JSON serialisation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


@dataclass
class Record:
    name: str
    value: object
    tolerance: object
    passed: bool
    formula: str
    anchor: str
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"name": self.name, "value": self.value, "tolerance": self.tolerance, "pass": bool(self.passed),
             "formula": self.formula, "anchor": self.anchor}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class RunReport:
    suite: str
    config: dict
    records: list[Record] = field(default_factory=list)
    series: dict = field(default_factory=dict)
    wall_time: float | None = None

    def check(self, name: str, value, tolerance, passed: bool, formula: str, anchor: str, **detail) -> Record:
        rec = Record(name, value, tolerance, bool(passed), formula, anchor, detail)
        self.records.append(rec)
        return rec

    def add_series(self, name: str, x, y, xlabel: str = "x", ylabel: str = "y") -> None:
        self.series[name] = {"x": list(np.asarray(x, dtype=float)), "y": list(np.asarray(y, dtype=float)),
                             "xlabel": xlabel, "ylabel": ylabel}

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self) -> dict:
        """Everything except wall time, so reruns serialise identically."""
        return clean({
            "suite": self.suite,
            "toolkit_version": __version__,
            "config": self.config,
            "records": [r.to_dict() for r in self.records],
            "series": self.series,
            "passed": self.passed,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "report.json"
        path.write_text(self.to_json())
        if self.wall_time is not None:
            (out / "timing.json").write_text(json.dumps({"wall_time_s": self.wall_time}) + "\n")
        return path

    def summary(self) -> str:
        lines = [f"[{self.suite}] {'PASS' if self.passed else 'FAIL'}"]
        for r in self.records:
            lines.append(f"  {'PASS' if r.passed else 'FAIL'}  {r.name}: value={_fmt(r.value)} tolerance={_fmt(r.tolerance)}")
        if self.wall_time is not None:
            lines.append(f"  wall time {self.wall_time:.2f} s")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(clean(v))
