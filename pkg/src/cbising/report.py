"""Structured pass/fail records for certified inequalities, with JSON and
CSV emission.  Writes are atomic (temp file + rename) so partial files are
never left behind on failure."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field


@dataclass
class VerificationReport:
    name: str
    inputs: dict
    lhs: float | None
    rhs: float | None
    tolerance: float | None
    verdict: bool
    seconds: float = 0.0
    details: dict = field(default_factory=dict)
    children: list["VerificationReport"] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.verdict) and all(c.passed for c in self.children)

    def to_json_dict(self) -> dict:
        d = {
            "name": self.name,
            "inputs": self.inputs,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "tolerance": self.tolerance,
            "verdict": "pass" if self.verdict else "fail",
            "seconds": round(self.seconds, 6),
        }
        if self.details:
            d["details"] = _jsonable(self.details)
        if self.children:
            d["children"] = [c.to_json_dict() for c in self.children]
        return d

    def flatten(self, prefix: str = ""):
        label = prefix + self.name
        yield label, self
        for c in self.children:
            yield from c.flatten(label + "/")

    def oneline(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        parts = [f"[{mark}] {self.name}"]
        if self.lhs is not None and self.rhs is not None:
            parts.append(f"lhs={self.lhs:.6g} rhs={self.rhs:.6g}")
        parts.append(f"({self.seconds:.2f}s)")
        return "  ".join(parts)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "to_json_dict"):
        return obj.to_json_dict()
    if hasattr(obj, "tolist"):  # numpy array
        return obj.tolist()
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj


@contextmanager
def timed(out: dict):
    t0 = time.perf_counter()
    yield
    out["seconds"] = time.perf_counter() - t0


def atomic_write_text(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def write_reports_json(path: str, reports: list[VerificationReport], config_echo: dict):
    doc = {
        "config": _jsonable(config_echo),
        "generated_unix": time.time(),
        "checks": [r.to_json_dict() for r in reports],
        "all_pass": all(r.passed for r in reports),
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def fmt_float(x) -> str:
    """Full-precision decimal form of a (possibly numpy) float."""
    return "" if x is None else repr(float(x))


def write_reports_csv(path: str, reports: list[VerificationReport]):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["name", "lhs", "rhs", "tolerance", "verdict", "seconds"])
    for rep in reports:
        for label, r in rep.flatten():
            w.writerow([
                label,
                fmt_float(r.lhs),
                fmt_float(r.rhs),
                fmt_float(r.tolerance),
                "pass" if r.verdict else "fail",
                f"{r.seconds:.6f}",
            ])
    atomic_write_text(path, buf.getvalue())
