"""Shared diagnostic-report plumbing: named checks, slope fits, canonical JSON.

Every verification routine in this package returns a DiagnosticReport so that
the CLI, the test suite, and library callers all consume the same structure.
Serialization is canonical (sorted keys, fixed float formatting via repr,
no timestamps) so that a fixed config and seed reproduce identical bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np


@dataclass
class CheckResult:
    """Outcome of a single named check.

    ``value`` always carries the measured datum, so a failing check is
    self-explanatory without rerunning anything.
    """

    name: str
    passed: bool
    value: Any = None
    threshold: Any = None
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": _jsonable(self.value),
            "threshold": _jsonable(self.threshold),
            "detail": self.detail,
        }


@dataclass
class DiagnosticReport:
    """A titled bundle of checks plus free-form numeric payload.

    ``anchor`` holds the formula snippet the verification is anchored to;
    ``fits`` maps series names to slope-fit summaries; ``data`` is arbitrary
    JSON-serializable payload (tables, spectra, witnesses).
    """

    title: str
    anchor: str = ""
    checks: list[CheckResult] = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add_check(self, name: str, passed: bool, value=None, threshold=None, detail: str = "") -> CheckResult:
        c = CheckResult(name, bool(passed), value, threshold, detail)
        self.checks.append(c)
        return c

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "anchor": self.anchor,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
            "fits": _jsonable(self.fits),
            "data": _jsonable(self.data),
        }

    def dumps(self) -> str:
        return canonical_json(self.to_json())

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())


def canonical_json(obj) -> str:
    """Deterministic JSON rendering: sorted keys, indent 2, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _jsonable(x):
    """Coerce numpy scalars/arrays and Fractions into plain JSON values."""
    if isinstance(x, Fraction):
        return {"fraction": [x.numerator, x.denominator]}
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, complex) or isinstance(x, np.complexfloating):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and (np.isnan(x) or np.isinf(x)):
        return repr(x)
    return x


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Delimited series output; floats via repr for round-trip fidelity."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_csv_cell(v) for v in row])


def _csv_cell(v):
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def loglog_fit(x, y, upper_half: bool = True):
    """Least-squares slope of log y against log x.

    Returns (slope, stderr, npoints). When ``upper_half`` is set only the
    upper half of the x-range (by sorted index) enters the fit, which is the
    convention used throughout for asymptotic exponents: the head of a ladder
    is transient, the tail carries the rate.

    Points with nonpositive x or y are dropped (log undefined); if fewer than
    two usable points remain the slope is None.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    order = np.argsort(x)
    x, y = x[order], y[order]
    if upper_half and len(x) >= 4:
        half = len(x) // 2
        x, y = x[half:], y[half:]
    if len(x) < 2:
        return None, None, int(len(x))
    lx, ly = np.log(x), np.log(y)
    if len(x) == 2:
        slope = (ly[1] - ly[0]) / (lx[1] - lx[0])
        return float(slope), 0.0, 2
    coeffs, cov = np.polyfit(lx, ly, 1, cov=True)
    return float(coeffs[0]), float(np.sqrt(cov[0, 0])), int(len(x))


def fit_summary(x, y, upper_half: bool = True) -> dict:
    slope, stderr, n = loglog_fit(x, y, upper_half=upper_half)
    return {"slope": slope, "stderr": stderr, "npoints": n}
