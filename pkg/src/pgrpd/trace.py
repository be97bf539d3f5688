"""Per-iteration convergence records shared by all solvers."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, fields, astuple

import numpy as np

__all__ = ["Status", "TraceRecord", "Trace", "Solution", "TRACE_COLUMNS"]


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_OUTER = "MaxOuter"
    MAX_GRADS = "MaxGrads"
    THETA_DOUBLED = "ThetaDoubled"
    DIVERGED = "Diverged"
    DESCENT_STOP = "DescentStop"

    def __str__(self):
        return self.value


@dataclass
class TraceRecord:
    k: int
    grad_evals: int
    obj: float
    dx_norm: float
    feas_y: float
    feas_A: float
    kkt_sp_max: float
    kkt_p: float
    mu_k: float
    wall_ms: float


TRACE_COLUMNS = tuple(f.name for f in fields(TraceRecord))


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


class Trace:
    """Ordered list of :class:`TraceRecord` with CSV round-tripping."""

    def __init__(self, records=None, cadence=1):
        self.records = list(records or [])
        self.cadence = int(cadence)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def append(self, rec):
        if self.records and rec.grad_evals < self.records[-1].grad_evals:
            raise ValueError("grad_evals must be nondecreasing along a trace")
        self.records.append(rec)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def grads_to(self, eps):
        """``grad_evals`` of the first record with ``kkt_p <= eps`` (or ``None``)."""
        for r in self.records:
            if r.kkt_p <= eps:
                return int(r.grad_evals)
        return None

    def to_csv(self, path, comment=None):
        with open(path, "w", newline="") as fh:
            fh.write(f"# kkt_p sampled every {self.cadence} iteration(s)\n")
            if comment:
                for line in str(comment).splitlines():
                    fh.write(f"# {line}\n")
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for r in self.records:
                fh.write(",".join(_fmt(v) for v in astuple(r)) + "\n")

    @classmethod
    def from_csv(cls, path):
        cadence = 1
        rows = []
        with open(path, newline="") as fh:
            lines = []
            for line in fh:
                if line.startswith("#"):
                    words = line.split()
                    if "every" in words:
                        try:
                            cadence = int(words[words.index("every") + 1])
                        except (ValueError, IndexError):
                            pass
                    continue
                lines.append(line)
        reader = csv.DictReader(lines)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header in {path}: {reader.fieldnames}")
        for row in reader:
            rows.append(TraceRecord(
                k=int(row["k"]),
                grad_evals=int(row["grad_evals"]),
                **{c: float(row[c]) for c in TRACE_COLUMNS[2:]},
            ))
        return cls(rows, cadence=cadence)


@dataclass
class Solution:
    """Result of a solve.

    ``x_best``/``y_best`` are the iterates following the smallest step
    ``||x^{k+1} - x^k||``; ``x``/``y``/``z`` are the last iterates.
    """

    x_best: np.ndarray
    y_best: np.ndarray
    z_at_best: object
    k_best: int
    status: Status
    trace: Trace
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    z: object = None
    doublings: int = 0
    counter: object = None
    iterates: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def outer_iterations(self):
        return sum(1 for r in self.trace if r.k > 0)
