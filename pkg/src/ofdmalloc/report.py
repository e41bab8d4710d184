"""Solver result container and its serialization.

A report is written as a JSON document with a ``schema`` tag.  Floats keep
full round-trip precision.  Orders are serialized 1-based: the global order
lists users by multiplier descending, which is the downlink encoding order
(reverse it for the uplink SIC decode sequence); per-carrier orders list
users by decreasing gain, i.e. in uplink decode sequence.

``wall_time_s`` is kept out of the file unless explicitly requested so that
a report is byte-identical across runs with the same inputs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA = "ofdmalloc-report/1"
LN2 = math.log(2.0)

__all__ = ["DualState", "SolverReport", "write_report", "write_trace_csv", "SCHEMA", "LN2"]


@dataclass(frozen=True)
class DualState:
    """Multipliers at the solution: power price, rate-constraint prices and
    the composite weights (plain weights plus rate prices)."""

    lam: float
    mu_tilde: np.ndarray
    mu_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu_tilde", np.asarray(self.mu_tilde, dtype=np.float64))
        object.__setattr__(self, "mu_star", np.asarray(self.mu_star, dtype=np.float64))


@dataclass
class SolverReport:
    """Converged allocation plus everything needed to audit it."""

    problem: str
    converged: bool
    iterations: int
    rates: np.ndarray  # (M, K), nats
    powers_mac: np.ndarray
    powers_bc: np.ndarray
    duals: DualState
    order: list  # users by multiplier descending, 0-based
    carrier_orders: np.ndarray | None  # (K, M) users by gain descending, or None
    kkt: dict
    trace: list
    trace_kind: str
    objective: float
    wall_time_s: float = 0.0
    certificates: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def sum_power(self) -> float:
        return float(self.powers_mac.sum())

    @property
    def rate_totals(self) -> np.ndarray:
        return self.rates.sum(axis=1)

    def to_dict(self, include_timing: bool = False) -> dict:
        doc = {
            "schema": SCHEMA,
            "problem": self.problem,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "rates_nats": _matrix(self.rates),
            "rates_bits": _matrix(self.rates / LN2),
            "rate_totals_nats": _vector(self.rate_totals),
            "rate_totals_bits": _vector(self.rate_totals / LN2),
            "powers_mac": _matrix(self.powers_mac),
            "powers_bc": _matrix(self.powers_bc),
            "sum_power": self.sum_power,
            "objective": float(self.objective),
            "duals": {
                "lambda": float(self.duals.lam),
                "mu_tilde": _vector(self.duals.mu_tilde),
                "mu_star": _vector(self.duals.mu_star),
            },
            "order": [int(u) + 1 for u in self.order],
            "carrier_orders": (
                None
                if self.carrier_orders is None
                else [[int(u) + 1 for u in row] for row in self.carrier_orders]
            ),
            "kkt": {k: float(v) for k, v in self.kkt.items()},
            "trace_kind": self.trace_kind,
            "trace": [float(v) for v in self.trace],
            "certificates": self.certificates,
            "details": _plain(self.details),
        }
        if include_timing:
            doc["wall_time_s"] = float(self.wall_time_s)
        return doc


def _matrix(arr) -> list:
    return [[float(v) for v in row] for row in np.asarray(arr)]


def _vector(arr) -> list:
    return [float(v) for v in np.asarray(arr)]


def _plain(value):
    """Recursively convert numpy scalars/arrays for JSON output."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def write_report(report: SolverReport, path, include_timing: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(include_timing=include_timing), fh, indent=1)
        fh.write("\n")


def write_trace_csv(report: SolverReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", report.trace_kind])
        for i, v in enumerate(report.trace, start=1):
            writer.writerow([i, repr(float(v))])
