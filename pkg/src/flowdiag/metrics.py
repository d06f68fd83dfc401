from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import FlowDiagError

OK = 0
RESIDUAL_FAILURE = 1
MODEL_FAILURE = 2


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; complex numbers become [re, im]."""
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    raise TypeError(f"cannot serialize {type(value).__name__}")


def comparison_errors(numeric, closed_form) -> tuple[float, float | None]:
    """Max absolute deviation and the same relative to max |closed_form| (None when that is 0)."""
    a = np.atleast_1d(np.asarray(numeric, dtype=complex))
    b = np.atleast_1d(np.asarray(closed_form, dtype=complex))
    abs_error = float(np.max(np.abs(a - b)))
    scale = float(np.max(np.abs(b)))
    return abs_error, (abs_error / scale if scale > 0 else None)


def failed_residuals(residuals: dict[str, float], thresholds: dict[str, float]) -> list[str]:
    return [name for name, value in residuals.items() if name in thresholds and not value <= thresholds[name]]


@dataclass
class ComparisonRecord:
    method: str
    quantity: str
    numeric: Any = None
    closed_form: Any = None
    abs_error: float | None = None
    rel_error: float | None = None
    termination: str | None = None
    residuals: dict[str, float] = field(default_factory=dict)
    failed: list[str] = field(default_factory=list)
    error: dict[str, str] | None = None
    warning: str | None = None

    @classmethod
    def measured(
        cls,
        method: str,
        quantity: str,
        numeric,
        closed_form,
        termination: str | None,
        residuals: dict[str, float],
        thresholds: dict[str, float],
        warning: str | None = None,
    ) -> ComparisonRecord:
        abs_error, rel_error = comparison_errors(numeric, closed_form)
        residuals = {name: float(value) for name, value in residuals.items()}
        return cls(
            method=method,
            quantity=quantity,
            numeric=numeric,
            closed_form=closed_form,
            abs_error=abs_error,
            rel_error=rel_error,
            termination=termination,
            residuals=residuals,
            failed=failed_residuals(residuals, thresholds),
            warning=warning,
        )

    @classmethod
    def failure(cls, method: str, quantity: str, error: FlowDiagError) -> ComparisonRecord:
        return cls(method=method, quantity=quantity, error={"type": error.kind, "message": str(error)})

    @property
    def passed(self) -> bool:
        return self.error is None and not self.failed

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "quantity": self.quantity,
            "numeric": to_jsonable(self.numeric),
            "closed_form": to_jsonable(self.closed_form),
            "abs_error": to_jsonable(self.abs_error),
            "rel_error": to_jsonable(self.rel_error),
            "termination": self.termination,
            "residuals": to_jsonable(self.residuals),
            "failed": list(self.failed),
            "error": self.error,
            "warning": self.warning,
        }


@dataclass
class ChannelReport:
    index: tuple[int, ...]
    inputs: dict[str, Any]
    records: list[ComparisonRecord]
    comparison: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": list(self.index),
            "inputs": to_jsonable(self.inputs),
            "records": [r.to_dict() for r in self.records],
            "comparison": to_jsonable(self.comparison),
        }


@dataclass
class ComparisonReport:
    model: str
    method: str
    seed: int
    channels: list[ChannelReport]
    checks: list[dict[str, Any]] = field(default_factory=list)

    @property
    def records(self) -> list[ComparisonRecord]:
        return [r for ch in self.channels for r in ch.records]

    @property
    def exit_status(self) -> int:
        records = self.records
        if any(r.error is not None for r in records):
            return MODEL_FAILURE
        if any(r.failed for r in records) or any(not c["passed"] for c in self.checks):
            return RESIDUAL_FAILURE
        return OK

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "method": self.method,
            "seed": self.seed,
            "channels": [ch.to_dict() for ch in self.channels],
            "checks": to_jsonable(self.checks),
            "exit_status": self.exit_status,
        }

    def summary_rows(self) -> list[dict[str, Any]]:
        rows = []
        for ch in self.channels:
            for r in ch.records:
                row: dict[str, Any] = {"channel": "/".join(str(i) for i in ch.index)}
                row.update({k: v for k, v in ch.inputs.items() if isinstance(v, (int, float))})
                row.update(
                    method=r.method,
                    quantity=r.quantity,
                    abs_error=r.abs_error,
                    rel_error=r.rel_error,
                    termination=r.termination,
                    error=r.error["type"] if r.error else None,
                    passed=r.passed,
                )
                rows.append(row)
        return rows


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.4e}"
    return str(value)


def print_metrics(metrics: dict[str, Any], title: str = "Metrics") -> None:
    print(f"\n{title}:")
    for metric_name, value in metrics.items():
        print(f"  {metric_name}: {_format(value)}")


def print_record(record: ComparisonRecord, title: str) -> None:
    if record.error is not None:
        print_metrics({"error": record.error["type"], "message": record.error["message"]}, title)
        return
    metrics: dict[str, Any] = {"abs_error": record.abs_error, "termination": record.termination}
    if record.rel_error is not None:
        metrics["rel_error"] = record.rel_error
    metrics.update(record.residuals)
    if record.failed:
        metrics["above_threshold"] = ", ".join(record.failed)
    if record.warning:
        metrics["warning"] = record.warning
    print_metrics(metrics, title)
