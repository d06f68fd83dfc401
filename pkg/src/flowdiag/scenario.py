from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .engine import IntegratorConfig
from .errors import ContractViolation, ScenarioError
from .matrix_flow import WEGNER_CONFIG

MODELS = ("quadratic", "eph", "threeboson", "matrix", "spins")
METHODS = ("fe", "cut", "both")
AUTO = "auto"

# required fields, optional fields with defaults, fields a sweep may turn into arrays
MODEL_FIELDS: dict[str, dict[str, Any]] = {
    "quadratic": {"required": ("f0", "g0"), "optional": {}, "sweepable": ("f0", "g0")},
    "eph": {
        "required": ("omega", "delta", "m0"),
        "optional": {"v0": 0.0},
        "sweepable": ("omega", "delta", "m0", "v0"),
    },
    "threeboson": {
        "required": ("beta1", "beta2", "psi1", "psi2"),
        "optional": {"phi0": [0.0, 0.0]},
        "sweepable": ("beta1", "beta2"),
    },
    "matrix": {"required": (), "optional": {"n": 8, "matrix": None}, "sweepable": ("n",)},
    "spins": {
        "required": ("n", "omega0", "alpha", "t_end"),
        "optional": {"J": None},
        "sweepable": ("omega0", "alpha", "t_end"),
    },
}
COMPLEX_FIELDS = ("psi1", "psi2", "phi0")
COMMON_FIELDS = ("model", "method", "integrator", "outputs", "seed", "thresholds", "max_channels")
OUTPUT_FIELDS = ("trajectory_csv", "report_json", "summary_csv")
INTEGRATOR_FIELDS = tuple(f.name for f in fields(IntegratorConfig))

DEFAULT_INTEGRATOR: dict[str, Any] = {"method": "adaptive", "abs_tol": 1e-12, "rel_tol": 1e-10, "l_max": AUTO}
# per-model overrides of DEFAULT_INTEGRATOR, applied before the scenario's own values
MODEL_INTEGRATOR_DEFAULTS: dict[str, dict[str, Any]] = {
    "matrix": {"abs_tol": WEGNER_CONFIG.abs_tol, "rel_tol": WEGNER_CONFIG.rel_tol},
}
DEFAULT_MAX_CHANNELS = 10_000

DEFAULT_THRESHOLDS: dict[str, float] = {
    "fe_vs_closed_form": 1e-8,
    "cut_vs_closed_form": 1e-8,
    "fe_vs_closed_form_rel": 1e-6,
    "fe_vs_cut": 1e-8,
    "trajectory_vs_closed_form": 1e-8,
    "invariant_drift": 1e-9,
    "final_abs_g": 1e-9,
    "cut_final_coupling": 1e-10,
    "spectrum_vs_oracle": 1e-6,
    "trace_drift_rel": 1e-9,
    "trace_sq_drift_rel": 1e-9,
    "offdiag_increase": 1e-12,
    "unitarity": 1e-8,
    "unitary_reconstruction": 1e-6,
    "cut_discrepancy": 1e-8,
    "cut_offdiag": 1e-8,
    "exact_distance": 1e-7,
    "trace_drift": 1e-9,
    "purity_drift": 1e-9,
    "order_total_drift": 1e-9,
    "zeeman_vs_closed_form": 1e-8,
}


@dataclass(frozen=True)
class OutputTargets:
    trajectory_csv: str | None = None
    report_json: str | None = None
    summary_csv: str | None = None


@dataclass(frozen=True)
class Scenario:
    model: str
    method: str = "both"
    params: dict[str, Any] = field(default_factory=dict)
    integrator: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_INTEGRATOR))
    outputs: tuple[OutputTargets, ...] = ()
    seed: int = 0
    thresholds: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    max_channels: int = DEFAULT_MAX_CHANNELS

    @property
    def methods(self) -> list[str]:
        if self.model == "spins":
            return ["fe"]
        return ["fe", "cut"] if self.method == "both" else [self.method]

    def sweep_axes(self) -> list[str]:
        return [k for k in MODEL_FIELDS[self.model]["sweepable"] if isinstance(self.params.get(k), list)]

    @property
    def is_sweep(self) -> bool:
        return bool(self.sweep_axes())

    def with_params(self, **changes) -> Scenario:
        params = dict(self.params)
        params.update(changes)
        return Scenario(
            model=self.model,
            method=self.method,
            params=params,
            integrator=self.integrator,
            outputs=self.outputs,
            seed=self.seed,
            thresholds=self.thresholds,
            max_channels=self.max_channels,
        )

    def integrator_config(self, horizon: float) -> IntegratorConfig:
        """IntegratorConfig with l_max 'auto' resolved to the model's horizon."""
        values = dict(self.integrator)
        if values.get("l_max", AUTO) == AUTO:
            values["l_max"] = horizon
        try:
            return IntegratorConfig(**values)
        except ContractViolation as e:
            raise ScenarioError(str(e), field="integrator") from e

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"model": self.model, "method": self.method}
        d.update(self.params)
        d["integrator"] = dict(self.integrator)
        d["outputs"] = [{k: v for k, v in asdict(o).items() if v is not None} for o in self.outputs]
        d["seed"] = self.seed
        d["thresholds"] = dict(self.thresholds)
        d["max_channels"] = self.max_channels
        return d

    def dump(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @staticmethod
    def load(path: Path) -> Scenario:
        return parse_scenario(path.read_bytes())

    @staticmethod
    def from_dict(d: dict[str, Any]) -> Scenario:
        return _validate(d)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _check_number(name: str, value, allow_array: bool):
    if _is_number(value):
        return value
    if allow_array and isinstance(value, list):
        if not value:
            raise ScenarioError(f"sweep array for '{name}' is empty", field=name)
        bad = [v for v in value if not _is_number(v)]
        if bad:
            raise ScenarioError(f"field '{name}' has non-numeric entries: {bad}", field=name)
        return list(value)
    raise ScenarioError(f"field '{name}' must be a finite number, got {value!r}", field=name)


def _check_complex(name: str, value):
    if _is_number(value):
        return [float(value), 0.0]
    if isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value):
        return [float(value[0]), float(value[1])]
    raise ScenarioError(f"field '{name}' must be [re, im], got {value!r}", field=name)


def _check_integrator(raw, model: str) -> dict[str, Any]:
    if not isinstance(raw, dict):
        raise ScenarioError("field 'integrator' must be an object", field="integrator")
    unknown = [k for k in raw if k not in INTEGRATOR_FIELDS]
    if unknown:
        raise ScenarioError(f"unknown integrator field: '{unknown[0]}'", field=f"integrator.{unknown[0]}")
    values = dict(DEFAULT_INTEGRATOR)
    values.update(MODEL_INTEGRATOR_DEFAULTS.get(model, {}))
    values.update(raw)
    for key, value in values.items():
        if key == "method":
            continue
        if key == "l_max" and value == AUTO:
            continue
        if not _is_number(value):
            raise ScenarioError(f"integrator field '{key}' must be a number", field=f"integrator.{key}")
    candidate = dict(values)
    if candidate["l_max"] == AUTO:
        candidate["l_max"] = 1.0
    try:
        IntegratorConfig(**candidate)
    except (ContractViolation, TypeError) as e:
        raise ScenarioError(f"invalid integrator: {e}", field="integrator") from e
    return values


def _check_outputs(raw) -> tuple[OutputTargets, ...]:
    entries = raw if isinstance(raw, list) else [raw]
    targets = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise ScenarioError("field 'outputs' must be an object or a list of objects", field="outputs")
        unknown = [k for k in entry if k not in OUTPUT_FIELDS]
        if unknown:
            raise ScenarioError(f"unknown outputs field: '{unknown[0]}'", field=f"outputs.{unknown[0]}")
        for key, value in entry.items():
            if not isinstance(value, str) or not value:
                raise ScenarioError(f"outputs field '{key}' must be a path", field=f"outputs.{key}")
        targets.append(OutputTargets(**entry))
    return tuple(targets)


def _check_thresholds(raw) -> dict[str, float]:
    if not isinstance(raw, dict):
        raise ScenarioError("field 'thresholds' must be an object", field="thresholds")
    unknown = [k for k in raw if k not in DEFAULT_THRESHOLDS]
    if unknown:
        raise ScenarioError(f"unknown threshold: '{unknown[0]}'", field=f"thresholds.{unknown[0]}")
    values = dict(DEFAULT_THRESHOLDS)
    for key, value in raw.items():
        if not _is_number(value) or value < 0:
            raise ScenarioError(f"threshold '{key}' must be a number >= 0", field=f"thresholds.{key}")
        values[key] = float(value)
    return values


def _check_model_params(model: str, d: dict[str, Any]) -> dict[str, Any]:
    fields = MODEL_FIELDS[model]
    missing = [k for k in fields["required"] if k not in d]
    if missing:
        raise ScenarioError(f"missing required field: '{missing[0]}'", field=missing[0])

    params: dict[str, Any] = {}
    for key in (*fields["required"], *fields["optional"]):
        value = d.get(key, fields["optional"].get(key))
        if key in COMPLEX_FIELDS:
            params[key] = _check_complex(key, value)
        elif key == "matrix":
            if value is not None and not isinstance(value, dict):
                raise ScenarioError("field 'matrix' must be an object with n, re, im", field="matrix")
            params[key] = value
        elif key == "J":
            if value is not None and not (
                isinstance(value, list) and all(isinstance(row, list) and all(_is_number(v) for v in row) for row in value)
            ):
                raise ScenarioError("field 'J' must be a matrix of numbers", field="J")
            params[key] = value
        else:
            params[key] = _check_number(key, value, allow_array=key in fields["sweepable"])

    sizes = params.get("n")
    for size in sizes if isinstance(sizes, list) else [sizes]:
        if size is not None and (size != int(size) or size < 1):
            raise ScenarioError("field 'n' must be a positive integer", field="n")
    return params


def _validate(d: Any) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    model = d.get("model")
    if model not in MODELS:
        raise ScenarioError(f"field 'model' must be one of {list(MODELS)}, got {model!r}", field="model")
    method = d.get("method", "both")
    if method not in METHODS:
        raise ScenarioError(f"field 'method' must be one of {list(METHODS)}, got {method!r}", field="method")

    fields = MODEL_FIELDS[model]
    allowed = set(COMMON_FIELDS) | set(fields["required"]) | set(fields["optional"])
    unknown = [k for k in d if k not in allowed]
    if unknown:
        raise ScenarioError(f"unknown field: '{unknown[0]}'", field=unknown[0])

    seed = d.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64):
        raise ScenarioError("field 'seed' must be an unsigned 64-bit integer", field="seed")
    max_channels = d.get("max_channels", DEFAULT_MAX_CHANNELS)
    if not (isinstance(max_channels, int) and not isinstance(max_channels, bool) and max_channels >= 1):
        raise ScenarioError("field 'max_channels' must be a positive integer", field="max_channels")

    return Scenario(
        model=model,
        method=method,
        params=_check_model_params(model, d),
        integrator=_check_integrator(d.get("integrator", {}), model),
        outputs=_check_outputs(d.get("outputs", [])),
        seed=seed,
        thresholds=_check_thresholds(d.get("thresholds", {})),
        max_channels=max_channels,
    )


def parse_scenario(text: bytes | str) -> Scenario:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ScenarioError(f"scenario is not UTF-8 (byte {e.start})") from e
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"malformed JSON at line {e.lineno} column {e.colno} (char {e.pos}): {e.msg}") from e
    return _validate(d)
