from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pandas as pd

from . import electron_phonon, matrix_flow, quadratic, spins, three_boson
from .engine import FlowResult
from .errors import ContractViolation, ModelError, NumericalFailure, ScenarioError
from .io import write_report, write_tabular
from .metrics import ChannelReport, ComparisonRecord, ComparisonReport, print_metrics, print_record
from .scenario import OutputTargets, Scenario


@dataclass
class ChannelOutcome:
    records: list[ComparisonRecord]
    comparison: dict[str, Any] = field(default_factory=dict)
    trajectory: pd.DataFrame | None = None


def _max_drift(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values - values[0])))


def _relative(numeric, closed) -> float:
    diff = abs(numeric - closed)
    return diff / abs(closed) if closed != 0 else diff


def _flow_frame(result: FlowResult, columns: list[str], method: str) -> pd.DataFrame:
    df = result.to_frame(columns)
    df.insert(0, "method", method)
    return df


def _concat(frames: list[pd.DataFrame]) -> pd.DataFrame | None:
    return pd.concat(frames, ignore_index=True) if frames else None


def _failed(s: Scenario, quantity: str, error) -> ChannelOutcome:
    return ChannelOutcome(records=[ComparisonRecord.failure(m, quantity, error) for m in s.methods])


def evaluate_quadratic(s: Scenario) -> ChannelOutcome:
    p = s.params
    try:
        mode0 = quadratic.QuadraticMode(p["f0"], p["g0"])
    except ModelError as e:
        return _failed(s, "spectrum", e)
    eps = quadratic.spectrum(mode0)
    records, frames, finals = [], [], {}

    if "fe" in s.methods:
        result = quadratic.fe_flow(mode0, s.integrator_config(quadratic.default_horizon(mode0)))
        closed = np.array([quadratic.fe_closed_form(mode0, l).as_array() for l in result.l])
        f, g = result.final_state
        finals["fe"] = float(f)
        residuals = {
            "fe_vs_closed_form": abs(f - eps),
            "final_abs_g": abs(g),
            "invariant_drift": _max_drift(result.monitors["f2_minus_g2"]),
            "trajectory_vs_closed_form": float(np.max(np.abs(result.states - closed))),
        }
        records.append(
            ComparisonRecord.measured("fe", "spectrum", float(f), eps, result.termination, residuals, s.thresholds)
        )
        frames.append(_flow_frame(result, quadratic.COLUMNS, "fe"))

    if "cut" in s.methods:
        G = quadratic.cut_generator(mode0)
        result = quadratic.cut_flow(mode0, G, s.integrator_config(1.0))
        closed = np.array([quadratic.cut_closed_form(mode0, G, l).as_array() for l in result.l])
        f, g = result.final_state
        finals["cut"] = float(f)
        residuals = {
            "cut_vs_closed_form": abs(f - eps),
            "final_abs_g": abs(g),
            "invariant_drift": _max_drift(result.monitors["f2_minus_g2"]),
            "trajectory_vs_closed_form": float(np.max(np.abs(result.states - closed))),
        }
        if "fe" in finals:
            residuals["fe_vs_cut"] = abs(finals["fe"] - float(f))
        records.append(
            ComparisonRecord.measured("cut", "spectrum", float(f), eps, result.termination, residuals, s.thresholds)
        )
        frames.append(_flow_frame(result, quadratic.COLUMNS, "cut"))

    comparison: dict[str, Any] = {"spectrum": eps, "cut_generator": quadratic.cut_generator(mode0).G}
    comparison.update({f"{m}_spectrum": v for m, v in finals.items()})
    if len(finals) == 2:
        comparison["difference"] = finals["fe"] - finals["cut"]
    return ChannelOutcome(records=records, comparison=comparison, trajectory=_concat(frames))


def evaluate_eph(s: Scenario) -> ChannelOutcome:
    p = s.params
    ch = electron_phonon.EPhPairChannel(omega=p["omega"], delta=p["delta"], m0=p["m0"], v0=p["v0"])
    records, frames = [], []

    if "fe" in s.methods:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = electron_phonon.fe_flow(ch, s.integrator_config(electron_phonon.default_horizon(ch)))
        closed = electron_phonon.fe_effective_v(ch)
        v = float(result.final_state[2])
        records.append(
            ComparisonRecord.measured(
                "fe",
                "V",
                v,
                closed,
                result.termination,
                {"fe_vs_closed_form_rel": _relative(v, closed)},
                s.thresholds,
                warning=str(caught[0].message) if caught else None,
            )
        )
        frames.append(_flow_frame(result, electron_phonon.COLUMNS, "fe"))

    if "cut" in s.methods:
        try:
            result = electron_phonon.cut_flow(ch, s.integrator_config(1.0))
            closed = electron_phonon.cut_effective_v(ch)
        except ModelError as e:
            records.append(ComparisonRecord.failure("cut", "V", e))
        else:
            v = float(result.final_state[2])
            residuals = {
                "cut_vs_closed_form": abs(v - closed),
                "cut_final_coupling": float(np.max(np.abs(result.final_state[:2]))),
            }
            records.append(
                ComparisonRecord.measured("cut", "V", v, closed, result.termination, residuals, s.thresholds)
            )
            frames.append(_flow_frame(result, electron_phonon.COLUMNS, "cut"))

    cmp = electron_phonon.compare_methods(ch)
    a1, a2 = electron_phonon.alphas(ch)
    comparison = {
        "alpha1": a1,
        "alpha2": a2,
        "cut_v": cmp.cut_v,
        "fe_v": cmp.fe_v,
        "difference": cmp.difference,
        "cut_error": cmp.cut_error.kind if cmp.cut_error else None,
    }
    return ChannelOutcome(records=records, comparison=comparison, trajectory=_concat(frames))


def evaluate_threeboson(s: Scenario) -> ChannelOutcome:
    p = s.params
    try:
        vertex = three_boson.ThreeBosonVertex(
            beta1=p["beta1"],
            beta2=p["beta2"],
            psi1=complex(*p["psi1"]),
            psi2=complex(*p["psi2"]),
            phi0=complex(*p["phi0"]),
        )
    except ModelError as e:
        return _failed(s, "phi", e)
    records, frames = [], []

    if "fe" in s.methods:
        result = three_boson.fe_flow(vertex, s.integrator_config(three_boson.default_horizon(vertex)))
        phi = three_boson.final_phi(result)
        closed = three_boson.fe_effective_phi(vertex)
        records.append(
            ComparisonRecord.measured(
                "fe", "phi", phi, closed, result.termination,
                {"fe_vs_closed_form_rel": _relative(phi, closed)}, s.thresholds,
            )
        )
        frames.append(_flow_frame(result, three_boson.COLUMNS, "fe"))

    if "cut" in s.methods:
        result = three_boson.cut_flow(vertex, s.integrator_config(1.0))
        phi = three_boson.final_phi(result)
        closed = three_boson.cut_effective_phi(vertex)
        records.append(
            ComparisonRecord.measured(
                "cut", "phi", phi, closed, result.termination,
                {"cut_vs_closed_form": abs(phi - closed)}, s.thresholds,
            )
        )
        frames.append(_flow_frame(result, three_boson.COLUMNS, "cut"))

    cmp = three_boson.compare_methods(vertex)
    b1, b2 = vertex.beta1, vertex.beta2
    comparison = {
        "cut_phi": cmp.cut_phi,
        "fe_phi": cmp.fe_phi,
        "ratio": cmp.ratio,
        "expected_ratio": 2 * b1 * b2 / (b1**2 + b2**2),
    }
    return ChannelOutcome(records=records, comparison=comparison, trajectory=_concat(frames))


def _matrix_frame(result: FlowResult, n: int, method: str) -> pd.DataFrame:
    df = pd.DataFrame({"method": method, "l": result.l})
    df["offdiag_norm"] = np.sqrt(result.monitors["offdiag_sq"])
    df["trace"] = result.monitors["trace"]
    df["trace_sq"] = result.monitors["trace_sq"]
    for i in range(n):
        df[f"d_{i}"] = result.states[:, i]
    return df


def evaluate_matrix(s: Scenario) -> ChannelOutcome:
    p = s.params
    if p["matrix"] is not None:
        h = matrix_flow.hermitian_from_json(p["matrix"])
    else:
        h = matrix_flow.random_hermitian(int(p["n"]), s.seed)
    n = h.n
    oracle = matrix_flow.reference_eigenvalues(h)
    config = s.integrator_config(matrix_flow.default_horizon(h))
    records, frames = [], []

    if "fe" in s.methods:
        res = matrix_flow.flow_diagonalize(h, config, track_unitary=True)
        flow = res.flow
        trace, trace_sq = flow.monitors["trace"], flow.monitors["trace_sq"]
        increase = float(np.max(np.diff(flow.measure), initial=0.0))
        u = res.unitary
        rebuilt = u @ h.entries @ u.conj().T
        residuals = {
            "spectrum_vs_oracle": float(np.max(np.abs(np.sort(res.matrix.diagonal()) - oracle))),
            # tr H may vanish; tr H^2 vanishes only for H = 0
            "trace_drift_rel": _max_drift(trace) / max(1.0, abs(trace[0])),
            "trace_sq_drift_rel": _max_drift(trace_sq) / (trace_sq[0] if trace_sq[0] > 0 else 1.0),
            "offdiag_increase": max(0.0, increase),
            "unitarity": res.unitarity_residual(),
            "unitary_reconstruction": float(np.linalg.norm(rebuilt - res.matrix.entries)),
        }
        records.append(
            ComparisonRecord.measured(
                "fe", "eigenvalues", np.sort(res.matrix.diagonal()), oracle, flow.termination, residuals, s.thresholds
            )
        )
        frames.append(_matrix_frame(flow, n, "fe"))

    if "cut" in s.methods:
        r = matrix_flow.diagonalizing_generator(h)
        cut = matrix_flow.one_step_cut(h, r, 1.0, config)
        diagonal = np.sort(cut.matrix.diagonal())
        residuals = {
            "spectrum_vs_oracle": float(np.max(np.abs(diagonal - oracle))),
            "cut_discrepancy": cut.discrepancy,
            "cut_offdiag": cut.matrix.offdiagonal_norm(),
        }
        records.append(
            ComparisonRecord.measured(
                "cut", "eigenvalues", diagonal, oracle, cut.flow.termination, residuals, s.thresholds
            )
        )
        frames.append(_matrix_frame(cut.flow, n, "cut"))

    comparison = {"n": n, "eigenvalues": oracle, "initial_offdiag_norm": h.offdiagonal_norm()}
    return ChannelOutcome(records=records, comparison=comparison, trajectory=_concat(frames))


def evaluate_spins(s: Scenario) -> ChannelOutcome:
    p = s.params
    n = int(p["n"])
    couplings = np.zeros((n, n)) if p["J"] is None else np.array(p["J"], dtype=float)
    cfg = spins.SpinSystemConfig(n_spins=n, omega0=p["omega0"], couplings=couplings, alpha=p["alpha"])
    t_end = float(p["t_end"])
    if t_end < 0:
        raise ScenarioError(f"field 't_end' must be >= 0, got {t_end}", field="t_end")

    res = spins.propagate_flow(cfg, t_end, s.integrator_config(max(t_end, 1.0)))
    h = spins.build_spin_hamiltonian(cfg)
    exact = spins.exact_propagate(spins.initial_deviation(cfg), h, res.flow.final_l)
    weights = res.spectra[-1]
    residuals = {
        "exact_distance": res.exact_distance,
        "trace_drift": float(np.max(np.abs(res.flow.monitors["trace"]))),
        "purity_drift": _max_drift(res.flow.monitors["trace_sq"]),
        "order_total_drift": _max_drift(res.spectra.sum(axis=1)),
    }
    comparison: dict[str, Any] = {"purity": res.final.purity()}
    if not np.any(cfg.couplings):
        x, y = spins.transverse_components(res.final)
        x0, y0 = spins.zeeman_closed_form(cfg.alpha, cfg.omega0, res.flow.final_l)
        residuals["zeeman_vs_closed_form"] = float(max(np.max(np.abs(x - x0)), np.max(np.abs(y - y0))))
        comparison.update(X=x, Y=y)
    record = ComparisonRecord.measured(
        "fe",
        "order_spectrum",
        weights,
        spins.pauli_order_spectrum(exact).weights,
        res.flow.termination,
        residuals,
        s.thresholds,
    )
    return ChannelOutcome(records=[record], comparison=comparison, trajectory=res.to_frame())


def get_evaluator(model: str) -> Callable[[Scenario], ChannelOutcome]:
    evaluators = {
        "quadratic": evaluate_quadratic,
        "eph": evaluate_eph,
        "threeboson": evaluate_threeboson,
        "matrix": evaluate_matrix,
        "spins": evaluate_spins,
    }

    if model not in evaluators:
        raise ScenarioError(f"Unknown model: {model}. Choose from {list(evaluators.keys())}", field="model")

    return evaluators[model]


def evaluate_channel(s: Scenario) -> ChannelOutcome:
    """One channel with scalar parameters. Bad inputs raise ScenarioError; model
    and numerical failures come back as typed records."""
    evaluator = get_evaluator(s.model)
    try:
        return evaluator(s)
    except ScenarioError:
        raise
    except ContractViolation as e:
        raise ScenarioError(str(e)) from e
    except (ModelError, NumericalFailure) as e:
        return _failed(s, "result", e)


def channel_inputs(s: Scenario) -> dict[str, Any]:
    inputs = {k: v for k, v in s.params.items() if v is not None}
    if s.model == "matrix" and s.params.get("matrix") is None:
        inputs["seed"] = s.seed
    return inputs


def write_outputs(
    report: ComparisonReport,
    targets: tuple[OutputTargets, ...],
    trajectory: pd.DataFrame | None = None,
) -> list[Path]:
    written = []
    for target in targets:
        if target.trajectory_csv and trajectory is not None:
            path = Path(target.trajectory_csv)
            print(f"Writing trajectory to: {path}")
            write_tabular(trajectory, path)
            written.append(path)
        if target.summary_csv:
            path = Path(target.summary_csv)
            print(f"Writing summary to: {path}")
            write_tabular(pd.DataFrame(report.summary_rows()), path)
            written.append(path)
        if target.report_json:
            path = Path(target.report_json)
            print(f"Writing report to: {path}")
            write_report(report.to_dict(), path)
            written.append(path)
    return written


def print_report(report: ComparisonReport) -> None:
    for channel in report.channels:
        label = "/".join(str(i) for i in channel.index)
        for record in channel.records:
            title = f"{record.method.upper()} {record.quantity}" + (f" [{label}]" if label else "")
            print_record(record, title)
        if channel.comparison and len(report.channels) == 1:
            print_metrics(
                {k: v for k, v in channel.comparison.items() if isinstance(v, (int, float, str))},
                "Comparison",
            )


def run_scenario(s: Scenario) -> ComparisonReport:
    if s.is_sweep:
        axis = s.sweep_axes()[0]
        raise ScenarioError(f"field '{axis}' is an array; use the sweep command", field=axis)

    print(f"Running {s.model} scenario (method={s.method}, seed={s.seed})")
    outcome = evaluate_channel(s)
    channel = ChannelReport(index=(), inputs=channel_inputs(s), records=outcome.records, comparison=outcome.comparison)
    report = ComparisonReport(model=s.model, method=s.method, seed=s.seed, channels=[channel])
    print_report(report)

    write_outputs(report, s.outputs, trajectory=outcome.trajectory)
    print(f"\nExit status: {report.exit_status}")
    return report
