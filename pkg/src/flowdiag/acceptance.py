"""Desk-scale acceptance checks for every model, run by ``flowdiag selftest``.

Each check returns (passed, detail). Checks integrate with their own
tolerances so results do not depend on scenario defaults.
"""

from __future__ import annotations

import cmath
import math
from typing import Callable

import numpy as np
import pandas as pd

from . import electron_phonon, matrix_flow, quadratic, spins, three_boson
from .engine import IntegratorConfig
from .errors import FlowDiagError

GAMMAS = [round(0.1 * k, 1) for k in range(1, 10)]
ACCURATE = IntegratorConfig(abs_tol=1e-14, rel_tol=1e-13)

CheckResult = tuple[bool, str]


def _modes() -> list[quadratic.QuadraticMode]:
    return [quadratic.QuadraticMode(1.0, g) for g in GAMMAS]


def check_quadratic_spectrum() -> CheckResult:
    worst, worst_g = 0.0, 0.0
    for mode in _modes():
        eps = quadratic.spectrum(mode)
        fe = quadratic.fe_flow(mode, ACCURATE.replace(l_max=quadratic.default_horizon(mode)))
        cut = quadratic.cut_flow(mode, config=ACCURATE)
        f_fe, g_fe = fe.final_state
        f_cut, g_cut = cut.final_state
        worst = max(worst, abs(f_fe - eps), abs(f_cut - eps), abs(f_fe - f_cut))
        worst_g = max(worst_g, abs(g_fe), abs(g_cut))
    return worst < 1e-8 and worst_g < 1e-10, f"max spectrum deviation {worst:.2e}, max final |g| {worst_g:.2e}"


def check_quadratic_closed_form() -> CheckResult:
    worst = 0.0
    for mode in _modes():
        result = quadratic.fe_flow(mode, IntegratorConfig(l_max=20.0, convergence_threshold=0.0))
        closed = np.array([quadratic.fe_closed_form(mode, l).as_array() for l in result.l])
        worst = max(worst, float(np.max(np.abs(result.states - closed))))
    return worst < 1e-8, f"max trajectory deviation on [0, 20]: {worst:.2e}"


def check_quadratic_invariant() -> CheckResult:
    worst = 0.0
    for mode in _modes():
        for result in (
            quadratic.fe_flow(mode, ACCURATE.replace(l_max=quadratic.default_horizon(mode))),
            quadratic.cut_flow(mode, config=ACCURATE),
        ):
            drift = result.monitors["f2_minus_g2"] - result.monitors["f2_minus_g2"][0]
            worst = max(worst, float(np.max(np.abs(drift))))
    return worst < 1e-10, f"max f^2 - g^2 drift {worst:.2e}"


def _eph_grid() -> list[electron_phonon.EPhPairChannel]:
    return [
        electron_phonon.EPhPairChannel(omega=omega, delta=delta, m0=m0)
        for omega in (0.5, 1.0, 2.0)
        for delta in (0.0, 0.3, 0.9 * omega)
        for m0 in (0.1, 0.3)
    ]


def check_electron_phonon() -> CheckResult:
    worst_cut, worst_fe = 0.0, 0.0
    for ch in _eph_grid():
        fe_v = electron_phonon.fe_flow(ch).final_state[2]
        closed = electron_phonon.fe_effective_v(ch)
        worst_fe = max(worst_fe, abs(fe_v - closed) / abs(closed))
        if ch.delta != ch.omega:
            cut_v = electron_phonon.cut_flow(ch).final_state[2]
            worst_cut = max(worst_cut, abs(cut_v - electron_phonon.cut_effective_v(ch)))

    centered = electron_phonon.EPhPairChannel(omega=1.0, delta=0.0, m0=0.3)
    agreement = abs(electron_phonon.cut_flow(centered).final_state[2] - electron_phonon.fe_flow(centered).final_state[2])

    beyond = electron_phonon.EPhPairChannel(omega=1.0, delta=1.5, m0=0.3)
    cut_shift = electron_phonon.cut_flow(beyond).final_state[2] - beyond.v0
    fe_shift = electron_phonon.fe_flow(beyond).final_state[2] - beyond.v0
    signs = cut_shift > 0 > fe_shift

    passed = worst_cut < 1e-8 and worst_fe < 1e-6 and agreement < 1e-8 and signs
    detail = (
        f"cut abs {worst_cut:.2e}, fe rel {worst_fe:.2e}, delta=0 agreement {agreement:.2e}, "
        f"delta>omega shifts cut {cut_shift:+.4f} fe {fe_shift:+.4f}"
    )
    return passed, detail


def check_three_boson() -> CheckResult:
    rng = np.random.default_rng(7)
    betas = (0.5, 1.0, 2.0, 4.0)
    worst_cut, worst_fe, worst_ratio, worst_equal = 0.0, 0.0, 0.0, 0.0
    for b1 in betas:
        for b2 in betas:
            psi1 = 0.2 * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
            psi2 = 0.3 * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
            v = three_boson.ThreeBosonVertex(b1, b2, psi1, psi2)
            cut_phi = three_boson.final_phi(three_boson.cut_flow(v))
            fe_phi = three_boson.final_phi(three_boson.fe_flow(v))
            closed_cut = three_boson.cut_effective_phi(v)
            closed_fe = three_boson.fe_effective_phi(v)
            worst_cut = max(worst_cut, abs(cut_phi - closed_cut) / abs(closed_cut))
            worst_fe = max(worst_fe, abs(fe_phi - closed_fe) / abs(closed_fe))
            cmp = three_boson.compare_methods(v)
            worst_ratio = max(worst_ratio, abs(cmp.ratio - 2 * b1 * b2 / (b1**2 + b2**2)))
            if b1 == b2:
                worst_equal = max(worst_equal, abs(cut_phi - fe_phi))
    passed = worst_cut < 1e-6 and worst_fe < 1e-6 and worst_ratio < 1e-8 and worst_equal < 1e-8
    detail = (
        f"cut rel {worst_cut:.2e}, fe rel {worst_fe:.2e}, ratio {worst_ratio:.2e}, "
        f"equal-beta agreement {worst_equal:.2e}"
    )
    return passed, detail


def check_matrix_flow() -> CheckResult:
    worst = {"increase": 0.0, "spectrum": 0.0, "trace": 0.0, "trace_sq": 0.0, "unitarity": 0.0, "rebuild": 0.0}
    cases = [(n, seed) for n in (2, 4, 8, 16) for seed in range(5)]
    for n, seed in cases:
        h = matrix_flow.random_hermitian(n, seed)
        res = matrix_flow.flow_diagonalize(h, track_unitary=True)
        flow = res.flow
        oracle = matrix_flow.reference_eigenvalues(h)
        trace, trace_sq = flow.monitors["trace"], flow.monitors["trace_sq"]
        rebuilt = res.unitary @ h.entries @ res.unitary.conj().T
        worst["increase"] = max(worst["increase"], float(np.max(np.diff(flow.measure), initial=0.0)))
        worst["spectrum"] = max(worst["spectrum"], float(np.max(np.abs(np.sort(res.matrix.diagonal()) - oracle))))
        worst["trace"] = max(worst["trace"], float(np.max(np.abs(trace - trace[0]))) / max(1.0, abs(trace[0])))
        worst["trace_sq"] = max(worst["trace_sq"], float(np.max(np.abs(trace_sq - trace_sq[0]))) / trace_sq[0])
        worst["unitarity"] = max(worst["unitarity"], res.unitarity_residual())
        worst["rebuild"] = max(worst["rebuild"], float(np.linalg.norm(rebuilt - res.matrix.entries)))
    passed = (
        worst["increase"] <= 1e-12
        and worst["spectrum"] < 1e-6
        and worst["trace"] < 1e-9
        and worst["trace_sq"] < 1e-9
        and worst["unitarity"] < 1e-8
        and worst["rebuild"] < 1e-6
    )
    return passed, f"{len(cases)} matrices; " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items())


def check_one_step_equivalence() -> CheckResult:
    worst_exp, worst_reparam = 0.0, 0.0
    for seed in range(10):
        h = matrix_flow.random_hermitian(6, seed)
        r = matrix_flow.random_anti_hermitian(6, seed + 100)
        cut = matrix_flow.one_step_cut(h, r, 1.0)
        reparam = matrix_flow.reparametrized_flow(h, [(r, lambda l: 2.0 * l)], 1.0)
        worst_exp = max(worst_exp, cut.discrepancy)
        worst_reparam = max(worst_reparam, float(np.linalg.norm(reparam.matrix.entries - cut.matrix.entries)))
    return (
        worst_exp < 1e-8 and worst_reparam < 1e-8,
        f"ode vs exponential {worst_exp:.2e}, reparametrized vs one-step {worst_reparam:.2e}",
    )


def check_spin_evolution() -> CheckResult:
    zeeman = spins.SpinSystemConfig(n_spins=1, omega0=2.0, couplings=np.zeros((1, 1)), alpha=0.5)
    res = spins.propagate_flow(zeeman, 3.0)
    x, y = spins.transverse_components(res.final)
    x0, y0 = spins.zeeman_closed_form(0.5, 2.0, res.flow.final_l)
    zeeman_error = max(abs(x[0] - x0), abs(y[0] - y0))

    worst_exact, worst_purity, worst_total = 0.0, 0.0, 0.0
    for n in (2, 3, 4):
        res = spins.propagate_flow(spins.SpinSystemConfig.chain(n, omega0=1.0, coupling=1.0, alpha=0.5), 1.0)
        purity = res.flow.monitors["trace_sq"]
        totals = res.spectra.sum(axis=1)
        worst_exact = max(worst_exact, res.exact_distance)
        worst_purity = max(worst_purity, float(np.max(np.abs(purity - purity[0]))))
        worst_total = max(worst_total, float(np.max(np.abs(totals - totals[0]))))

    free = spins.propagate_flow(spins.SpinSystemConfig.chain(3, omega0=1.0, coupling=0.0, alpha=0.5), 2.0)
    leaked = float(np.max(free.spectra[:, 1:]))

    coupled = spins.propagate_flow(spins.SpinSystemConfig.chain(2, omega0=1.0, coupling=1.0, alpha=0.5), 0.5)
    w2 = coupled.spectra[-1][1]

    passed = (
        zeeman_error < 1e-8
        and worst_exact < 1e-7
        and worst_purity < 1e-9
        and worst_total < 1e-9
        and leaked <= 1e-12
        and w2 > 0
    )
    detail = (
        f"zeeman {zeeman_error:.2e}, exact {worst_exact:.2e}, purity {worst_purity:.2e}, "
        f"order total {worst_total:.2e}, J=0 leak {leaked:.2e}, W2(0.5) {w2:.3e}"
    )
    return passed, detail


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "quadratic_spectrum_identity": check_quadratic_spectrum,
    "quadratic_fe_closed_form": check_quadratic_closed_form,
    "quadratic_invariant": check_quadratic_invariant,
    "electron_phonon_effective_v": check_electron_phonon,
    "three_boson_effective_phi": check_three_boson,
    "matrix_wegner_flow": check_matrix_flow,
    "one_step_cut_equivalence": check_one_step_equivalence,
    "spin_evolution": check_spin_evolution,
}


def selftest(names: list[str] | None = None) -> pd.DataFrame:
    rows = []
    for name, check in CHECKS.items():
        if names and name not in names:
            continue
        print(f"Checking {name}...")
        try:
            passed, detail = check()
        except FlowDiagError as e:
            passed, detail = False, f"{e.kind}: {e}"
        rows.append({"check": name, "passed": bool(passed), "detail": detail})
    return pd.DataFrame(rows, columns=["check", "passed", "detail"])
