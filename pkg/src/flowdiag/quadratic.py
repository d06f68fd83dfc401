"""Two-boson quadratic mode H = f (a^+a + b^+b) + g (a^+b^+ + ab).

Modes decouple, so every operation works on one (f, g) pair. The
flow-equation route has nonlinear coefficient equations and reaches the
diagonal form as l -> inf; the one-step route has linear equations and
is diagonal at l = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .engine import FlowProblem, FlowResult, IntegratorConfig, integrate_flow
from .errors import ContractViolation, UnstableModeError

COLUMNS = ["f", "g"]


@dataclass(frozen=True)
class QuadraticMode:
    f: float
    g: float

    def __post_init__(self):
        if not (math.isfinite(self.f) and math.isfinite(self.g)):
            raise ContractViolation(f"mode coefficients must be finite, got f={self.f}, g={self.g}")
        if not (self.f > 0 and abs(self.g) < self.f):
            raise UnstableModeError(f"unstable mode: need f > 0 and |g| < f, got f={self.f}, g={self.g}")

    @property
    def epsilon(self) -> float:
        return math.sqrt((self.f - self.g) * (self.f + self.g))

    def as_array(self) -> np.ndarray:
        return np.array([self.f, self.g])


@dataclass(frozen=True)
class CutGeneratorCoefficient:
    G: float

    def __post_init__(self):
        if not math.isfinite(self.G):
            raise ContractViolation(f"generator coefficient must be finite, got {self.G}")


def fe_rhs(mode: QuadraticMode) -> tuple[float, float]:
    return -mode.g**2, -mode.f * mode.g


def cut_rhs(mode: QuadraticMode, G: CutGeneratorCoefficient) -> tuple[float, float]:
    return -G.G * mode.g, -G.G * mode.f


def spectrum(mode0: QuadraticMode) -> float:
    return mode0.epsilon


def fe_closed_form(mode0: QuadraticMode, l: float) -> QuadraticMode:
    """f = eps coth(eps l + l0), g = eps sgn(g0) / sinh(eps l + l0).

    l0 = ln((f0 + eps)/|g0|), which equals 1/2 ln((f0 + eps)/(f0 - eps))."""
    if l == 0 or mode0.g == 0:
        return mode0
    eps = mode0.epsilon
    x = eps * l + math.log((mode0.f + eps) / abs(mode0.g))
    decay = math.exp(-2 * x)
    f = eps * (1 + decay) / (1 - decay)
    g = math.copysign(2 * eps * math.exp(-x) / (1 - decay), mode0.g)
    return QuadraticMode(f, g)


def cut_generator(mode0: QuadraticMode) -> CutGeneratorCoefficient:
    return CutGeneratorCoefficient(0.5 * math.log((mode0.f + mode0.g) / (mode0.f - mode0.g)))


def cut_closed_form(mode0: QuadraticMode, G: CutGeneratorCoefficient, l: float) -> QuadraticMode:
    if l == 0:
        return mode0
    plus = 0.5 * (mode0.f + mode0.g) * math.exp(-G.G * l)
    minus = 0.5 * (mode0.f - mode0.g) * math.exp(G.G * l)
    return QuadraticMode(plus + minus, plus - minus)


def invariant(state: np.ndarray) -> float:
    return float(state[0] ** 2 - state[1] ** 2)


def default_horizon(mode0: QuadraticMode) -> float:
    return 50.0 / mode0.epsilon


def fe_problem() -> FlowProblem:
    return FlowProblem(
        dimension=2,
        rhs=lambda l, x: np.array([-x[1] ** 2, -x[0] * x[1]]),
        monitors={"f2_minus_g2": invariant},
        convergence_measure=lambda x: abs(float(x[1])),
        convergence_name="abs_g",
    )


def cut_problem(G: CutGeneratorCoefficient) -> FlowProblem:
    return FlowProblem(
        dimension=2,
        rhs=lambda l, x: np.array([-G.G * x[1], -G.G * x[0]]),
        monitors={"f2_minus_g2": invariant},
    )


def fe_flow(mode0: QuadraticMode, config: IntegratorConfig | None = None) -> FlowResult:
    config = config or IntegratorConfig(l_max=default_horizon(mode0))
    return integrate_flow(fe_problem(), config, mode0.as_array())


def cut_flow(
    mode0: QuadraticMode,
    G: CutGeneratorCoefficient | None = None,
    config: IntegratorConfig | None = None,
    l_end: float = 1.0,
) -> FlowResult:
    G = G if G is not None else cut_generator(mode0)
    config = (config or IntegratorConfig()).replace(l_max=l_end)
    return integrate_flow(cut_problem(G), config, mode0.as_array())


def sweep_modes(f0: float, g0_values) -> pd.DataFrame:
    """Closed-form spectrum, one-step generator and both limits for a grid of couplings."""
    g0 = np.asarray(g0_values, dtype=float)
    if f0 <= 0 or np.any(np.abs(g0) >= f0):
        raise UnstableModeError(f"every mode needs |g0| < f0 = {f0}")
    eps = np.sqrt((f0 - g0) * (f0 + g0))
    G = 0.5 * np.log((f0 + g0) / (f0 - g0))
    cut_f1 = 0.5 * (f0 + g0) * np.exp(-G) + 0.5 * (f0 - g0) * np.exp(G)
    return pd.DataFrame({"f0": f0, "g0": g0, "spectrum": eps, "cut_G": G, "cut_f1": cut_f1})
