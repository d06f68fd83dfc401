"""Elimination of the electron-phonon coupling in the zero-momentum pair channel.

State vector for both flows: [M1, M2, V] with M1 = M_{k,q}, M2 = M_{-k-q,q}
and V = V_{k,-k,q}. With a symmetric dispersion the channel is fixed by the
phonon energy omega and the electron energy difference delta.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .engine import FlowProblem, FlowResult, IntegratorConfig, integrate_flow
from .errors import ContractViolation, DegenerateChannelError, ModelError, ResonanceError

COLUMNS = ["M1", "M2", "V"]


@dataclass(frozen=True)
class EPhPairChannel:
    omega: float
    delta: float
    m0: float
    v0: float = 0.0

    def __post_init__(self):
        for name in ("omega", "delta", "m0", "v0"):
            if not math.isfinite(getattr(self, name)):
                raise ContractViolation(f"{name} must be finite")
        if not self.omega > 0:
            raise ContractViolation(f"phonon energy omega must be positive, got {self.omega}")

    @classmethod
    def from_alphas(cls, alpha1: float, alpha2: float, m0: float, v0: float = 0.0) -> EPhPairChannel:
        return cls(omega=(alpha1 + alpha2) / 2, delta=(alpha1 - alpha2) / 2, m0=m0, v0=v0)

    def initial_state(self) -> np.ndarray:
        return np.array([self.m0, self.m0, self.v0])


@dataclass
class MethodComparison:
    cut_v: float | None
    fe_v: float
    difference: float | None
    cut_error: ModelError | None = None


def alphas(ch: EPhPairChannel) -> tuple[float, float]:
    return ch.omega + ch.delta, ch.omega - ch.delta


def cut_generator_coeffs(ch: EPhPairChannel) -> tuple[float, float]:
    a1, a2 = alphas(ch)
    if a1 == 0 or a2 == 0:
        raise ResonanceError(f"one-step generator is singular at |delta| = omega (alphas {a1}, {a2})")
    return ch.m0 / a1, ch.m0 / a2


def cut_effective_v(ch: EPhPairChannel) -> float:
    a1, a2 = alphas(ch)
    if a1 * a2 == 0:
        raise ResonanceError(f"Froehlich denominator omega^2 - delta^2 vanishes at omega={ch.omega}, delta={ch.delta}")
    return ch.v0 - ch.m0**2 * ch.omega / (a1 * a2)


def fe_effective_v(ch: EPhPairChannel) -> float:
    denominator = ch.omega**2 + ch.delta**2
    if denominator == 0:
        raise DegenerateChannelError("both energy differences vanish")
    return ch.v0 - ch.m0**2 * ch.omega / denominator


def cut_problem(ch: EPhPairChannel) -> FlowProblem:
    r1, r2 = cut_generator_coeffs(ch)
    a1, a2 = alphas(ch)
    dm = np.array([-a1 * r1, -a2 * r2])

    def rhs(l, x):
        return np.array([dm[0], dm[1], -r1 * x[1] - r2 * x[0]])

    return FlowProblem(dimension=3, rhs=rhs)


def fe_problem(ch: EPhPairChannel) -> FlowProblem:
    a1, a2 = alphas(ch)
    rates = np.array([a1**2, a2**2])
    total = a1 + a2

    def rhs(l, x):
        return np.array([-rates[0] * x[0], -rates[1] * x[1], -total * x[0] * x[1]])

    return FlowProblem(
        dimension=3,
        rhs=rhs,
        convergence_measure=lambda x: float(max(abs(x[0]), abs(x[1]))),
        convergence_name="max_abs_M",
    )


def default_horizon(ch: EPhPairChannel) -> float:
    rates = [a**2 for a in alphas(ch) if a != 0]
    return 50.0 / min(rates)


def cut_flow(ch: EPhPairChannel, config: IntegratorConfig | None = None) -> FlowResult:
    config = (config or IntegratorConfig()).replace(l_max=1.0)
    return integrate_flow(cut_problem(ch), config, ch.initial_state())


def fe_flow(ch: EPhPairChannel, config: IntegratorConfig | None = None) -> FlowResult:
    if ch.m0 != 0 and 0 in alphas(ch):
        warnings.warn(
            f"alpha vanishes at omega={ch.omega}, delta={ch.delta}: that coupling does not decay",
            RuntimeWarning,
            stacklevel=2,
        )
    config = config or IntegratorConfig(l_max=default_horizon(ch))
    return integrate_flow(fe_problem(ch), config, ch.initial_state())


def compare_methods(ch: EPhPairChannel) -> MethodComparison:
    fe_v = fe_effective_v(ch)
    try:
        cut_v = cut_effective_v(ch)
    except ResonanceError as e:
        return MethodComparison(cut_v=None, fe_v=fe_v, difference=None, cut_error=e)
    return MethodComparison(cut_v=cut_v, fe_v=fe_v, difference=cut_v - fe_v)
