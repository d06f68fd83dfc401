"""Elimination of three-boson terms and the four-boson vertex it generates.

One vertex channel (k1 k2; k3 k4) at a time. Complex amplitudes travel
through the flow engine as [Re psi1, Im psi1, Re psi2, Im psi2, Re phi, Im phi].
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .engine import FlowProblem, FlowResult, IntegratorConfig, integrate_flow
from .errors import ContractViolation, DegenerateEnergyError

COLUMNS = ["psi1_re", "psi1_im", "psi2_re", "psi2_im", "phi_re", "phi_im"]


@dataclass(frozen=True)
class ThreeBosonVertex:
    beta1: float
    beta2: float
    psi1: complex
    psi2: complex
    phi0: complex = 0j

    def __post_init__(self):
        for name in ("psi1", "psi2", "phi0"):
            value = complex(getattr(self, name))
            if not cmath.isfinite(value):
                raise ContractViolation(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if not (math.isfinite(self.beta1) and math.isfinite(self.beta2)):
            raise ContractViolation("beta values must be finite")
        if self.beta1 <= 0 or self.beta2 <= 0:
            raise DegenerateEnergyError(
                f"three-boson energies must be positive, got beta1={self.beta1}, beta2={self.beta2}"
            )

    def initial_state(self) -> np.ndarray:
        return pack_amplitudes(self.psi1, self.psi2, self.phi0)


@dataclass
class VertexComparison:
    cut_phi: complex
    fe_phi: complex
    ratio: float | None


def pack_amplitudes(psi1: complex, psi2: complex, phi: complex) -> np.ndarray:
    return np.array([psi1.real, psi1.imag, psi2.real, psi2.imag, phi.real, phi.imag])


def unpack_amplitudes(x: np.ndarray) -> tuple[complex, complex, complex]:
    return complex(x[0], x[1]), complex(x[2], x[3]), complex(x[4], x[5])


def cut_generator(v: ThreeBosonVertex) -> tuple[complex, complex]:
    return v.psi1 / (3 * v.beta1), v.psi2 / (3 * v.beta2)


def cut_effective_phi(v: ThreeBosonVertex) -> complex:
    return v.phi0 - v.psi1 * v.psi2.conjugate() * (1 / v.beta1 + 1 / v.beta2)


def fe_effective_phi(v: ThreeBosonVertex) -> complex:
    return v.phi0 - 2 * v.psi1 * v.psi2.conjugate() * (v.beta1 + v.beta2) / (v.beta1**2 + v.beta2**2)


def cut_problem(v: ThreeBosonVertex) -> FlowProblem:
    r1, r2 = cut_generator(v)
    dpsi1, dpsi2 = -3 * v.beta1 * r1, -3 * v.beta2 * r2

    def rhs(l, x):
        psi1, psi2, _ = unpack_amplitudes(x)
        dphi = -6 * r1 * psi2.conjugate() - 6 * r2.conjugate() * psi1
        return pack_amplitudes(dpsi1, dpsi2, dphi)

    return FlowProblem(dimension=6, rhs=rhs)


def fe_problem(v: ThreeBosonVertex) -> FlowProblem:
    b1, b2 = v.beta1, v.beta2

    def rhs(l, x):
        psi1, psi2, _ = unpack_amplitudes(x)
        dphi = -2 * (b1 + b2) * psi1 * psi2.conjugate()
        return pack_amplitudes(-(b1**2) * psi1, -(b2**2) * psi2, dphi)

    return FlowProblem(
        dimension=6,
        rhs=rhs,
        convergence_measure=lambda x: float(max(math.hypot(x[0], x[1]), math.hypot(x[2], x[3]))),
        convergence_name="max_abs_psi",
    )


def default_horizon(v: ThreeBosonVertex) -> float:
    return 50.0 / min(v.beta1, v.beta2) ** 2


def cut_flow(v: ThreeBosonVertex, config: IntegratorConfig | None = None) -> FlowResult:
    config = (config or IntegratorConfig()).replace(l_max=1.0)
    return integrate_flow(cut_problem(v), config, v.initial_state())


def fe_flow(v: ThreeBosonVertex, config: IntegratorConfig | None = None) -> FlowResult:
    config = config or IntegratorConfig(l_max=default_horizon(v))
    return integrate_flow(fe_problem(v), config, v.initial_state())


def final_phi(result: FlowResult) -> complex:
    return unpack_amplitudes(result.final_state)[2]


def compare_methods(v: ThreeBosonVertex) -> VertexComparison:
    cut_phi = cut_effective_phi(v)
    fe_phi = fe_effective_phi(v)
    cut_shift = cut_phi - v.phi0
    ratio = None
    if cut_shift != 0:
        ratio = ((fe_phi - v.phi0) / cut_shift).real
    return VertexComparison(cut_phi=cut_phi, fe_phi=fe_phi, ratio=ratio)
