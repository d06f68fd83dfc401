"""Time evolution as a continuous transformation: spin-1/2 systems in the
high-temperature approximation, rho = 1 - delta_rho, with hbar = 1."""

from __future__ import annotations

import functools
import math
import string
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd

from .engine import REACHED_L_MAX, FlowProblem, FlowResult, IntegratorConfig, integrate_flow
from .errors import ContractViolation
from .matrix_flow import (
    DenseHermitian,
    commutator,
    hermitian_monitors,
    matrix_exponential,
    pack_complex,
    pack_hermitian,
    unpack_complex,
    unpack_hermitian,
)

MAX_SPINS = 8

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

SINGLE_SPIN = {
    "x": PAULI[1] / 2,
    "y": PAULI[2] / 2,
    "z": PAULI[3] / 2,
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


@dataclass(frozen=True)
class SpinSystemConfig:
    n_spins: int
    omega0: float
    couplings: np.ndarray
    alpha: float

    def __post_init__(self):
        if not 1 <= self.n_spins <= MAX_SPINS:
            raise ContractViolation(f"n_spins must be within 1..{MAX_SPINS}, got {self.n_spins}")
        j = np.array(self.couplings, dtype=float)
        if j.shape != (self.n_spins, self.n_spins):
            raise ContractViolation(f"couplings must be {self.n_spins}x{self.n_spins}, got {j.shape}")
        if not np.allclose(j, j.T, rtol=0, atol=1e-12) or np.any(j.diagonal() != 0):
            raise ContractViolation("couplings must be symmetric with zero diagonal")
        object.__setattr__(self, "couplings", j)

    @classmethod
    def chain(cls, n_spins: int, omega0: float, coupling: float, alpha: float) -> SpinSystemConfig:
        j = np.zeros((n_spins, n_spins))
        for i in range(n_spins - 1):
            j[i, i + 1] = j[i + 1, i] = coupling
        return cls(n_spins=n_spins, omega0=omega0, couplings=j, alpha=alpha)

    @property
    def dim(self) -> int:
        return 2**self.n_spins


@dataclass(frozen=True)
class DeviationDensity:
    matrix: np.ndarray

    def __post_init__(self):
        a = np.array(self.matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ContractViolation(f"deviation must be square, got {a.shape}")
        scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
        if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-12 * scale:
            raise ContractViolation("deviation is not Hermitian")
        if abs(np.trace(a)) > 1e-10 * scale * a.shape[0]:
            raise ContractViolation("deviation must be traceless")
        object.__setattr__(self, "matrix", a)

    @classmethod
    def symmetrized(cls, matrix) -> DeviationDensity:
        a = np.asarray(matrix, dtype=complex)
        return cls((a + a.conj().T) / 2)

    @property
    def n_spins(self) -> int:
        return _spin_count(self.matrix.shape[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class PauliOrderSpectrum:
    weights: np.ndarray
    identity: float = 0.0

    def total(self) -> float:
        return float(self.identity + np.sum(self.weights))

    def order(self, n: int) -> float:
        return float(self.weights[n - 1])


@dataclass
class SpinFlowResult:
    flow: FlowResult
    spectra: np.ndarray
    final: DeviationDensity
    exact_distance: float

    def to_frame(self) -> pd.DataFrame:
        n = self.spectra.shape[1]
        df = pd.DataFrame(self.spectra, columns=[f"W_{k}" for k in range(1, n + 1)])
        df.insert(0, "t", self.flow.l)
        df["trace_check"] = self.flow.monitors["trace"]
        purity = self.flow.monitors["trace_sq"]
        df["purity_check"] = purity - purity[0]
        return df


@dataclass
class HeisenbergFlowResult:
    flow: FlowResult
    operator: np.ndarray


@dataclass
class DeviationFlowResult:
    flow: FlowResult
    final: DeviationDensity


def _spin_count(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if n < 1 or 2**n != dim:
        raise ContractViolation(f"dimension {dim} is not a power of 2")
    return n


def _matrix(m) -> np.ndarray:
    if isinstance(m, DeviationDensity):
        return m.matrix
    if isinstance(m, DenseHermitian):
        return m.entries
    return np.asarray(m, dtype=complex)


def spin_operator(n_spins: int, j: int, axis: str) -> np.ndarray:
    factors = [np.eye(2, dtype=complex)] * n_spins
    factors[j] = SINGLE_SPIN[axis]
    return functools.reduce(np.kron, factors)


def build_spin_hamiltonian(cfg: SpinSystemConfig) -> DenseHermitian:
    """Zeeman term plus the secular dipolar coupling
    J_ij (2 Iz_i Iz_j - (I+_i I-_j + I-_i I+_j) / 2)."""
    n = cfg.n_spins
    h = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for j in range(n):
        h += cfg.omega0 * spin_operator(n, j, "z")
    for i in range(n):
        for j in range(i + 1, n):
            coupling = cfg.couplings[i, j]
            if coupling == 0:
                continue
            zz = spin_operator(n, i, "z") @ spin_operator(n, j, "z")
            flip = spin_operator(n, i, "+") @ spin_operator(n, j, "-")
            h += coupling * (2 * zz - 0.5 * (flip + flip.conj().T))
    return DenseHermitian.symmetrized(h)


def initial_deviation(cfg: SpinSystemConfig) -> DeviationDensity:
    total = sum(spin_operator(cfg.n_spins, j, "x") for j in range(cfg.n_spins))
    return DeviationDensity(cfg.alpha * total)


def liouville_rhs(rho_dev, h) -> DeviationDensity:
    rho, ham = _matrix(rho_dev), _matrix(h)
    return DeviationDensity.symmetrized(commutator(-1j * ham, rho))


def heisenberg_rhs(a, h) -> np.ndarray:
    return commutator(1j * _matrix(h), _matrix(a))


def exact_propagate(rho0_dev, h, t: float) -> DeviationDensity:
    u = matrix_exponential(-1j * _matrix(h) * t)
    return DeviationDensity.symmetrized(u @ _matrix(rho0_dev) @ u.conj().T)


def heisenberg_propagate(a, h, t: float) -> np.ndarray:
    u = matrix_exponential(1j * _matrix(h) * t)
    return u @ _matrix(a) @ u.conj().T


def zeeman_closed_form(alpha: float, omega0: float, t: float) -> tuple[float, float]:
    return alpha * math.cos(omega0 * t), alpha * math.sin(omega0 * t)


def _einsum_labels(n: int) -> tuple[str, str, str]:
    letters = string.ascii_letters
    return letters[:n], letters[n:2 * n], letters[2 * n:3 * n]


def pauli_coefficients(matrix) -> np.ndarray:
    """c_P = tr(P m) / 2^n for every Pauli string P, indexed (4,) * n with 0..3 = I, X, Y, Z."""
    m = _matrix(matrix)
    n = _spin_count(m.shape[0])
    rows, cols, out = _einsum_labels(n)
    subscripts = rows + cols + "," + ",".join(out[k] + cols[k] + rows[k] for k in range(n)) + "->" + out
    tensor = m.reshape((2,) * (2 * n))
    return np.einsum(subscripts, tensor, *([PAULI] * n), optimize=True) / 2**n


def reconstruct_from_pauli(coefficients: np.ndarray) -> np.ndarray:
    n = coefficients.ndim
    rows, cols, out = _einsum_labels(n)
    subscripts = out + "," + ",".join(out[k] + rows[k] + cols[k] for k in range(n)) + "->" + rows + cols
    tensor = np.einsum(subscripts, coefficients, *([PAULI] * n), optimize=True)
    return tensor.reshape(2**n, 2**n)


def _string_weights(n: int) -> np.ndarray:
    return np.sum(np.indices((4,) * n) != 0, axis=0)


def pauli_order_spectrum(rho_dev) -> PauliOrderSpectrum:
    coefficients = pauli_coefficients(rho_dev)
    n = coefficients.ndim
    power = np.abs(coefficients) ** 2
    weight = _string_weights(n)
    orders = np.bincount(weight.reshape(-1), weights=power.reshape(-1), minlength=n + 1)
    return PauliOrderSpectrum(weights=orders[1:], identity=float(orders[0]))


def transverse_components(rho_dev) -> tuple[np.ndarray, np.ndarray]:
    """Per-spin X_j, Y_j of the single-spin part sum_j (X_j Ix_j + Y_j Iy_j)."""
    m = _matrix(rho_dev)
    n = _spin_count(m.shape[0])
    norm = 2**n / 4
    x = np.array([np.real(np.trace(spin_operator(n, j, "x") @ m)) / norm for j in range(n)])
    y = np.array([np.real(np.trace(spin_operator(n, j, "y") @ m)) / norm for j in range(n)])
    return x, y


def _hamiltonian_at(h) -> Callable[[float], np.ndarray]:
    """A constant Hamiltonian, or a callable t -> H(t), as a function of t."""
    if callable(h):
        return lambda t: _matrix(h(t))
    entries = _matrix(h)
    return lambda t: entries


def liouville_problem(h) -> FlowProblem:
    """d(delta_rho)/dt = [-i H(t), delta_rho]; ``h`` is a matrix or a callable t -> H(t)."""
    hamiltonian = _hamiltonian_at(h)
    dim = hamiltonian(0.0).shape[0]

    def rhs(t, v):
        return pack_hermitian(commutator(-1j * hamiltonian(t), unpack_hermitian(v, dim)))

    return FlowProblem(dimension=dim * dim, rhs=rhs, monitors=hermitian_monitors(dim))


def _static_result(problem: FlowProblem, state: np.ndarray) -> FlowResult:
    return FlowResult(
        l=np.array([0.0]),
        states=state[None, :],
        derivatives=np.asarray(problem.rhs(0.0, state))[None, :],
        monitors={name: np.array([fn(state)]) for name, fn in problem.monitors.items()},
        measure=None,
        termination=REACHED_L_MAX,
        steps=0,
    )


def liouville_flow(rho0_dev, h, t_end: float, config: IntegratorConfig | None = None) -> DeviationFlowResult:
    rho0 = _matrix(rho0_dev)
    problem = liouville_problem(h)
    if problem.dimension != rho0.size:
        size = math.isqrt(problem.dimension)
        raise ContractViolation(f"dimension mismatch: {rho0.shape} vs Hamiltonian of size {size}")
    initial = pack_hermitian(rho0)
    if t_end == 0:
        flow = _static_result(problem, initial)
    else:
        flow = integrate_flow(problem, (config or IntegratorConfig()).replace(l_max=t_end), initial)
    final = DeviationDensity.symmetrized(unpack_hermitian(flow.final_state, rho0.shape[0]))
    return DeviationFlowResult(flow=flow, final=final)


def propagate_flow(cfg: SpinSystemConfig, t_end: float, config: IntegratorConfig | None = None) -> SpinFlowResult:
    if t_end < 0:
        raise ContractViolation(f"t_end must be >= 0, got {t_end}")
    h = build_spin_hamiltonian(cfg)
    rho0 = initial_deviation(cfg)
    result = liouville_flow(rho0, h, t_end, config)
    flow = result.flow

    spectra = np.array(
        [pauli_order_spectrum(unpack_hermitian(state, cfg.dim)).weights for state in flow.states]
    )
    exact = exact_propagate(rho0, h, flow.final_l)
    distance = float(np.linalg.norm(result.final.matrix - exact.matrix))
    return SpinFlowResult(flow=flow, spectra=spectra, final=result.final, exact_distance=distance)


def heisenberg_flow(a, h, t_end: float, config: IntegratorConfig | None = None) -> HeisenbergFlowResult:
    """dA/dt = [i H(t), A] from A(0) = a; ``h`` is a matrix or a callable t -> H(t)."""
    op = _matrix(a)
    hamiltonian = _hamiltonian_at(h)
    if op.shape != hamiltonian(0.0).shape:
        raise ContractViolation(f"dimension mismatch: {op.shape} vs {hamiltonian(0.0).shape}")
    shape = op.shape

    def rhs(t, v):
        return pack_complex(heisenberg_rhs(unpack_complex(v, shape), hamiltonian(t)))

    problem = FlowProblem(dimension=2 * op.size, rhs=rhs)
    config = (config or IntegratorConfig()).replace(l_max=t_end)
    flow = integrate_flow(problem, config, pack_complex(op))
    return HeisenbergFlowResult(flow=flow, operator=unpack_complex(flow.final_state, shape))
