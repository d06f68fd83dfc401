"""Dense Hermitian realization of the flow-equation and one-step methods.

Matrices travel through the flow engine flattened to real vectors: the n real
diagonal entries followed by the strict upper triangle as interleaved
(real, imaginary) pairs.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm, logm

from .engine import FlowProblem, FlowResult, IntegratorConfig, integrate_flow
from .errors import ContractViolation, NumericalFailure

HERMITIAN_TOL = 1e-12
# keeps the tr H^2 drift of the Wegner flow under 1e-9 relative
WEGNER_CONFIG = IntegratorConfig(abs_tol=1e-14, rel_tol=1e-12)


def _square(entries, name: str) -> np.ndarray:
    a = np.array(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} has non-finite entries")
    return a


def _tolerance(a: np.ndarray) -> float:
    return HERMITIAN_TOL * max(1.0, float(np.max(np.abs(a), initial=0.0)))


@dataclass(frozen=True)
class DenseHermitian:
    entries: np.ndarray

    def __post_init__(self):
        a = _square(self.entries, "DenseHermitian")
        if np.max(np.abs(a - a.conj().T), initial=0.0) > _tolerance(a):
            raise ContractViolation("matrix is not Hermitian")
        object.__setattr__(self, "entries", a)

    @classmethod
    def symmetrized(cls, entries) -> DenseHermitian:
        a = np.asarray(entries, dtype=complex)
        return cls((a + a.conj().T) / 2)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal().real.copy()

    def offdiagonal_norm(self) -> float:
        return offdiagonal_norm(self.entries)


@dataclass(frozen=True)
class AntiHermitianGenerator:
    entries: np.ndarray

    def __post_init__(self):
        a = _square(self.entries, "AntiHermitianGenerator")
        if np.max(np.abs(a + a.conj().T), initial=0.0) > _tolerance(a):
            raise ContractViolation("generator is not anti-Hermitian")
        object.__setattr__(self, "entries", a)

    @classmethod
    def projected(cls, entries) -> AntiHermitianGenerator:
        a = np.asarray(entries, dtype=complex)
        return cls((a - a.conj().T) / 2)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass
class MatrixFlowResult:
    flow: FlowResult
    matrix: DenseHermitian
    unitary: np.ndarray | None = None

    @property
    def termination(self) -> str:
        return self.flow.termination

    def matrices(self) -> list[DenseHermitian]:
        n = self.matrix.n
        return [DenseHermitian.symmetrized(unpack_hermitian(s[: n * n], n)) for s in self.flow.states]

    def unitarity_residual(self) -> float:
        if self.unitary is None:
            raise ContractViolation("flow was run without accumulating the unitary")
        u = self.unitary
        return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


@dataclass
class OneStepCutResult:
    matrix: DenseHermitian
    ode_matrix: DenseHermitian
    discrepancy: float
    flow: FlowResult | None


def _entries(m) -> np.ndarray:
    if isinstance(m, (DenseHermitian, AntiHermitianGenerator)):
        return m.entries
    return np.asarray(m, dtype=complex)


def offdiagonal_norm(m) -> float:
    a = _entries(m)
    off = a - np.diag(a.diagonal())
    return float(np.linalg.norm(off))


def commutator(a, b) -> np.ndarray:
    a, b = _entries(a), _entries(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise ContractViolation(f"commutator needs equal square matrices, got {a.shape} and {b.shape}")
    return a @ b - b @ a


def _wegner_entries(a: np.ndarray) -> np.ndarray:
    d = a.diagonal().real
    return (d[:, None] - d[None, :]) * a


def wegner_generator(h) -> AntiHermitianGenerator:
    return AntiHermitianGenerator.projected(_wegner_entries(_entries(h)))


@functools.lru_cache(maxsize=None)
def _upper_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, 1)


def pack_hermitian(m) -> np.ndarray:
    a = _entries(m)
    n = a.shape[0]
    upper = a[_upper_indices(n)]
    pairs = np.empty(2 * upper.size)
    pairs[0::2] = upper.real
    pairs[1::2] = upper.imag
    return np.concatenate([a.diagonal().real, pairs])


def unpack_hermitian(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != n * n:
        raise ContractViolation(f"packed Hermitian of size {n} needs {n * n} reals, got {v.shape[0]}")
    a = np.diag(v[:n].astype(complex))
    iu = _upper_indices(n)
    upper = v[n::2] + 1j * v[n + 1::2]
    a[iu] = upper
    a[(iu[1], iu[0])] = upper.conj()
    return a


def pack_complex(m: np.ndarray) -> np.ndarray:
    flat = np.asarray(m, dtype=complex).reshape(-1)
    out = np.empty(2 * flat.size)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out


def unpack_complex(v: np.ndarray, shape) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return (v[0::2] + 1j * v[1::2]).reshape(shape)


def hermitian_monitors(n: int) -> dict[str, Callable[[np.ndarray], float]]:
    def trace(v):
        return float(np.sum(v[:n]))

    def trace_sq(v):
        return float(np.sum(v[:n] ** 2) + 2 * np.sum(v[n:n * n] ** 2))

    def offdiag_sq(v):
        return float(2 * np.sum(v[n:n * n] ** 2))

    return {"trace": trace, "trace_sq": trace_sq, "offdiag_sq": offdiag_sq}


def default_horizon(h, cap: float = 1e6) -> float:
    """50 over the slowest Wegner decay rate, min nonzero (lambda_i - lambda_j)^2."""
    a = _entries(h)
    eigenvalues = np.linalg.eigvalsh(a)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    gaps = np.diff(eigenvalues) ** 2
    gaps = gaps[gaps > (1e-10 * scale) ** 2]
    if gaps.size == 0:
        return 1.0
    return float(min(cap, 50.0 / gaps.min()))


def _generator_flow(
    h: DenseHermitian,
    generator: AntiHermitianGenerator | None,
    config: IntegratorConfig,
    track_unitary: bool,
) -> MatrixFlowResult:
    """dH/dl = [eta, H], and dU/dl = eta U from U(0) = I in the same state vector.

    eta is the Wegner generator of the flowing H unless a fixed generator is
    given; only the Wegner flow stops on the off-diagonal norm."""
    n = h.n
    size = n * n
    fixed = generator.entries if generator is not None else None

    def rhs(l, v):
        m = unpack_hermitian(v[:size], n)
        eta = fixed if fixed is not None else _wegner_entries(m)
        dm = pack_hermitian(eta @ m - m @ eta)
        if not track_unitary:
            return dm
        return np.concatenate([dm, pack_complex(eta @ unpack_complex(v[size:], (n, n)))])

    measure = None
    if generator is None:
        measure = lambda v: float(np.sqrt(2 * np.sum(v[n:size] ** 2)))  # noqa: E731
    problem = FlowProblem(
        dimension=3 * size if track_unitary else size,
        rhs=rhs,
        monitors=hermitian_monitors(n),
        convergence_measure=measure,
        convergence_name="offdiag_norm",
    )
    initial = pack_hermitian(h)
    if track_unitary:
        initial = np.concatenate([initial, pack_complex(np.eye(n))])
    flow = integrate_flow(problem, config, initial)
    final = flow.final_state
    return MatrixFlowResult(
        flow=flow,
        matrix=DenseHermitian.symmetrized(unpack_hermitian(final[:size], n)),
        unitary=unpack_complex(final[size:], (n, n)) if track_unitary else None,
    )


def flow_diagonalize(
    h: DenseHermitian,
    config: IntegratorConfig | None = None,
    track_unitary: bool = False,
) -> MatrixFlowResult:
    """Wegner flow of H; with ``track_unitary`` the accumulated U rides along in one integration."""
    config = config or WEGNER_CONFIG.replace(l_max=default_horizon(h))
    return _generator_flow(h, None, config, track_unitary)


def matrix_exponential(a) -> np.ndarray:
    a = _square(_entries(a), "matrix_exponential input")
    with np.errstate(over="ignore", invalid="ignore"):
        out = expm(a)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("matrix exponential overflowed")
    return out


def conjugate(h, r, theta: float) -> DenseHermitian:
    """e^{theta R} H e^{-theta R}."""
    u = matrix_exponential(theta * _entries(r))
    return DenseHermitian.symmetrized(u @ _entries(h) @ u.conj().T)


def _check_dims(h, r):
    if _entries(h).shape != _entries(r).shape:
        raise ContractViolation(f"dimension mismatch: {_entries(h).shape} vs {_entries(r).shape}")


def reparametrized_flow(
    h: DenseHermitian,
    terms: Sequence[tuple[AntiHermitianGenerator, Callable[[float], float]]],
    l_end: float,
    config: IntegratorConfig | None = None,
) -> MatrixFlowResult:
    """Integrates dH/dl = [sum_k c_k(l) R_k, H] from l = 0 to l_end."""
    n = h.n
    for r, _ in terms:
        _check_dims(h, r)
    config = (config or IntegratorConfig()).replace(l_max=l_end, convergence_threshold=0.0)

    def rhs(l, v):
        m = unpack_hermitian(v, n)
        eta = sum(c(l) * r.entries for r, c in terms)
        return pack_hermitian(commutator(eta, m))

    problem = FlowProblem(dimension=n * n, rhs=rhs, monitors=hermitian_monitors(n))
    flow = integrate_flow(problem, config, pack_hermitian(h))
    return MatrixFlowResult(flow=flow, matrix=DenseHermitian.symmetrized(unpack_hermitian(flow.final_state, n)))


def one_step_cut(
    h: DenseHermitian,
    r: AntiHermitianGenerator,
    theta_end: float,
    config: IntegratorConfig | None = None,
) -> OneStepCutResult:
    """H(theta_end) by the fixed-generator ODE and by exact conjugation.

    The returned matrix is the conjugation; ``discrepancy`` is the Frobenius
    distance to the integrated flow."""
    _check_dims(h, r)
    if theta_end == 0:
        return OneStepCutResult(matrix=h, ode_matrix=h, discrepancy=0.0, flow=None)
    sign = 1.0 if theta_end > 0 else -1.0
    ode = reparametrized_flow(h, [(r, lambda l: sign)], abs(theta_end), config)
    exact = conjugate(h, r, theta_end)
    discrepancy = float(np.linalg.norm(exact.entries - ode.matrix.entries))
    return OneStepCutResult(matrix=exact, ode_matrix=ode.matrix, discrepancy=discrepancy, flow=ode.flow)


def accumulate_unitary(
    h: DenseHermitian,
    config: IntegratorConfig | None = None,
    generator: AntiHermitianGenerator | None = None,
) -> MatrixFlowResult:
    """Integrates dU/dl = eta(l) U from U(0) = I alongside the flow of H.

    Without ``generator`` this is the Wegner flow with the unitary tracked; a
    fixed generator runs to l_max."""
    if generator is None:
        return flow_diagonalize(h, config, track_unitary=True)
    _check_dims(h, generator)
    return _generator_flow(h, generator, config or IntegratorConfig(l_max=1.0), track_unitary=True)


def diagonalizing_generator(h: DenseHermitian) -> AntiHermitianGenerator:
    """Fixed generator R with e^{R} H e^{-R} diagonal: R = log(V^dagger) for H = V diag V^dagger."""
    _, v = np.linalg.eigh(h.entries)
    r = logm(v.conj().T)
    if not np.all(np.isfinite(r)):
        raise NumericalFailure("matrix logarithm of the eigenvector matrix failed")
    return AntiHermitianGenerator.projected(r)


def reference_eigenvalues(h, tol: float = 1e-13, max_sweeps: int = 60) -> np.ndarray:
    """Cyclic complex Jacobi rotations; ascending eigenvalues.

    Stops when the off-diagonal Frobenius norm falls below tol times max(1, ||H||_F)."""
    a = _square(_entries(h), "reference_eigenvalues input").copy()
    n = a.shape[0]
    target = tol * max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        if offdiagonal_norm(a) < target:
            return np.sort(a.diagonal().real)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                magnitude = abs(apq)
                if magnitude == 0.0:
                    continue
                phase = apq / magnitude
                theta = 0.5 * math.atan2(2 * magnitude, (a[p, p] - a[q, q]).real)
                c, s = math.cos(theta), math.sin(theta)
                rot = np.array([[c, -s], [phase.conjugate() * s, phase.conjugate() * c]])
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[[p, q], :] = rot.conj().T @ a[[p, q], :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    if offdiagonal_norm(a) < target:
        return np.sort(a.diagonal().real)
    raise NumericalFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def random_unitary(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = r.diagonal()
    return q * (d / np.abs(d))


def random_hermitian(n: int, seed: int, gap: float = 0.5) -> DenseHermitian:
    """Random unitary conjugating a centered spectrum with gaps drawn from [gap, 2 gap]."""
    rng = np.random.default_rng(seed)
    steps = rng.uniform(gap, 2 * gap, n - 1)
    spectrum = np.concatenate([[0.0], np.cumsum(steps)])
    spectrum -= spectrum.mean()
    q = random_unitary(n, int(rng.integers(2**63 - 1)))
    return DenseHermitian.symmetrized(q @ np.diag(spectrum) @ q.conj().T)


def random_anti_hermitian(n: int, seed: int, scale: float = 1.0) -> AntiHermitianGenerator:
    """Random generator with spectral norm equal to ``scale``."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    r = (z - z.conj().T) / 2
    return AntiHermitianGenerator.projected(r * (scale / np.linalg.norm(r, 2)))


def hermitian_to_json(h: DenseHermitian) -> dict:
    return {
        "n": h.n,
        "re": h.entries.real.reshape(-1).tolist(),
        "im": h.entries.imag.reshape(-1).tolist(),
    }


def hermitian_from_json(d: dict) -> DenseHermitian:
    try:
        n = int(d["n"])
        re = np.asarray(d["re"], dtype=float).reshape(n, n)
        im = np.asarray(d.get("im", np.zeros(n * n)), dtype=float).reshape(n, n)
    except KeyError as e:
        raise ContractViolation(f"matrix JSON is missing field {e.args[0]!r}") from e
    except ValueError as e:
        raise ContractViolation(f"matrix JSON has wrong shape: {e}") from e
    return DenseHermitian(re + 1j * im)
