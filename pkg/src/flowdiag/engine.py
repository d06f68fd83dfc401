"""Runge-Kutta integration of flows dx/dl = F(l, x) on real coefficient vectors.

Every model and the dense matrix flow reduce their operator equations to a
real state vector and hand it to :func:`integrate_flow`. Complex amplitudes
are stored as interleaved (real, imaginary) pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline

from .errors import ContractViolation

Rhs = Callable[[float, np.ndarray], np.ndarray]
Functional = Callable[[np.ndarray], float]

FIXED = "fixed"
ADAPTIVE = "adaptive"
METHODS = (FIXED, ADAPTIVE)

CONVERGED = "converged"
REACHED_L_MAX = "reached_l_max"
STEP_LIMIT = "step_limit"
NUMERICAL_FAILURE = "numerical_failure"

# step controller: new = SAFETY * h * err**(-1/5), clamped to [MIN_FACTOR, MAX_FACTOR] * h
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

# Runge-Kutta-Fehlberg 4(5): 4th order propagation, 5th order error estimate
_RKF45_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_RKF45_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_RKF45_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_RKF45_ERR = np.array([1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55])


@dataclass(frozen=True)
class FlowProblem:
    dimension: int
    rhs: Rhs
    monitors: Mapping[str, Functional] = field(default_factory=dict)
    convergence_measure: Functional | None = None
    convergence_name: str = "convergence"

    def __post_init__(self):
        if self.dimension < 1:
            raise ContractViolation(f"dimension must be positive, got {self.dimension}")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = ADAPTIVE
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    step: float = 1e-3
    l_max: float = 50.0
    convergence_threshold: float = 1e-10
    max_steps: int = 200_000
    sample_stride: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractViolation(f"Unknown integration method: {self.method}. Choose from {list(METHODS)}")
        for name in ("abs_tol", "rel_tol", "step", "l_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ContractViolation(f"{name} must be a finite positive number, got {value}")
        if not self.convergence_threshold >= 0:
            raise ContractViolation("convergence_threshold must be >= 0")
        if self.max_steps < 1:
            raise ContractViolation("max_steps must be >= 1")
        if self.sample_stride < 1:
            raise ContractViolation("sample_stride must be >= 1")

    def replace(self, **changes) -> IntegratorConfig:
        return replace(self, **changes)


@dataclass
class FlowResult:
    l: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    monitors: dict[str, np.ndarray]
    measure: np.ndarray | None
    termination: str
    steps: int

    @property
    def final_l(self) -> float:
        return float(self.l[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    def to_frame(self, columns: list[str] | None = None, parameter: str = "l") -> pd.DataFrame:
        n = self.states.shape[1]
        names = columns if columns is not None else [f"x{i}" for i in range(n)]
        if len(names) != n:
            raise ContractViolation(f"expected {n} column names, got {len(names)}")
        df = pd.DataFrame(self.states, columns=names)
        df.insert(0, parameter, self.l)
        for name, values in self.monitors.items():
            df[name] = values
        return df


class _Recorder:
    def __init__(self, problem: FlowProblem):
        self.problem = problem
        self.l: list[float] = []
        self.states: list[np.ndarray] = []
        self.derivatives: list[np.ndarray] = []
        self.monitors: dict[str, list[float]] = {name: [] for name in problem.monitors}
        self.measure: list[float] = []
        self.last_step = -1

    def record(self, step: int, l: float, y: np.ndarray, dy: np.ndarray | None, measure: float | None):
        if step == self.last_step:
            return
        self.last_step = step
        self.l.append(l)
        self.states.append(y.copy())
        self.derivatives.append(dy.copy() if dy is not None else np.full_like(y, np.nan))
        for name, fn in self.problem.monitors.items():
            self.monitors[name].append(float(fn(y)))
        if measure is not None:
            self.measure.append(measure)

    def result(self, termination: str, steps: int) -> FlowResult:
        return FlowResult(
            l=np.array(self.l),
            states=np.array(self.states),
            derivatives=np.array(self.derivatives),
            monitors={name: np.array(values) for name, values in self.monitors.items()},
            measure=np.array(self.measure) if self.problem.convergence_measure is not None else None,
            termination=termination,
            steps=steps,
        )


def _evaluate(problem: FlowProblem, l: float, y: np.ndarray) -> np.ndarray | None:
    dy = np.asarray(problem.rhs(l, y), dtype=float)
    if dy.shape != y.shape:
        raise ContractViolation(f"rhs returned shape {dy.shape}, expected {y.shape}")
    if not np.all(np.isfinite(dy)):
        return None
    return dy


def rk4_step(rhs: Rhs, l: float, y: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    k2 = rhs(l + h / 2, y + h / 2 * k1)
    k3 = rhs(l + h / 2, y + h / 2 * k2)
    k4 = rhs(l + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rkf45_step(rhs: Rhs, l: float, y: np.ndarray, h: float, k1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ks = [k1]
    for i in range(1, 6):
        increment = sum(a * k for a, k in zip(_RKF45_A[i], ks))
        ks.append(np.asarray(rhs(l + _RKF45_C[i] * h, y + h * increment), dtype=float))
    stacked = np.array(ks)
    y_new = y + h * (_RKF45_B4 @ stacked)
    error = h * (_RKF45_ERR @ stacked)
    return y_new, error


def _initial_step(y: np.ndarray, dy: np.ndarray, config: IntegratorConfig) -> float:
    scale = config.abs_tol + config.rel_tol * np.abs(y)
    d0 = float(np.sqrt(np.mean((y / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((dy / scale) ** 2)))
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    return min(h, config.l_max)


def _is_converged(measure: float | None, threshold: float) -> bool:
    if measure is None:
        return False
    return measure < threshold or measure == 0.0


def integrate_flow(problem: FlowProblem, config: IntegratorConfig, initial) -> FlowResult:
    y = np.array(initial, dtype=float).reshape(-1)
    if y.shape[0] != problem.dimension:
        raise ContractViolation(f"initial state has length {y.shape[0]}, problem dimension is {problem.dimension}")

    def measure_of(state):
        if problem.convergence_measure is None:
            return None
        return float(problem.convergence_measure(state))

    recorder = _Recorder(problem)
    l = 0.0
    steps = 0
    dy = _evaluate(problem, l, y)
    if dy is None:
        recorder.record(steps, l, y, None, measure_of(y))
        return recorder.result(NUMERICAL_FAILURE, steps)

    fixed = config.method == FIXED
    h = config.step if fixed else _initial_step(y, dy, config)
    snap = 1e-12 * max(1.0, config.l_max)

    while True:
        measure = measure_of(y)
        if steps % config.sample_stride == 0:
            recorder.record(steps, l, y, dy, measure)
        if _is_converged(measure, config.convergence_threshold):
            termination = CONVERGED
            break
        if l >= config.l_max - snap:
            termination = REACHED_L_MAX
            break
        if steps >= config.max_steps:
            termination = STEP_LIMIT
            break

        if fixed:
            l_new = min((steps + 1) * config.step, config.l_max)
            if config.l_max - l_new < snap:
                l_new = config.l_max
            y_new = rk4_step(problem.rhs, l, y, l_new - l, dy)
            if not np.all(np.isfinite(y_new)):
                termination = NUMERICAL_FAILURE
                break
        else:
            while True:
                h_try = min(h, config.l_max - l)
                y_new, error = rkf45_step(problem.rhs, l, y, h_try, dy)
                if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(error))):
                    y_new = None
                    break
                scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err = float(np.max(np.abs(error) / scale))
                factor = SAFETY * err ** -0.2 if err > 0 else MAX_FACTOR
                if err <= 1.0:
                    h = h_try * min(MAX_FACTOR, max(MIN_FACTOR, factor))
                    break
                h = h_try * max(MIN_FACTOR, factor)
                if h < 1e-14 * max(1.0, abs(l)):
                    y_new = None
                    break
            if y_new is None:
                termination = NUMERICAL_FAILURE
                break
            l_new = l + h_try
            if config.l_max - l_new < snap:
                l_new = config.l_max

        steps += 1
        l, y = l_new, y_new
        dy = _evaluate(problem, l, y)
        if dy is None:
            recorder.record(steps, l, y, None, measure_of(y))
            return recorder.result(NUMERICAL_FAILURE, steps)

    recorder.record(steps, l, y, dy, measure_of(y))
    return recorder.result(termination, steps)


def resample_trajectory(result: FlowResult, l_points) -> np.ndarray:
    """States at the requested flow parameters, by cubic Hermite interpolation
    on the sampled states and their derivatives. Sample points are returned exactly."""
    points = np.atleast_1d(np.asarray(l_points, dtype=float))
    if points.size and (points.min() < result.l[0] or points.max() > result.final_l):
        raise ContractViolation(f"requested l outside [{result.l[0]}, {result.final_l}]")
    if np.any(np.diff(points) < 0):
        raise ContractViolation("requested l values must be nondecreasing")

    if len(result.l) == 1:
        out = np.repeat(result.states[:1], len(points), axis=0)
    else:
        spline = CubicHermiteSpline(result.l, result.states, result.derivatives, axis=0)
        out = spline(points)

    idx = np.clip(np.searchsorted(result.l, points), 0, len(result.l) - 1)
    exact = result.l[idx] == points
    out[exact] = result.states[idx[exact]]
    return out
