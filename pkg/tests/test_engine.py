import math

import numpy as np
import pytest

from flowdiag.engine import (
    CONVERGED,
    NUMERICAL_FAILURE,
    REACHED_L_MAX,
    STEP_LIMIT,
    FlowProblem,
    IntegratorConfig,
    integrate_flow,
    resample_trajectory,
)
from flowdiag.errors import ContractViolation


@pytest.fixture
def decay():
    return FlowProblem(
        dimension=1,
        rhs=lambda l, x: -x,
        monitors={"value": lambda x: float(x[0])},
        convergence_measure=lambda x: abs(float(x[0])),
        convergence_name="abs_x",
    )


@pytest.fixture
def oscillator():
    return FlowProblem(
        dimension=2,
        rhs=lambda l, x: np.array([x[1], -x[0]]),
        monitors={"energy": lambda x: float(x[0] ** 2 + x[1] ** 2)},
    )


def test_fixed_rk4_matches_exponential(decay):
    config = IntegratorConfig(method="fixed", step=1e-3, l_max=2.0, convergence_threshold=0.0)
    result = integrate_flow(decay, config, [1.0])

    assert result.termination == REACHED_L_MAX
    assert result.final_l == 2.0
    np.testing.assert_allclose(result.states[:, 0], np.exp(-result.l), rtol=0, atol=1e-10)


def test_fixed_rk4_is_fourth_order(decay):
    errors = []
    for step in (0.1, 0.05):
        config = IntegratorConfig(method="fixed", step=step, l_max=2.0, convergence_threshold=0.0)
        result = integrate_flow(decay, config, [1.0])
        assert result.final_l == 2.0
        errors.append(abs(result.final_state[0] - math.exp(-2.0)))

    assert errors[0] / errors[1] >= 12.0


def test_adaptive_oscillator_keeps_phase(oscillator):
    result = integrate_flow(oscillator, IntegratorConfig(l_max=10.0), [1.0, 0.0])

    assert result.termination == REACHED_L_MAX
    assert abs(result.final_l - 10.0) < 1e-12
    np.testing.assert_allclose(result.final_state, [math.cos(10.0), -math.sin(10.0)], atol=1e-8)
    assert np.max(np.abs(result.monitors["energy"] - 1.0)) < 1e-8


def test_stops_when_measure_drops_below_threshold(decay):
    result = integrate_flow(decay, IntegratorConfig(convergence_threshold=1e-6), [1.0])

    assert result.termination == CONVERGED
    assert abs(result.final_state[0]) < 1e-6
    assert result.final_l == pytest.approx(math.log(1e6), abs=0.5)
    assert len(result.measure) == len(result.l)


def test_fixed_point_converges_at_start():
    problem = FlowProblem(dimension=1, rhs=lambda l, x: np.zeros(1), convergence_measure=lambda x: 0.0)
    result = integrate_flow(problem, IntegratorConfig(convergence_threshold=0.0), [3.0])

    assert result.termination == CONVERGED
    assert result.steps == 0
    assert result.l.tolist() == [0.0]


def test_step_limit(decay):
    config = IntegratorConfig(method="fixed", step=0.1, max_steps=3, convergence_threshold=0.0)
    result = integrate_flow(decay, config, [1.0])

    assert result.termination == STEP_LIMIT
    assert result.steps == 3


def test_non_finite_rhs_is_numerical_failure():
    problem = FlowProblem(dimension=1, rhs=lambda l, x: np.array([np.nan]))
    result = integrate_flow(problem, IntegratorConfig(), [1.0])

    assert result.termination == NUMERICAL_FAILURE
    assert result.steps == 0


def test_blow_up_is_numerical_failure():
    problem = FlowProblem(dimension=1, rhs=lambda l, x: x**2)
    result = integrate_flow(problem, IntegratorConfig(l_max=2.0), [1.0])

    assert result.termination == NUMERICAL_FAILURE
    assert result.final_l < 1.0


def test_initial_state_dimension_mismatch(decay):
    with pytest.raises(ContractViolation) as exc_info:
        integrate_flow(decay, IntegratorConfig(), [1.0, 2.0])

    assert "dimension" in str(exc_info.value)


@pytest.mark.parametrize(
    "changes",
    [
        {"method": "euler"},
        {"abs_tol": 0.0},
        {"rel_tol": -1.0},
        {"l_max": float("inf")},
        {"convergence_threshold": -1e-3},
        {"max_steps": 0},
        {"sample_stride": 0},
    ],
)
def test_invalid_config_raises(changes):
    with pytest.raises(ContractViolation):
        IntegratorConfig(**changes)


def test_sample_stride_keeps_endpoints(decay):
    config = IntegratorConfig(method="fixed", step=0.1, l_max=1.0, convergence_threshold=0.0, sample_stride=10)
    result = integrate_flow(decay, config, [1.0])

    assert result.l.tolist() == [0.0, 1.0]
    assert result.monitors["value"].shape == (2,)


def test_resample_returns_samples_exactly_and_interpolates(decay):
    result = integrate_flow(decay, IntegratorConfig(l_max=3.0, convergence_threshold=0.0), [1.0])

    at_samples = resample_trajectory(result, result.l)
    np.testing.assert_array_equal(at_samples, result.states)

    points = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(resample_trajectory(result, points)[:, 0], np.exp(-points), atol=1e-6)


def test_resample_rejects_points_outside_range(decay):
    result = integrate_flow(decay, IntegratorConfig(l_max=1.0, convergence_threshold=0.0), [1.0])

    with pytest.raises(ContractViolation):
        resample_trajectory(result, [0.5, 1.5])
    with pytest.raises(ContractViolation):
        resample_trajectory(result, [0.5, 0.2])


def test_to_frame_puts_parameter_first(oscillator):
    result = integrate_flow(oscillator, IntegratorConfig(l_max=1.0), [1.0, 0.0])
    df = result.to_frame(["q", "p"])

    assert list(df.columns) == ["l", "q", "p", "energy"]
    assert len(df) == len(result.l)
