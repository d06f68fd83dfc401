import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowdiag.engine import CONVERGED, IntegratorConfig
from flowdiag.errors import ContractViolation, NumericalFailure
from flowdiag.matrix_flow import (
    AntiHermitianGenerator,
    DenseHermitian,
    accumulate_unitary,
    commutator,
    conjugate,
    diagonalizing_generator,
    flow_diagonalize,
    hermitian_from_json,
    hermitian_to_json,
    matrix_exponential,
    offdiagonal_norm,
    one_step_cut,
    random_anti_hermitian,
    random_hermitian,
    random_unitary,
    reference_eigenvalues,
    reparametrized_flow,
    wegner_generator,
)

TWO_BY_TWO = [[1.0, 0.5], [0.5, 2.0]]
TWO_BY_TWO_SPECTRUM = [(3 - math.sqrt(2)) / 2, (3 + math.sqrt(2)) / 2]


@pytest.fixture
def h2():
    return DenseHermitian(np.array(TWO_BY_TWO))


def test_commutator_hand_example():
    a = np.array([[0, 1], [-1, 0]])
    b = np.diag([1, 2])

    np.testing.assert_allclose(commutator(a, b), [[0, 1], [1, 0]])


def test_commutator_with_identity_vanishes():
    b = random_hermitian(3, seed=1).entries

    np.testing.assert_allclose(commutator(np.eye(3), b), np.zeros((3, 3)), atol=0)
    np.testing.assert_allclose(commutator(b, b), np.zeros((3, 3)), atol=1e-15)


def test_commutator_dimension_mismatch():
    with pytest.raises(ContractViolation):
        commutator(np.eye(2), np.eye(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_commutator_is_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))

    np.testing.assert_allclose(commutator(a, b), -commutator(b, a), atol=1e-12)


def test_wegner_generator_two_by_two(h2):
    eta = wegner_generator(h2)

    assert isinstance(eta, AntiHermitianGenerator)
    np.testing.assert_allclose(eta.entries, [[0, -0.5], [0.5, 0]])


def test_wegner_generator_vanishes_for_equal_diagonal():
    h = DenseHermitian(np.array([[1.0, 0.3 + 0.2j], [0.3 - 0.2j, 1.0]]))

    np.testing.assert_allclose(wegner_generator(h).entries, np.zeros((2, 2)))


def test_non_hermitian_matrix_rejected():
    with pytest.raises(ContractViolation):
        DenseHermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_flow_diagonalize_two_by_two(h2):
    result = flow_diagonalize(h2)

    assert result.termination == CONVERGED
    assert result.matrix.offdiagonal_norm() < 1e-10
    np.testing.assert_allclose(np.sort(result.matrix.diagonal()), TWO_BY_TWO_SPECTRUM, atol=1e-6)


def test_flow_diagonalize_diagonal_input_is_fixed_point():
    h = DenseHermitian(np.diag([3.0, -1.0, 2.0]))
    result = flow_diagonalize(h)

    assert result.termination == CONVERGED
    assert result.flow.final_l == 0.0
    np.testing.assert_array_equal(result.matrix.entries, h.entries)


def test_flow_diagonalize_random_matches_oracle():
    h = random_hermitian(8, seed=42)
    result = flow_diagonalize(h)

    assert result.termination == CONVERGED
    np.testing.assert_allclose(np.sort(result.matrix.diagonal()), reference_eigenvalues(h), atol=1e-6)
    measure = result.flow.measure
    assert np.all(np.diff(measure) <= 1e-12)
    trace = result.flow.monitors["trace"]
    assert np.max(np.abs(trace - trace[0])) < 1e-9 * max(1.0, abs(trace[0]))


@pytest.mark.parametrize("n, seed", [(2, 2), (2, 3), (4, 1), (8, 0)])
def test_flow_keeps_trace_of_square_tightly(n, seed):
    trace_sq = flow_diagonalize(random_hermitian(n, seed)).flow.monitors["trace_sq"]

    assert np.max(np.abs(trace_sq - trace_sq[0])) / trace_sq[0] < 1e-9


def test_every_sample_along_the_flow_is_isospectral():
    h = random_hermitian(4, seed=13)
    result = flow_diagonalize(h, track_unitary=True)
    oracle = reference_eigenvalues(h)

    for sample in result.matrices():
        np.testing.assert_allclose(reference_eigenvalues(sample), oracle, atol=1e-7)
    assert result.unitarity_residual() < 1e-8


def test_tracked_unitary_matches_separate_flow():
    h = random_hermitian(4, seed=5)
    plain = flow_diagonalize(h)
    tracked = flow_diagonalize(h, track_unitary=True)

    np.testing.assert_allclose(tracked.matrix.entries, plain.matrix.entries, atol=1e-7)
    assert plain.unitary is None


def test_unitarity_residual_needs_tracked_unitary(h2):
    with pytest.raises(ContractViolation):
        flow_diagonalize(h2).unitarity_residual()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_reference_eigenvalues_invariant_under_unitary_conjugation(seed):
    h = random_hermitian(5, seed)
    q = random_unitary(5, seed + 50)
    rotated = DenseHermitian.symmetrized(q @ h.entries @ q.conj().T)

    np.testing.assert_allclose(reference_eigenvalues(rotated), reference_eigenvalues(h), atol=1e-9)


def test_reference_eigenvalues_match_numpy():
    h = random_hermitian(6, seed=3)

    np.testing.assert_allclose(reference_eigenvalues(h), np.linalg.eigvalsh(h.entries), atol=1e-10)
    np.testing.assert_allclose(reference_eigenvalues(DenseHermitian(np.array(TWO_BY_TWO))), TWO_BY_TWO_SPECTRUM)


def test_matrix_exponential_cases():
    np.testing.assert_allclose(matrix_exponential(np.zeros((3, 3))), np.eye(3))
    np.testing.assert_allclose(matrix_exponential(np.diag([1.0, -2.0])), np.diag([math.e, math.exp(-2.0)]))
    theta = math.pi / 2
    rotation = matrix_exponential(np.array([[0, theta], [-theta, 0]]))
    np.testing.assert_allclose(rotation, [[0, 1], [-1, 0]], atol=1e-10)


def test_matrix_exponential_of_anti_hermitian_is_unitary():
    r = random_anti_hermitian(5, seed=9, scale=3.0)
    u = matrix_exponential(r.entries)

    np.testing.assert_allclose(u.conj().T @ u, np.eye(5), atol=1e-10)


def test_matrix_exponential_overflow():
    with pytest.raises(NumericalFailure):
        matrix_exponential(np.diag([1000.0, 0.0]))


def test_one_step_cut_trivial_cases(h2):
    zero = AntiHermitianGenerator(np.zeros((2, 2)))
    r = random_anti_hermitian(2, seed=0)

    np.testing.assert_allclose(one_step_cut(h2, zero, 1.0).matrix.entries, h2.entries, atol=1e-14)
    unchanged = one_step_cut(h2, r, 0.0)
    np.testing.assert_array_equal(unchanged.matrix.entries, h2.entries)
    assert unchanged.discrepancy == 0.0


def test_one_step_cut_rotation_diagonalizes(h2):
    r = -0.5 * math.atan(2 * 0.5 / (2 - 1))
    result = one_step_cut(h2, AntiHermitianGenerator(np.array([[0, r], [-r, 0]])), 1.0)

    assert result.matrix.offdiagonal_norm() < 1e-8
    np.testing.assert_allclose(np.sort(result.matrix.diagonal()), TWO_BY_TWO_SPECTRUM, atol=1e-8)
    assert result.discrepancy < 1e-8


def test_one_step_cut_negative_theta_inverts():
    h = random_hermitian(4, seed=5)
    r = random_anti_hermitian(4, seed=6)
    forward = one_step_cut(h, r, 0.7)
    back = one_step_cut(forward.matrix, r, -0.7)

    np.testing.assert_allclose(back.matrix.entries, h.entries, atol=1e-10)
    assert back.discrepancy < 1e-8


def test_one_step_cut_dimension_mismatch(h2):
    with pytest.raises(ContractViolation):
        one_step_cut(h2, random_anti_hermitian(3, seed=0), 1.0)


def test_reparametrized_flow_matches_integrated_angle():
    h = random_hermitian(5, seed=11)
    r = random_anti_hermitian(5, seed=12)
    reparam = reparametrized_flow(h, [(r, lambda l: 2.0 * l)], 1.0)

    np.testing.assert_allclose(reparam.matrix.entries, conjugate(h, r, 1.0).entries, atol=1e-8)


def test_reparametrized_flow_with_commuting_generators():
    h = random_hermitian(4, seed=21)
    r1 = random_anti_hermitian(4, seed=22, scale=0.5)
    r2 = AntiHermitianGenerator.projected(r1.entries @ r1.entries @ r1.entries)
    result = reparametrized_flow(h, [(r1, lambda l: 1.0), (r2, lambda l: 0.5)], 1.0)
    expected = conjugate(conjugate(h, r2, 0.5), r1, 1.0)

    np.testing.assert_allclose(result.matrix.entries, expected.entries, atol=1e-8)


def test_accumulate_unitary_zero_generator(h2):
    result = accumulate_unitary(h2, IntegratorConfig(l_max=1.0), AntiHermitianGenerator(np.zeros((2, 2))))

    np.testing.assert_allclose(result.unitary, np.eye(2), atol=0)


def test_accumulate_unitary_constant_generator_matches_exponential():
    h = random_hermitian(3, seed=2)
    r = random_anti_hermitian(3, seed=4)
    result = accumulate_unitary(h, IntegratorConfig(l_max=0.7), r)

    np.testing.assert_allclose(result.unitary, matrix_exponential(0.7 * r.entries), atol=1e-8)


def test_accumulate_unitary_wegner_diagonalizes(h2):
    result = accumulate_unitary(h2)
    u = result.unitary
    rotated = u @ h2.entries @ u.conj().T

    assert result.unitarity_residual() < 1e-8
    assert offdiagonal_norm(rotated) < 1e-6
    np.testing.assert_allclose(rotated, result.matrix.entries, atol=1e-6)


def test_diagonalizing_generator_reaches_diagonal_at_one():
    h = random_hermitian(4, seed=8)
    result = one_step_cut(h, diagonalizing_generator(h), 1.0)

    assert result.matrix.offdiagonal_norm() < 1e-8
    np.testing.assert_allclose(np.sort(result.matrix.diagonal()), reference_eigenvalues(h), atol=1e-8)


def test_random_hermitian_is_seeded_with_spread_spectrum():
    a = random_hermitian(6, seed=17)
    b = random_hermitian(6, seed=17)

    np.testing.assert_array_equal(a.entries, b.entries)
    assert np.min(np.diff(np.linalg.eigvalsh(a.entries))) >= 0.5 - 1e-9


def test_matrix_json_format():
    h = DenseHermitian(np.array([[1.0, 2 - 1j], [2 + 1j, -1.0]]))
    d = hermitian_to_json(h)

    assert d["n"] == 2
    assert d["im"] == [0.0, -1.0, 1.0, 0.0]
    np.testing.assert_array_equal(hermitian_from_json(d).entries, h.entries)


def test_matrix_json_missing_field():
    with pytest.raises(ContractViolation) as exc_info:
        hermitian_from_json({"n": 2, "im": [0, 0, 0, 0]})

    assert "re" in str(exc_info.value)
