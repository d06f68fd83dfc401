import numpy as np
import pytest
from scipy.linalg import expm

from flowdiag.errors import ContractViolation
from flowdiag.spins import (
    DeviationDensity,
    SpinSystemConfig,
    build_spin_hamiltonian,
    exact_propagate,
    heisenberg_flow,
    heisenberg_propagate,
    heisenberg_rhs,
    initial_deviation,
    liouville_flow,
    liouville_rhs,
    pauli_coefficients,
    pauli_order_spectrum,
    propagate_flow,
    reconstruct_from_pauli,
    spin_operator,
    transverse_components,
    zeeman_closed_form,
)


@pytest.fixture
def pair():
    return SpinSystemConfig.chain(2, omega0=1.0, coupling=1.0, alpha=0.5)


def test_spin_operators_commute_like_angular_momentum():
    ix, iy, iz = (spin_operator(2, 1, axis) for axis in "xyz")

    np.testing.assert_allclose(ix @ iy - iy @ ix, 1j * iz, atol=1e-15)
    np.testing.assert_allclose(spin_operator(2, 0, "z") @ iz - iz @ spin_operator(2, 0, "z"), 0, atol=0)


def test_hamiltonian_is_hermitian(pair):
    h = build_spin_hamiltonian(pair)

    assert h.n == 4
    np.testing.assert_allclose(h.entries, h.entries.conj().T, atol=0)


def test_pauli_coefficients_of_single_spin():
    c = pauli_coefficients(spin_operator(1, 0, "x"))

    np.testing.assert_allclose(c, [0, 0.5, 0, 0], atol=1e-15)


def test_pauli_reconstruction_recovers_matrix():
    h = build_spin_hamiltonian(SpinSystemConfig.chain(3, omega0=0.7, coupling=0.4, alpha=1.0))

    np.testing.assert_allclose(reconstruct_from_pauli(pauli_coefficients(h)), h.entries, atol=1e-13)


def test_initial_deviation_is_pure_first_order():
    cfg = SpinSystemConfig.chain(3, omega0=1.0, coupling=0.0, alpha=0.4)
    rho = initial_deviation(cfg)
    spectrum = pauli_order_spectrum(rho)

    assert spectrum.order(1) == pytest.approx(3 * 0.4**2 / 4)
    assert spectrum.order(2) == pytest.approx(0.0, abs=1e-30)
    assert spectrum.total() == pytest.approx(rho.purity() / 8)


def test_zeeman_precession_matches_closed_form():
    cfg = SpinSystemConfig(n_spins=1, omega0=2.0, couplings=np.zeros((1, 1)), alpha=0.5)
    result = propagate_flow(cfg, 3.0)
    x, y = transverse_components(result.final)
    x0, y0 = zeeman_closed_form(0.5, 2.0, result.flow.final_l)

    assert abs(x[0] - x0) < 1e-8
    assert abs(y[0] - y0) < 1e-8


def test_coupled_pair_builds_correlations(pair):
    result = propagate_flow(pair, 0.5)

    assert result.exact_distance < 1e-7
    assert result.spectra[-1][1] > 0
    totals = result.spectra.sum(axis=1)
    assert np.max(np.abs(totals - totals[0])) < 1e-9
    purity = result.flow.monitors["trace_sq"]
    assert np.max(np.abs(purity - purity[0])) < 1e-9


def test_uncoupled_spins_stay_uncorrelated():
    cfg = SpinSystemConfig.chain(3, omega0=1.3, coupling=0.0, alpha=0.5)
    result = propagate_flow(cfg, 2.0)

    assert np.max(result.spectra[:, 1:]) <= 1e-12


def test_zero_time_returns_initial_state(pair):
    result = propagate_flow(pair, 0.0)

    np.testing.assert_allclose(result.final.matrix, initial_deviation(pair).matrix, atol=0)
    assert result.exact_distance < 1e-15


def test_trajectory_table(pair):
    df = propagate_flow(pair, 0.2).to_frame()

    assert list(df.columns) == ["t", "W_1", "W_2", "trace_check", "purity_check"]
    assert df["purity_check"].iloc[0] == 0.0


def test_heisenberg_flow_matches_exact():
    h = build_spin_hamiltonian(SpinSystemConfig.chain(2, omega0=0.8, coupling=0.6, alpha=1.0))
    a = spin_operator(2, 0, "x")
    result = heisenberg_flow(a, h, 1.5)

    np.testing.assert_allclose(result.operator, heisenberg_propagate(a, h, 1.5), atol=1e-8)


def test_commuting_deviation_is_stationary(pair):
    h = build_spin_hamiltonian(pair)
    rho = DeviationDensity(spin_operator(2, 0, "z") + spin_operator(2, 1, "z"))

    np.testing.assert_allclose(liouville_rhs(rho, h).matrix, 0, atol=1e-14)


def test_invalid_systems_rejected():
    with pytest.raises(ContractViolation):
        SpinSystemConfig.chain(9, omega0=1.0, coupling=0.0, alpha=1.0)
    with pytest.raises(ContractViolation):
        SpinSystemConfig(n_spins=2, omega0=1.0, couplings=np.ones((2, 2)), alpha=1.0)
    with pytest.raises(ContractViolation):
        DeviationDensity(np.eye(2))


def test_heisenberg_and_liouville_rhs_have_opposite_sign(pair):
    h = build_spin_hamiltonian(pair)
    rho = initial_deviation(pair)

    np.testing.assert_allclose(heisenberg_rhs(rho.matrix, h), -liouville_rhs(rho, h).matrix, atol=1e-14)


def test_exact_propagation_is_unitary(pair):
    h = build_spin_hamiltonian(pair)
    rho0 = initial_deviation(pair)
    rho = exact_propagate(rho0, h, 0.7)

    assert rho.purity() == pytest.approx(rho0.purity(), rel=1e-12)
    np.testing.assert_allclose(exact_propagate(rho, h, -0.7).matrix, rho0.matrix, atol=1e-12)


def test_dipolar_pair_hamiltonian_by_hand():
    h = build_spin_hamiltonian(SpinSystemConfig.chain(2, omega0=0.0, coupling=1.0, alpha=1.0))
    expected = [[0.5, 0, 0, 0], [0, -0.5, -0.5, 0], [0, -0.5, -0.5, 0], [0, 0, 0, 0.5]]

    np.testing.assert_allclose(h.entries, expected, atol=1e-15)


def test_single_spin_precession_rhs_and_quarter_turn():
    alpha, omega0 = 0.7, 1.0
    sx, sy, sz = (spin_operator(1, 0, axis) for axis in "xyz")

    np.testing.assert_allclose(liouville_rhs(alpha * sx, omega0 * sz).matrix, alpha * omega0 * sy, atol=1e-15)
    quarter = exact_propagate(alpha * sx, omega0 * sz, np.pi / 2)
    np.testing.assert_allclose(quarter.matrix, alpha * sy, atol=1e-10)


def test_four_spin_chain_spreads_order_and_keeps_total():
    result = propagate_flow(SpinSystemConfig.chain(4, omega0=0.0, coupling=1.0, alpha=0.5), 0.5)
    totals = result.spectra.sum(axis=1)

    assert result.spectra[-1][1] > 0
    assert np.max(np.abs(totals - totals[0])) < 1e-9


def _driven(t):
    return spin_operator(1, 0, "z") + 0.5 * np.cos(t) * spin_operator(1, 0, "x")


def _midpoint_product(a, hamiltonian, t_end, sign, slices=5000):
    dt = t_end / slices
    out = np.array(a, dtype=complex)
    for k in range(slices):
        u = expm(sign * 1j * hamiltonian((k + 0.5) * dt) * dt)
        out = u @ out @ u.conj().T
    return out


def test_liouville_flow_with_driven_hamiltonian():
    rho0 = 0.5 * spin_operator(1, 0, "x")
    result = liouville_flow(rho0, _driven, 2.0)

    assert result.flow.final_l == pytest.approx(2.0)
    np.testing.assert_allclose(result.final.matrix, _midpoint_product(rho0, _driven, 2.0, -1), atol=1e-6)


def test_heisenberg_flow_with_driven_hamiltonian():
    a = spin_operator(1, 0, "y")
    result = heisenberg_flow(a, _driven, 2.0)

    np.testing.assert_allclose(result.operator, _midpoint_product(a, _driven, 2.0, 1), atol=1e-6)


def test_scaled_hamiltonian_follows_integrated_angle(pair):
    h0 = build_spin_hamiltonian(pair).entries
    rho0 = initial_deviation(pair)
    a = spin_operator(2, 1, "x")
    t_end = 1.2
    angle = t_end + 1 - np.cos(t_end)

    def scaled(t):
        return (1 + np.sin(t)) * h0

    rho = liouville_flow(rho0, scaled, t_end).final
    np.testing.assert_allclose(rho.matrix, exact_propagate(rho0, h0, angle).matrix, atol=1e-8)
    op = heisenberg_flow(a, scaled, t_end).operator
    np.testing.assert_allclose(op, heisenberg_propagate(a, h0, angle), atol=1e-8)


def test_liouville_flow_static_and_mismatched(pair):
    h = build_spin_hamiltonian(pair)
    rho0 = initial_deviation(pair)
    static = liouville_flow(rho0, h, 0.0)

    assert static.flow.steps == 0
    np.testing.assert_array_equal(static.final.matrix, rho0.matrix)
    with pytest.raises(ContractViolation):
        liouville_flow(0.5 * spin_operator(1, 0, "x"), h, 1.0)
