"""
Tests for the decorated chain and bilayer grid quantum graphs
"""

import cmath
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from models.quantum import ANTISYMMETRIC, BILAYER_2D, CHAIN_1D, DIRICHLET, NEUMANN, SYMMETRIC, GridModel
from services.quantum_graph import (
    R_integral,
    bound_state,
    chain1d_bands,
    chain1d_bound_state,
    chain1d_defect_check,
    chain1d_dispersion_samples,
    chain1d_nu,
    chain1d_secular,
    chain1d_z,
    edge_interpolant,
    gap_margin,
    grid2d_K_hat,
    grid2d_KD,
    grid2d_KN,
    grid2d_bands,
    grid2d_bound_state,
    grid2d_decay_rate,
    grid2d_mirror_lift,
    grid2d_nu_root,
    grid2d_secular,
    grid2d_surface_numerator,
    grid2d_surface_points,
    in_band,
    ode_residual,
    boundary_constants,
    secular_matrices,
    solve_on_branches,
)
from utils.errors import DomainError, PoleError, PropagatingBranchError, SpectralProximityError

MU_CHAIN = 2.0 * math.pi + 0.1


@pytest.fixture(scope="module")
def chain_state():
    return chain1d_bound_state(MU_CHAIN, 20)


@pytest.fixture(scope="module")
def dirichlet_state():
    return grid2d_bound_state(0.5, DIRICHLET, 20, 256)


@pytest.fixture(scope="module")
def neumann_state():
    return grid2d_bound_state(0.5 + math.pi, NEUMANN, 20, 256)


# --- decorated chain -------------------------------------------------------

@given(mu=st.floats(min_value=0.1, max_value=12.0), k=st.floats(min_value=-3.0, max_value=3.0),
       parity=st.sampled_from([SYMMETRIC, ANTISYMMETRIC]))
def test_chain_determinant_matches_closed_form(mu, k, parity):
    value = chain1d_secular(mu, cmath.exp(1j * k), parity)
    assert value.det_error < 1e-10 * max(1.0, abs(value.det_closed), mu * mu)


def test_chain_multiplier_at_two_pi():
    assert chain1d_z(2.0 * math.pi) == pytest.approx(2.0 - math.sqrt(3.0))
    z = chain1d_z(MU_CHAIN)
    assert 0.0 < z < 1.0
    assert z + 1.0 / z == pytest.approx(3.0 * math.cos(MU_CHAIN) + 1.0)
    assert abs(chain1d_secular(MU_CHAIN, z).det) < 1e-10


def test_chain_multiplier_needs_a_gap():
    with pytest.raises(PropagatingBranchError):
        chain1d_z(math.pi / 2)


def test_chain_nu_solves_the_defect_equation():
    nu, V0 = chain1d_nu(MU_CHAIN)
    z = chain1d_z(MU_CHAIN)
    target = 2.0 * (z - math.cos(MU_CHAIN)) * MU_CHAIN / math.sin(MU_CHAIN)
    assert nu / math.tan(0.5 * nu) == pytest.approx(target, rel=1e-10)
    assert V0 == pytest.approx(MU_CHAIN ** 2 - nu ** 2)
    assert abs(nu - MU_CHAIN) > 1e-6


def test_chain_bound_state_satisfies_vertex_conditions(chain_state):
    assert chain_state.residual_vertex < 1e-10
    assert chain_state.decay_ratio_error < 1e-10
    assert chain_state.reflection_error < 1e-10
    assert chain_state.antisymmetry_error == 0.0
    assert chain_state.embedded
    assert chain_state.witness.contains(MU_CHAIN)
    assert chain_state.decay.alpha == pytest.approx(-math.log(chain_state.z), rel=1e-8)


def test_chain_defect_edge(chain_state):
    check = chain1d_defect_check(chain_state)
    assert check['ode_residual'] < 1e-10
    assert check['nu_equation_residual'] < 1e-8
    assert check['upper_vertex_mismatch'] < 1e-10
    assert check['lower_vertex_mismatch'] < 1e-10
    assert check['flux_mismatch'] < 1e-9


def test_defect_check_sees_a_wrong_potential(chain_state):
    tampered = replace(chain_state, V0=chain_state.V0 + 0.5)
    assert chain1d_defect_check(tampered)['ode_residual'] > 1e-3


def test_defect_check_sees_a_wrong_rung_amplitude(chain_state):
    coefficients = replace(chain_state.coefficients,
                           defect_amplitude=1.01 * chain_state.coefficients.defect_amplitude)
    check = chain1d_defect_check(replace(chain_state, coefficients=coefficients))
    assert check['ode_residual'] < 1e-10
    assert check['upper_vertex_mismatch'] > 1e-3
    assert check['lower_vertex_mismatch'] > 1e-3


def test_shifted_nu_breaks_the_flux_condition(chain_state):
    shifted = chain1d_bound_state(MU_CHAIN, 20, nu=chain_state.nu + 1e-2)
    assert shifted.residual_vertex > 1e-4
    check = chain1d_defect_check(shifted)
    assert check['ode_residual'] < 1e-10
    assert check['flux_mismatch'] > 1e-3


def test_chain_bands():
    sym = chain1d_bands(SYMMETRIC)
    anti = chain1d_bands(ANTISYMMETRIC)
    edge = math.acos(-1.0 / 3.0)
    assert sym.span()[0] == (pytest.approx(0.0), pytest.approx(edge))
    assert sym.witness(MU_CHAIN) is not None
    assert anti.witness(MU_CHAIN) is None
    assert anti.witness(math.pi) is not None


def test_chain_dispersion_samples_are_real():
    rows = chain1d_dispersion_samples(50)
    assert rows
    for row in rows:
        w = 3.0 * math.cos(row['mu']) + (1.0 if row['parity'] == ANTISYMMETRIC else -1.0)
        assert 2.0 * math.cos(row['k']) == pytest.approx(w, abs=1e-9)


def test_mu_must_be_positive():
    with pytest.raises(DomainError):
        chain1d_nu(-1.0)
    with pytest.raises(DomainError):
        grid2d_nu_root(math.pi, DIRICHLET)


def test_branch_solver_finds_one_root_per_branch():
    def equation(nu):
        return nu / math.tan(0.5 * nu) + 5.0

    roots = solve_on_branches(equation, 0.0, 2.0 * math.pi, 0.1, 12.0)
    assert len(roots) == 2
    assert math.pi < roots[0] < 2.0 * math.pi < roots[1] < 12.0
    assert all(abs(equation(r)) < 1e-6 for r in roots)


# --- bilayer grid ----------------------------------------------------------

quasi_momenta = st.complex_numbers(max_magnitude=2.0, allow_nan=False)


@given(k1=quasi_momenta, k2=quasi_momenta)
@settings(max_examples=20)
def test_grid_determinant_matches_closed_form(k1, k2):
    a, b, c, d = boundary_constants(0.5, 2.0, DIRICHLET)
    value = grid2d_secular(a, b, c, d, 0.5, k1, k2, nu=2.0)
    assert value.det_error < 1e-8 * max(1.0, abs(value.det_closed))


@pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN])
def test_floquet_rung_amplitude_solves_the_cell_system(bc):
    mu, nu = 0.5, 2.3
    a, b, c, d = boundary_constants(mu, nu, bc)
    rng = np.random.default_rng(7)
    for k1, k2 in rng.uniform(-math.pi, math.pi, size=(5, 2)):
        matrix = secular_matrices(a, b, mu, k1, k2)
        rhs = np.array([c, c, c, c, d], dtype=complex) / (mu * mu - nu * nu)
        solution = np.linalg.solve(matrix, rhs)
        assert solution[0] == pytest.approx(grid2d_K_hat(mu, nu, k1, k2, bc), rel=1e-10)


def test_gap_margins_and_decay_rate():
    assert gap_margin(0.5, DIRICHLET) == pytest.approx(abs(5.0 * math.cos(0.5) + 1.0) - 4.0)
    assert not in_band(0.5, DIRICHLET)
    assert in_band(0.5, NEUMANN)
    assert grid2d_decay_rate(0.5, DIRICHLET) == pytest.approx(1.12, abs=0.01)
    with pytest.raises(SpectralProximityError):
        grid2d_decay_rate(math.pi / 2, DIRICHLET)


def test_grid_bands_are_complementary_near_zero():
    dirichlet = grid2d_bands(DIRICHLET)
    neumann = grid2d_bands(NEUMANN)
    assert dirichlet.witness(0.5) is None
    assert neumann.witness(0.5) is not None
    assert neumann.witness(0.5 + math.pi) is None
    assert dirichlet.witness(0.5 + math.pi) is not None


def test_lattice_integral_is_positive_in_the_gap():
    value = R_integral(0.5, 128)
    assert 0.0 < value < 1.0 / (abs(5.0 * math.cos(0.5) + 1.0) - 4.0)


@pytest.mark.parametrize("mu, bc, amplitude", [(0.5, DIRICHLET, grid2d_KD), (0.5 + math.pi, NEUMANN, grid2d_KN)])
def test_nu_root_cancels_the_rung_amplitude(mu, bc, amplitude):
    nu, V0 = grid2d_nu_root(mu, bc, quad_n=256)
    assert amplitude(mu, nu, 256) == pytest.approx(0.0, abs=1e-9)
    assert V0 == pytest.approx(mu * mu - nu * nu)


def test_surface_points_are_poles_and_numerator_is_nonzero():
    nu, _ = grid2d_nu_root(0.5, DIRICHLET, quad_n=256)
    points = grid2d_surface_points(0.5, DIRICHLET, 4)
    numerator = grid2d_surface_numerator(0.5, nu, DIRICHLET, points)
    assert np.all(np.abs(numerator) > 1e-6)
    z1, z2 = points[0]
    with pytest.raises(PoleError):
        grid2d_K_hat(0.5, nu, -1j * cmath.log(z1), -1j * cmath.log(z2), DIRICHLET)


def test_dirichlet_bound_state(dirichlet_state):
    state = dirichlet_state
    assert state.residual_vertex < 1e-8
    assert state.defect_remainder < 1e-6
    assert state.embedded
    assert state.decay.alpha == pytest.approx(state.predicted_alpha, rel=0.05)
    assert state.tails == sorted(state.tails)
    assert state.tails[-1] > state.tails[0]


def test_neumann_bound_state(neumann_state):
    state = neumann_state
    assert state.residual_vertex < 1e-8
    assert state.embedded
    assert state.witness.contains(0.5 + math.pi)


@pytest.mark.parametrize("fixture, sign", [("dirichlet_state", -1), ("neumann_state", 1)])
def test_mirror_lift(request, fixture, sign):
    state = request.getfixturevalue(fixture)
    lift = grid2d_mirror_lift(state)
    assert lift.sign == sign
    assert lift.residual_lower < 1e-8
    assert max(lift.midpoint_value_jump, lift.midpoint_derivative_jump) < 1e-10


def test_mirror_lift_with_the_wrong_reflection(dirichlet_state, neumann_state):
    even = grid2d_mirror_lift(dirichlet_state, sign=1)
    assert even.midpoint_derivative_jump > 1e-2
    odd = grid2d_mirror_lift(neumann_state, sign=-1)
    assert odd.midpoint_value_jump > 1e-2


def test_shifted_nu_leaves_a_grid_residual(dirichlet_state):
    shifted = grid2d_bound_state(0.5, DIRICHLET, 20, 256, nu=dirichlet_state.nu + 1e-2)
    assert shifted.residual_vertex > 1e-5


def test_grid_box_limits():
    with pytest.raises(DomainError):
        grid2d_bound_state(0.5, DIRICHLET, 5, 256)
    with pytest.raises(DomainError):
        grid2d_bound_state(0.5, DIRICHLET, 40, 64)


def test_bound_state_dispatch(chain_state):
    state = bound_state(GridModel(CHAIN_1D), MU_CHAIN, box=20)
    assert state.nu == pytest.approx(chain_state.nu)
    assert GridModel(BILAYER_2D, 'neumann').companion_bc == DIRICHLET


def test_sampled_edge_functions():
    edge = edge_interpolant(0.5, 2.0, 3.0)
    x = np.linspace(0.0, 1.0, 7)
    assert np.allclose(edge(x), 0.5 * np.cos(3.0 * x) + 2.0 * np.sin(3.0 * x) / 3.0, atol=1e-13)
    assert ode_residual(edge, 0.0, 9.0) < 1e-10
    assert ode_residual(edge, 0.0, 8.0) > 1e-2
    mirrored = edge_interpolant(0.0, 1.0, 3.0, (-0.5, 0.0), mirrored=True)
    assert mirrored(-0.25) == pytest.approx(math.sin(0.75) / 3.0, abs=1e-14)
