"""
Tests for coupled copies of a periodic operator and the embedding construction
"""

import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from models.coupling import CouplingSpec, TwoGraphAngles
from models.lattice import FloquetPoint
from services.coupling import (
    MINUS,
    PLUS,
    build_coupled,
    conjugation_residual,
    coupled_bands,
    embed_coupled,
    factorization_check,
    hybrid_state,
    hybrid_unitary,
    rabi_scale,
    random_torus_points,
    select_lambda0,
    theorem1_embed,
    two_graph_spec,
)
from services.greens_defect import example1_defect, resolvent_delta, synth_defect
from services.lattice_core import example1_stencil, lattice_laplacian, scalar_stencil
from utils.errors import DomainError, EmbeddingError
from utils.serialization import load_coupling


@pytest.fixture(scope="module")
def chain_pair():
    """Chain resolvent at lambda = -3 with its synthesized defect."""
    stencil = lattice_laplacian(1)
    result = resolvent_delta(stencil, -3.0, 128, 32)
    return stencil, synth_defect(result, stencil), result


def test_coupled_stencil_has_block_structure():
    angles = TwoGraphAngles(math.pi / 3, 0.4, 1.5)
    spec = two_graph_spec(example1_stencil(), angles)
    operator = build_coupled(spec)
    assert operator.fiber == 2
    assert np.allclose(operator.coefficient((0,)), 1.5 * angles.coupling_matrix())
    assert np.allclose(operator.coefficient((2,)), np.eye(2))


@given(theta=st.floats(min_value=0.0, max_value=math.pi), phi=st.floats(min_value=-math.pi, max_value=math.pi))
def test_two_graph_vectors_diagonalize_the_coupling(theta, phi):
    angles = TwoGraphAngles(theta, phi, 1.0)
    K = angles.coupling_matrix()
    assert np.allclose(K @ angles.plus_vector(), angles.plus_vector(), atol=1e-12)
    assert np.allclose(K @ angles.minus_vector(), -angles.minus_vector(), atol=1e-12)
    assert np.allclose(angles.unitary().conj().T @ angles.unitary(), np.eye(2), atol=1e-12)


def test_hybrid_unitary_orders_and_fixes_phases():
    K = np.array([[0.0, 1j], [-1j, 0.0]])
    U, eigenvalues = hybrid_unitary(K)
    assert list(eigenvalues) == [pytest.approx(1.0), pytest.approx(-1.0)]
    assert np.allclose(K @ U, U @ np.diag(eigenvalues))
    for j in range(2):
        pivot = U[:, j][np.argmax(np.abs(U[:, j]))] if abs(U[j, j]) <= 1e-8 else U[j, j]
        assert abs(pivot.imag) < 1e-12 and pivot.real > 0


def test_hybrid_unitary_rejects_non_hermitian():
    with pytest.raises(DomainError):
        hybrid_unitary(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_conjugation_and_factorization_on_random_points():
    K = np.array([[1.0, 0.5 + 0.5j, 0.0], [0.5 - 0.5j, 0.0, 0.25], [0.0, 0.25, -1.0]])
    base = lattice_laplacian(2)
    spec = CouplingSpec(base, scalar_stencil(2, 1, 0.7), K)
    points = random_torus_points(2, 5, seed=3)
    assert conjugation_residual(spec, points) < 1e-12
    for point in points:
        assert factorization_check(spec, point, 0.3) < 1e-10
    assert factorization_check(spec, FloquetPoint((0.5, 2.0)), -1.0) < 1e-10


def test_factorization_error_is_relative_at_small_scales(monkeypatch):
    spec = CouplingSpec(scalar_stencil(1, 1, 1e-4), scalar_stencil(1, 1, 5e-5), np.diag([0.5, -1.0]))
    point = FloquetPoint((1.0,))
    assert factorization_check(spec, point, 0.0) < 1e-12

    def skewed(K):
        U, eigenvalues = hybrid_unitary(K)
        return U, 1.1 * eigenvalues

    monkeypatch.setattr('services.coupling.hybrid_unitary', skewed)
    assert factorization_check(spec, point, 0.0, relative=False) < 1e-9
    assert factorization_check(spec, point, 0.0) > 1e-2


def test_factorization_of_vanishing_determinants():
    spec = CouplingSpec(scalar_stencil(1, 1, 0.0), scalar_stencil(1, 1, 0.0), np.diag([1.0, -1.0]))
    assert factorization_check(spec, FloquetPoint((1.0,)), 0.0) == 0.0


def test_rabi_scale_of_descriptors(data_dir):
    spec = load_coupling(data_dir / 'coupling_chain.json')
    assert rabi_scale(spec) == pytest.approx(1.5)
    hopping = CouplingSpec(lattice_laplacian(1), lattice_laplacian(1), np.diag([1.0, -1.0]))
    with pytest.raises(DomainError):
        rabi_scale(hopping)


def test_coupling_spec_requires_two_copies():
    with pytest.raises(DomainError):
        CouplingSpec(example1_stencil(), scalar_stencil(1, 1, 1.0), np.ones((1, 1)))


def test_select_lambda0_centres_the_shifted_energy():
    lambda0 = select_lambda0(-3.0, (-2.0, 2.0))
    assert lambda0 == pytest.approx(1.5)
    assert -3.0 + 2.0 * lambda0 == pytest.approx(0.0)


def test_coupled_bands_shift_by_lambda0():
    report = coupled_bands(lattice_laplacian(1), TwoGraphAngles(0.3, 0.0, 3.0))
    assert report.span() == [(pytest.approx(-5.0), pytest.approx(-1.0)), (pytest.approx(1.0), pytest.approx(5.0))]


@pytest.mark.parametrize("variant", [1, 2])
def test_theorem1_lifts_the_fourth_order_eigenfunction(variant):
    result = example1_defect(math.log(2.0), 40)
    angles = TwoGraphAngles(math.pi / 3, 0.25, 1.0)
    embedding = theorem1_embed(example1_stencil(), result.defect, result.v, result.lam, angles, variant)
    assert embedding.eigenvalue == pytest.approx(-0.75 + 1.0)
    assert embedding.embedded
    assert embedding.witness.contains(-0.75 + 2.0)
    assert embedding.residual < 1e-12
    first, second = embedding.hybrid.energy_split()
    assert first / (first + second) == pytest.approx(math.cos(math.pi / 6) ** 2)


def test_theorem1_from_synthesized_chain_defect(chain_pair):
    stencil, defect, result = chain_pair
    lambda0 = select_lambda0(result.lam, (-2.0, 2.0))
    embedding = theorem1_embed(stencil, defect, result.u, result.lam, TwoGraphAngles(1.0, 0.0, lambda0))
    assert embedding.eigenvalue == pytest.approx(-1.5)
    assert embedding.residual <= 10.0 * embedding.input_residual + 1e-13


def test_embedding_fails_when_shift_misses_the_band(chain_pair):
    stencil, defect, result = chain_pair
    with pytest.raises(EmbeddingError):
        theorem1_embed(stencil, defect, result.u, result.lam, TwoGraphAngles(1.0, 0.0, 5.0))


def test_embedding_rejects_a_wrong_eigenpair(chain_pair):
    stencil, defect, result = chain_pair
    with pytest.raises(EmbeddingError):
        theorem1_embed(stencil, defect.shifted((0,), 0.5), result.u, result.lam, TwoGraphAngles(1.0, 0.0, 1.5))


def test_embed_coupled_with_three_copies(chain_pair):
    stencil, defect, result = chain_pair
    K = np.diag([1.0, 0.0, -1.0])
    embedding = embed_coupled(stencil, defect, result.u, result.lam, K, 3.0, index=0)
    assert embedding.eigenvalue == pytest.approx(0.0)
    assert embedding.operator.fiber == 3
    assert np.abs(embedding.state.values[..., 1:]).max() == 0.0
    with pytest.raises(DomainError):
        embed_coupled(stencil, defect, result.u, result.lam, K, 3.0, index=3)


def test_hybrid_state_components():
    result = example1_defect(math.log(2.0), 20)
    angles = TwoGraphAngles(math.pi / 2, 0.0, 1.0)
    plus = hybrid_state(result.v, angles, PLUS)
    minus = hybrid_state(result.v, angles, MINUS)
    assert plus.combined().fiber == 2
    overlap = np.vdot(plus.combined().values, minus.combined().values)
    assert abs(overlap) < 1e-12
    with pytest.raises(DomainError):
        hybrid_state(result.v, angles, '0')
