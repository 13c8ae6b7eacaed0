"""
Tests for periodic stencils, Floquet symbols and truncated application
"""

import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from models.lattice import FloquetPoint, LatticeField, PeriodicStencil, SiteDefect
from services.lattice_core import (
    apply_truncated,
    check_self_adjoint,
    example1_stencil,
    example2_stencil,
    lattice_laplacian,
    symbol_eval,
    symbol_on_torus,
    truncated_matrix,
)
from utils.errors import DimensionMismatchError, DomainError

angles = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)


def test_example1_symbol_at_special_points():
    stencil = example1_stencil()
    assert symbol_eval(stencil, [1.0])[0, 0] == pytest.approx(6.0)
    assert symbol_eval(stencil, [-1.0])[0, 0] == pytest.approx(-2.0)


def test_hermitian_builder_derives_negative_offsets():
    stencil = PeriodicStencil.hermitian(1, 2, {(1,): [[1.0, 2j], [0.0, 1.0]]})
    assert np.allclose(stencil.coefficient((-1,)), stencil.coefficient((1,)).conj().T)
    assert stencil.degree == 1
    assert check_self_adjoint(stencil).passed


def test_hermitian_builder_rejects_negative_offsets():
    with pytest.raises(DomainError):
        PeriodicStencil.hermitian(1, 1, {(-1,): 1.0})


def test_non_self_adjoint_stencil_is_reported():
    stencil = PeriodicStencil(1, 1, {(1,): 1.0}, name='shift')
    report = check_self_adjoint(stencil)
    assert not report.passed
    assert report.violations == [(1,)]
    assert report.max_deviation == pytest.approx(1.0)


def test_offset_length_must_match_dimension():
    with pytest.raises(DimensionMismatchError):
        PeriodicStencil(2, 1, {(1,): 1.0})


def test_floquet_point_rejects_inconsistent_momenta():
    with pytest.raises(DomainError):
        FloquetPoint((1.0,), (0.5,))
    point = FloquetPoint.from_k([0.3, -1.2])
    assert point.dim == 2
    assert np.allclose(np.abs(point.as_array()), 1.0)


@given(k1=angles, k2=angles)
def test_symbol_is_hermitian_on_the_torus(k1, k2):
    stencil = PeriodicStencil.hermitian(2, 2, {(0, 0): [[1.0, 0.5], [0.5, -1.0]],
                                               (1, 0): [[0.2, 1j], [0.0, 0.3]],
                                               (0, 1): np.eye(2)})
    matrix = symbol_eval(stencil, FloquetPoint.from_k([k1, k2]))
    assert np.allclose(matrix, matrix.conj().T, atol=1e-12)


def test_symbol_on_torus_matches_pointwise_evaluation():
    stencil = example2_stencil(0.5, 0.6, 0.8)
    ks = np.linspace(-math.pi, math.pi, 7)
    grid = symbol_on_torus(stencil, [ks])
    for k, block in zip(ks, grid):
        assert np.allclose(block, symbol_eval(stencil, [np.exp(1j * k)]))


@given(k=angles)
def test_plane_wave_is_annihilated_in_the_interior(k):
    stencil = lattice_laplacian(1)
    u = LatticeField.from_function(6, 1, lambda g: np.exp(1j * k * g[0]))
    residual = apply_truncated(stencil, u, lam=2.0 * math.cos(k))
    assert residual.box == (5,)
    assert residual.sup_norm() < 1e-12


def test_defect_enters_only_at_its_site():
    stencil = lattice_laplacian(2)
    u = LatticeField.delta(4, dim=2)
    defect = SiteDefect.single_site(2, 1, 3.0)
    plain = apply_truncated(stencil, u)
    shifted = apply_truncated(stencil, u, defect)
    difference = shifted.values - plain.values
    assert difference[3, 3, 0] == pytest.approx(3.0)
    assert np.count_nonzero(np.abs(difference) > 0) == 1


def test_box_must_exceed_stencil_degree():
    with pytest.raises(DomainError):
        apply_truncated(example1_stencil(), LatticeField.zeros(2))


def test_truncated_matrix_is_hermitian_and_matches_apply():
    stencil = example2_stencil(0.5, 0.6, 0.8)
    matrix = truncated_matrix(stencil, 5, lam=0.3)
    dense = matrix.toarray()
    assert dense.shape == (22, 22)
    assert np.allclose(dense, dense.conj().T)

    rng = np.random.default_rng(1)
    u = LatticeField(5, rng.normal(size=(11, 2)))
    product = (matrix @ u.values.reshape(-1)).reshape(11, 2)
    interior = apply_truncated(stencil, u, lam=0.3)
    assert np.allclose(product[1:-1], interior.values)


def test_field_shape_must_match_box():
    with pytest.raises(DimensionMismatchError):
        LatticeField((3,), np.zeros((5, 1)))


def test_shell_maxima_and_tail_radius():
    u = LatticeField.from_function(10, 1, lambda g: 0.1 ** abs(g[0]))
    shells = u.shell_maxima()
    assert shells[0] == pytest.approx(1.0)
    assert shells[3] == pytest.approx(1e-3)
    assert u.tail_radius(3e-5) == 4
