"""
Tests for Floquet-multiplier counting and band structures
"""

import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from services.dispersion import (
    branch_roots,
    dispersion_polynomial,
    dispersion_samples,
    example1_bands,
    example1_branch_count,
    example1_branches,
    example1_dispersion,
    example2_bands,
    multiplicity_1d,
    spectrum_bands,
)
from services.lattice_core import example1_stencil, example2_stencil, lattice_laplacian
from utils.errors import DomainError


@pytest.mark.parametrize("lam, expected", [(-2.5, 4), (0.0, 2), (5.0, 2), (7.0, 0), (-4.0, 0)])
def test_example1_multiplicity(lam, expected):
    count = multiplicity_1d(example1_stencil(), lam)
    assert not count.edge
    assert count.count == expected
    assert example1_branch_count(lam) == expected


def test_example1_top_edge_is_flagged():
    count = multiplicity_1d(example1_stencil(), 6.0)
    assert count.edge
    assert count.value == 'edge'


def test_dispersion_polynomial_degree():
    coefficients = dispersion_polynomial(example2_stencil(0.5, 0.6, 0.8), 0.1)
    assert coefficients.size == 5
    assert abs(coefficients[0]) == pytest.approx(1.0)
    assert abs(coefficients[-1]) == pytest.approx(1.0)


def test_multiplier_counting_is_one_dimensional():
    with pytest.raises(DomainError):
        dispersion_polynomial(lattice_laplacian(2), 0.0)


@given(lam=st.floats(min_value=-1.9, max_value=1.9))
def test_chain_has_two_multipliers_inside_the_band(lam):
    assert multiplicity_1d(lattice_laplacian(1), lam).count == 2


@given(lam=st.floats(min_value=2.1, max_value=50.0), sign=st.sampled_from([-1.0, 1.0]))
def test_chain_has_no_multipliers_in_the_gap(lam, sign):
    assert multiplicity_1d(lattice_laplacian(1), sign * lam).count == 0


@given(w=st.floats(min_value=2.01, max_value=100.0))
def test_branch_roots_pair_up(w):
    value = branch_roots(w)
    small, big = value.roots
    assert abs(small) < 1.0 < abs(big)
    assert small * big == pytest.approx(1.0)
    assert small + 1.0 / small == pytest.approx(w)


def test_example1_band_labels():
    report = example1_bands(samples=0)
    assert report.span() == [(-3.0, 6.0)]
    assert report.multiplicity_at(-2.5) == 4
    assert report.multiplicity_at(1.0) == 2
    assert report.multiplicity_at(6.5) == 0


def test_example2_bands_follow_closed_form():
    report = example2_bands(0.5, 0.6, 0.8, samples=30)
    assert report.span() == [(pytest.approx(-2.5), pytest.approx(3.5))]
    assert report.multiplicity_at(0.0) == 4
    assert report.multiplicity_at(3.0) == 2
    assert len(report.multiplicity) == 30
    sampled = spectrum_bands(example2_stencil(0.5, 0.6, 0.8), 256)
    for exact, estimate in zip(report.bands, sampled.bands):
        assert estimate.lo == pytest.approx(exact.lo, abs=1e-3)
        assert estimate.hi == pytest.approx(exact.hi, abs=1e-3)


def test_sampled_multiplicities_match_counting():
    report = example2_bands(0.5, 0.6, 0.8, samples=41)
    for lam, mult in zip(report.lambda_grid, report.multiplicity):
        if mult is not None:
            assert mult == multiplicity_1d(example2_stencil(0.5, 0.6, 0.8), lam).count


def test_square_lattice_band():
    report = spectrum_bands(lattice_laplacian(2))
    assert report.span() == [(pytest.approx(-4.0), pytest.approx(4.0))]
    assert report.witness(0.0) is not None
    assert report.witness(4.5) is None


def test_band_edges_are_polished():
    coarse = spectrum_bands(example1_stencil(), 64, refine=False).span()[0]
    assert coarse[0] > -3.0 + 1e-4
    lo, hi = spectrum_bands(example1_stencil(), 64).span()[0]
    assert lo == pytest.approx(-3.0, abs=1e-10)
    assert hi == pytest.approx(6.0, abs=1e-12)


def test_odd_grids_still_reach_k_pi():
    lo, hi = spectrum_bands(lattice_laplacian(1), 7, refine=False).span()[0]
    assert lo == pytest.approx(-2.0, abs=1e-12)
    assert hi == pytest.approx(2.0, abs=1e-12)


def test_dispersion_samples_cover_every_branch():
    rows = dispersion_samples(example2_stencil(0.0, 1.0, 0.0), 9)
    assert len(rows) == 18
    assert {row['branch'] for row in rows} == {0, 1}
    top = max(row['lambda'] for row in rows)
    assert top == pytest.approx(3.0)
    assert all(-math.pi <= row['k'] <= math.pi for row in rows)
    assert np.isfinite([row['lambda'] for row in rows]).all()


def test_example1_dispersion_curve_lies_on_a_branch():
    rows = example1_dispersion(50)
    assert len(rows) == 50
    for row in rows:
        w = 2.0 * math.cos(row['k'])
        assert min(abs(w - b) for b in example1_branches(row['lambda'])) < 1e-7
        assert row['multiplicity'] >= 2
