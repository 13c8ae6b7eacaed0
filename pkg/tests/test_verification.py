"""
Tests for the verification harness and its negative controls
"""

import math

import pytest

from models.quantum import CHAIN_1D, GridModel
from services.greens_defect import example1_defect
from services.lattice_core import example1_stencil, lattice_laplacian
from services.quantum_graph import chain1d_bound_state
from services.verification import DEFAULT_SUITE, VerificationHarness, suite_run, verify_combinatorial, verify_quantum
from utils.errors import DimensionMismatchError, DomainError, UnknownCaseError
from utils.serialization import load_suite_config


def test_example1_passes_every_check():
    result = example1_defect(math.log(2.0), 50)
    report = verify_combinatorial(example1_stencil(), result.defect, result.v, result.lam, (20, 30, 40), 'ex1')
    assert report.passed
    assert report.embedded
    assert report.checks['unbounded_support']
    assert report.tails == [20, 30, 40]
    assert report.decay.alpha == pytest.approx(math.log(2.0), rel=1e-8)


def test_shifted_defect_fails_the_residual():
    result = example1_defect(math.log(2.0), 50)
    defect = result.defect.shifted((0,), 0.1)
    report = verify_combinatorial(example1_stencil(), defect, result.v, result.lam, (20, 30, 40), 'shifted',
                                  expect_pass=False)
    assert not report.checks['residual']
    assert report.residual_interior == pytest.approx(0.1)
    assert report.as_expected


def test_boxes_must_fit_the_field():
    result = example1_defect(math.log(2.0), 20)
    with pytest.raises(DomainError):
        verify_combinatorial(example1_stencil(), result.defect, result.v, result.lam, (10, 30))


def test_field_must_match_the_stencil():
    result = example1_defect(math.log(2.0), 20)
    with pytest.raises(DimensionMismatchError):
        verify_combinatorial(lattice_laplacian(2), None, result.v, result.lam, (10,))


def test_threshold_overrides_are_applied():
    result = example1_defect(math.log(2.0), 50)
    report = verify_combinatorial(example1_stencil(), result.defect, result.v, result.lam, (20, 30, 40),
                                  thresholds={'decay_r2_min': 1.5})
    assert report.thresholds['decay_r2_min'] == 1.5
    assert not report.checks['decay_r2']
    assert not report.passed


def test_chain_quantum_report():
    states = [chain1d_bound_state(2.0 * math.pi + 0.1, r) for r in (10, 20)]
    report = verify_quantum(GridModel(CHAIN_1D), states[-1], [s.residual_vertex for s in states], 'chain')
    assert report.passed
    assert report.kind == CHAIN_1D
    assert report.details['ode_residual'] < 1e-10


def test_harness_runs_quick_suite(data_dir):
    suite = suite_run(load_suite_config(data_dir / 'suite_quick.json'), workers=2)
    assert suite.ok
    assert suite.exit_code == 0
    assert suite.controls_ok
    assert [r.case_id for r in suite.reports] == sorted(r.case_id for r in suite.reports)
    failing = {r.case_id for r in suite.reports if not r.passed}
    assert failing == {'ex1-v0-shift', 'chain1d-nu-shift'}


def test_unexpected_outcome_sets_exit_code():
    config = {'cases': [{'id': 'wrong-expectation', 'kind': 'ex1', 'params': {'V0_shift': 0.1}, 'expect': 'pass'}]}
    suite = suite_run(config, workers=1)
    assert not suite.ok
    assert suite.exit_code == 1
    assert suite.to_dict()['unexpected'] == ['wrong-expectation']


def test_library_errors_do_not_count_as_negative_controls():
    config = {'cases': [{'id': 'bad-alpha', 'kind': 'ex1', 'params': {'alpha': 5.0}, 'expect': 'fail'}]}
    suite = suite_run(config, workers=1)
    report = suite.reports[0]
    assert report.error.startswith('DomainError')
    assert not report.passed
    assert not report.as_expected
    assert suite.to_dict()['unexpected'] == ['bad-alpha']
    assert not suite.controls_ok
    assert suite.exit_code == 0


def test_negative_control_needs_a_clear_residual():
    config = {'cases': [{'id': 'tiny-shift', 'kind': 'ex1', 'params': {'V0_shift': 1e-7}, 'expect': 'fail'},
                        {'id': 'big-shift', 'kind': 'ex1', 'params': {'V0_shift': 0.1}, 'expect': 'fail'}]}
    suite = suite_run(config, workers=1)
    big, tiny = suite.reports
    assert not tiny.passed
    assert tiny.residual_interior < 1e-3
    assert not tiny.as_expected
    assert big.residual_interior >= 1e-3
    assert big.as_expected
    assert suite.to_dict()['unexpected'] == ['tiny-shift']


def test_exit_code_follows_the_expected_passes():
    controls_only = suite_run({'cases': [{'id': 'neg', 'kind': 'ex1', 'params': {'V0_shift': 1e-7},
                                          'expect': 'fail'}]}, workers=1)
    assert controls_only.exit_code == 0
    mixed = suite_run({'cases': [{'id': 'good', 'kind': 'ex1', 'expect': 'pass'},
                                 {'id': 'bad', 'kind': 'ex1', 'params': {'V0_shift': 0.1}, 'expect': 'pass'}]},
                      workers=1)
    assert not mixed.ok
    assert mixed.exit_code == 1
    assert mixed.to_dict()['unexpected'] == ['bad']


def test_unknown_kind_is_rejected():
    harness = VerificationHarness()
    with pytest.raises(UnknownCaseError):
        harness.run([{'id': 'x', 'kind': 'nonsense'}])


def test_custom_case_kinds_can_be_registered():
    harness = VerificationHarness(workers=1)

    def always_fails(case_id, params, expect_pass):
        raise DomainError("not implemented for this input")

    harness.register('custom', always_fails)
    suite = harness.run([{'id': 'c', 'kind': 'custom', 'expect': 'fail'}])
    assert suite.reports[0].error.startswith('DomainError')
    assert suite.to_dict()['unexpected'] == ['c']


def test_default_suite_covers_every_kind():
    kinds = {case['kind'] for case in DEFAULT_SUITE['cases']}
    assert kinds == set(VerificationHarness().cases)
    assert sum(1 for case in DEFAULT_SUITE['cases'] if case['expect'] == 'fail') == 3


@pytest.mark.slow
def test_default_suite_is_as_expected():
    suite = suite_run()
    assert suite.ok
    assert suite.controls_ok, suite.to_dict()['unexpected']
