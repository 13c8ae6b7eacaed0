"""
Verification harness: residual studies, embedding witnesses, decay fits and
oracle comparisons collected into self-describing pass/fail reports.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from config.settings import Settings
from models.coupling import TwoGraphAngles
from models.greens import DecayFit
from models.lattice import LatticeField, PeriodicStencil, SiteDefect
from models.quantum import BILAYER_2D, CHAIN_1D, DIRICHLET, GridModel, normalize_bc
from models.report import SuiteReport, VerificationReport
from models.spectra import BandInterval
from services.coupling import continuum_witness, select_lambda0, theorem1_embed
from services.dispersion import spectrum_bands
from services.greens_defect import (
    brute_force_green,
    chain_green_closed_form,
    example1_defect,
    fit_decay,
    resolvent_delta,
    synth_defect,
)
from services.lattice_core import apply_truncated, example1_stencil, lattice_laplacian
from services.quantum_graph import (
    SIGN,
    chain1d_bound_state,
    chain1d_defect_check,
    grid2d_bound_state,
    grid2d_mirror_lift,
    grid2d_nu_root,
)
from utils.errors import DimensionMismatchError, DomainError, FermiLabError, UnknownCaseError

logger = logging.getLogger(__name__)

TREND_FLOOR = 1e-12


def _thresholds(overrides: Optional[Mapping[str, float]] = None) -> Dict[str, float]:
    merged = dict(Settings.THRESHOLDS)
    if overrides:
        merged.update({k: float(v) for k, v in overrides.items()})
    return merged


def _trend_ok(trend: Sequence[float], factor: float) -> bool:
    return all(b <= factor * max(a, TREND_FLOOR) for a, b in zip(trend, trend[1:]))


def _tails_grow(tails: Sequence[int]) -> bool:
    return len(tails) > 1 and all(b >= a for a, b in zip(tails, tails[1:])) and tails[-1] > tails[0]


def verify_combinatorial(stencil: PeriodicStencil, defect: Optional[SiteDefect], u: LatticeField, lam: float,
                         boxes: Sequence[int], case_id: str = 'combinatorial',
                         thresholds: Optional[Mapping[str, float]] = None, require_embedding: bool = True,
                         oracle_diff: Optional[float] = None, witness: Optional[BandInterval] = None,
                         expect_pass: bool = True) -> VerificationReport:
    """
    Check that (A + V) u = lambda u on growing boxes and that u is a genuine bound state.

    Residuals are relative to the sup norm of u. The decay fit discounts the
    r^{-(n-1)/2} prefactor of n-dimensional lattice resolvents.
    """
    if u.dim != stencil.dim or u.fiber != stencil.fiber:
        raise DimensionMismatchError(
            f"field (dim={u.dim}, fiber={u.fiber}) does not match stencil (dim={stencil.dim}, fiber={stencil.fiber})")
    if defect is not None and (defect.dim, defect.fiber) != (stencil.dim, stencil.fiber):
        raise DimensionMismatchError("defect does not match the stencil")
    limits = _thresholds(thresholds)
    boxes = sorted(int(r) for r in boxes)
    if not boxes or boxes[-1] > min(u.box):
        raise DomainError(f"boxes {boxes} must be non-empty and fit inside the field box {u.box}")

    scale = u.sup_norm() or 1.0
    trend = [apply_truncated(stencil, u.crop(r), defect, lam).sup_norm() / scale for r in boxes]
    tails = [u.crop(r).tail_radius(Settings.TAIL_TOL) for r in boxes]
    decay: Optional[DecayFit] = None
    try:
        decay = fit_decay(u, degree=stencil.degree, algebraic=0.5 * (stencil.dim - 1))
    except FermiLabError as e:
        logger.warning(f"[VERIFY] {case_id}: decay fit failed: {e}")

    if require_embedding and witness is None:
        witness = continuum_witness(stencil, lam)
    checks = {
        'residual': trend[-1] <= limits['residual_combinatorial'],
        'residual_trend': _trend_ok(trend, limits['trend_factor']),
        'decay_r2': decay is not None and decay.r2 >= limits['decay_r2_min'],
        'unbounded_support': _tails_grow(tails),
    }
    if require_embedding:
        checks['embedded'] = witness is not None
    if oracle_diff is not None:
        checks['oracle'] = oracle_diff <= limits['oracle_rel']
    logger.info(f"[VERIFY] {case_id}: residual trend {['%.2e' % r for r in trend]}, tails {tails}")
    return VerificationReport(case_id, 'combinatorial', trend[-1], trend, witness is not None, witness, decay,
                              oracle_diff, tails, limits, checks, expect_pass)


def verify_quantum(model: GridModel, state, trend: Optional[Sequence[float]] = None,
                   case_id: str = 'quantum', thresholds: Optional[Mapping[str, float]] = None,
                   expect_pass: bool = True) -> VerificationReport:
    """
    Vertex-condition residuals, decay, support growth and the embedding verdict of a quantum-graph bound state.

    For the grid the half-graph state is also lifted to the bilayer and the
    reflection class (odd for Dirichlet, even for Neumann) is checked.
    """
    limits = _thresholds(thresholds)
    trend = list(trend) if trend else [state.residual_vertex]
    details: Dict[str, Any] = {'mu': state.mu, 'nu': state.nu, 'V0': state.V0}
    if model.which == CHAIN_1D:
        limit = limits['residual_chain']
        defect = chain1d_defect_check(state)
        details.update(defect)
        checks = {
            'residual': state.residual_vertex <= limit,
            'decay_ratio': state.decay_ratio_error <= limit,
            'reflection': state.reflection_error <= limit,
            'antisymmetry': state.antisymmetry_error <= limit,
            'defect_edge': defect['ode_residual'] <= limit,
            'defect_vertices': max(defect['upper_vertex_mismatch'], defect['lower_vertex_mismatch'],
                                   defect['flux_mismatch']) <= limit,
        }
        tails: List[int] = []
    else:
        limit = limits['residual_grid']
        lift = grid2d_mirror_lift(state)
        details.update({'defect_remainder': state.defect_remainder, 'predicted_alpha': state.predicted_alpha,
                        'lift': lift.to_dict()})
        rate_error = math.inf
        if state.decay is not None and state.predicted_alpha > 0:
            rate_error = abs(state.decay.alpha - state.predicted_alpha) / state.predicted_alpha
        details['decay_rate_error'] = rate_error
        checks = {
            'residual': state.residual_vertex <= limit,
            'decay_rate': rate_error <= limits['decay_rate_rel'],
            'unbounded_support': _tails_grow(state.tails),
            'reflection_class': lift.sign == SIGN[normalize_bc(state.bc)],
            'lifted_residual': lift.residual_lower <= limit,
            'midpoint': max(lift.midpoint_value_jump, lift.midpoint_derivative_jump) <= limit,
        }
        tails = list(state.tails)
    checks['residual_trend'] = _trend_ok(trend, limits['trend_factor'])
    checks['decay_r2'] = state.decay is not None and state.decay.r2 >= limits['decay_r2_min']
    checks['embedded'] = state.embedded and state.witness is not None
    logger.info(f"[VERIFY] {case_id}: vertex residual {state.residual_vertex:.2e}, embedded={state.embedded}")
    return VerificationReport(case_id, model.which, state.residual_vertex, trend, state.embedded, state.witness,
                              state.decay, None, tails, limits, checks, expect_pass, details=details)


DEFAULT_SUITE: Dict[str, Any] = {
    'thresholds': {},
    'cases': [
        {'id': 'ex1-alpha-ln2', 'kind': 'ex1', 'params': {'alpha': math.log(2.0)}, 'expect': 'pass'},
        {'id': 'ex1-v0-shift', 'kind': 'ex1', 'params': {'alpha': math.log(2.0), 'V0_shift': 0.1},
         'expect': 'fail'},
        {'id': 'green-chain', 'kind': 'green', 'params': {'dim': 1, 'lambda': -3.0}, 'expect': 'pass'},
        {'id': 'green-square', 'kind': 'green', 'params': {'dim': 2, 'lambda': -5.0}, 'expect': 'pass'},
        {'id': 'theorem1-variant1', 'kind': 'theorem1', 'params': {'variant': 1}, 'expect': 'pass'},
        {'id': 'theorem1-variant2', 'kind': 'theorem1', 'params': {'variant': 2}, 'expect': 'pass'},
        {'id': 'chain1d-mu-2pi', 'kind': 'chain1d', 'params': {'mu': 2.0 * math.pi + 0.1}, 'expect': 'pass'},
        {'id': 'chain1d-nu-shift', 'kind': 'chain1d', 'params': {'mu': 2.0 * math.pi + 0.1, 'nu_shift': 1e-2},
         'expect': 'fail'},
        {'id': 'grid2d-dirichlet', 'kind': 'grid2d', 'params': {'mu': 0.5, 'bc': 'dirichlet'}, 'expect': 'pass'},
        {'id': 'grid2d-neumann', 'kind': 'grid2d', 'params': {'mu': 0.5 + math.pi, 'bc': 'neumann'},
         'expect': 'pass'},
        {'id': 'grid2d-nu-shift', 'kind': 'grid2d', 'params': {'mu': 0.5, 'bc': 'dirichlet', 'nu_shift': 1e-2},
         'expect': 'fail'},
    ],
}


class VerificationHarness:
    """Registry of verification case kinds and a parallel runner for suites of cases."""

    def __init__(self, thresholds: Optional[Mapping[str, float]] = None, workers: Optional[int] = None):
        self.thresholds = _thresholds(thresholds)
        self.workers = Settings.SUITE_WORKERS if workers is None else max(1, int(workers))
        self.cases: Dict[str, Callable[[str, Dict[str, Any], bool], VerificationReport]] = {}
        self._setup_cases()

    def _setup_cases(self):
        """Register the case kinds understood by suite configurations."""
        self.register('ex1', self.ex1_case)
        self.register('green', self.green_case)
        self.register('theorem1', self.theorem1_case)
        self.register('chain1d', self.chain1d_case)
        self.register('grid2d', self.grid2d_case)

    def register(self, kind: str, handler: Callable[[str, Dict[str, Any], bool], VerificationReport]):
        self.cases[kind] = handler

    def ex1_case(self, case_id: str, params: Dict[str, Any], expect_pass: bool) -> VerificationReport:
        alpha = float(params.get('alpha', math.log(2.0)))
        box = int(params.get('box', 50))
        result = example1_defect(alpha, box)
        defect = result.defect
        shift = float(params.get('V0_shift', 0.0))
        if shift:
            defect = defect.shifted((0,), shift)
        report = verify_combinatorial(example1_stencil(), defect, result.v, result.lam,
                                      params.get('boxes', (20, 30, 40)), case_id, self.thresholds,
                                      expect_pass=expect_pass)
        report.kind = 'ex1'
        report.details.update({'lambda': result.lam, 'V0': result.V0, 'V1': result.V1, 'V0_shift': shift})
        return report

    def green_case(self, case_id: str, params: Dict[str, Any], expect_pass: bool) -> VerificationReport:
        dim = int(params.get('dim', 1))
        lam = float(params.get('lambda', -3.0))
        quad_n = int(params.get('quad_n', Settings.QUAD_N))
        box = int(params.get('box', 32 if dim == 1 else 40))
        stencil = lattice_laplacian(dim)
        result = resolvent_delta(stencil, lam, quad_n, box)
        defect = synth_defect(result, stencil)
        shift = float(params.get('V0_shift', 0.0))
        if shift:
            defect = defect.shifted((0,) * dim, shift)
        if dim == 1:
            exact = chain_green_closed_form(lam)
            oracle = abs(result.u0.real - exact) / abs(exact)
        else:
            reference = brute_force_green(stencil, lam, int(params.get('big_box', 60)))
            inner = tuple(r // 4 for r in result.u.box)
            difference = result.u.crop(inner).values - reference.crop(inner).values
            oracle = float(np.abs(difference).max() / np.abs(result.u.crop(inner).values).max())
        report = verify_combinatorial(stencil, defect, result.u, lam, params.get('boxes', (10, 20, 30)), case_id,
                                      self.thresholds, require_embedding=False, oracle_diff=oracle,
                                      expect_pass=expect_pass)
        report.kind = 'green'
        report.details.update({'u0': result.u0, 'V0': result.V0, 'quad_error': result.quad_error})
        return report

    def theorem1_case(self, case_id: str, params: Dict[str, Any], expect_pass: bool) -> VerificationReport:
        dim = int(params.get('dim', 2))
        lam = float(params.get('lambda', -5.0))
        quad_n = int(params.get('quad_n', Settings.GRID_QUAD_N))
        box = int(params.get('box', 40))
        base = lattice_laplacian(dim)
        result = resolvent_delta(base, lam, quad_n, box)
        defect = synth_defect(result)
        band = spectrum_bands(base).span()[0]
        lambda0 = float(params.get('lambda0', select_lambda0(lam, band)))
        angles = TwoGraphAngles(float(params.get('theta', math.pi / 3)), float(params.get('phi', 0.25)), lambda0)
        embedding = theorem1_embed(base, defect, result.u, lam, angles, int(params.get('variant', 1)))
        report = verify_combinatorial(embedding.operator, embedding.defect, embedding.state, embedding.eigenvalue,
                                      params.get('boxes', (20, 30, 40)), case_id, self.thresholds,
                                      witness=embedding.witness, expect_pass=expect_pass)
        report.kind = 'theorem1'
        report.details.update(embedding.to_dict())
        return report

    def chain1d_case(self, case_id: str, params: Dict[str, Any], expect_pass: bool) -> VerificationReport:
        mu = float(params.get('mu', 2.0 * math.pi + 0.1))
        boxes = sorted(int(r) for r in params.get('boxes', (10, 15, 20)))
        shift = float(params.get('nu_shift', 0.0))
        nu = None
        if shift:
            nu = chain1d_bound_state(mu, boxes[-1]).nu + shift
        states = [chain1d_bound_state(mu, r, nu=nu) for r in boxes]
        report = verify_quantum(GridModel(CHAIN_1D), states[-1], [s.residual_vertex for s in states], case_id,
                                self.thresholds, expect_pass)
        report.details['nu_shift'] = shift
        return report

    def grid2d_case(self, case_id: str, params: Dict[str, Any], expect_pass: bool) -> VerificationReport:
        mu = float(params.get('mu', 0.5))
        bc = normalize_bc(params.get('bc', DIRICHLET))
        quad_n = int(params.get('quad_n', Settings.GRID_QUAD_N))
        boxes = sorted(int(r) for r in params.get('boxes', (10, 15, 20)))
        nu, _ = grid2d_nu_root(mu, bc, params.get('branch'), quad_n)
        shift = float(params.get('nu_shift', 0.0))
        nu += shift
        states = [grid2d_bound_state(mu, bc, r, quad_n, nu=nu) for r in boxes]
        report = verify_quantum(GridModel(BILAYER_2D, bc), states[-1], [s.residual_vertex for s in states],
                                case_id, self.thresholds, expect_pass)
        report.details['nu_shift'] = shift
        return report

    def run_case(self, case: Mapping[str, Any]) -> VerificationReport:
        """Run one case descriptor; library errors become a failed report carrying the message."""
        case_id = str(case.get('id', case.get('kind')))
        kind = case.get('kind')
        expect_pass = str(case.get('expect', 'pass')).lower() != 'fail'
        handler = self.cases.get(kind)
        if handler is None:
            raise UnknownCaseError(f"unknown case kind '{kind}' in case '{case_id}'")
        logger.info(f"[VERIFY] Running {case_id} ({kind})")
        try:
            report = handler(case_id, dict(case.get('params') or {}), expect_pass)
        except FermiLabError as e:
            logger.warning(f"[VERIFY] {case_id} raised {type(e).__name__}: {e}")
            report = VerificationReport(case_id, kind, math.inf, thresholds=self.thresholds,
                                        expect_pass=expect_pass, error=f"{type(e).__name__}: {e}")
        status = 'PASS' if report.passed else 'FAIL'
        logger.info(f"[VERIFY] {case_id}: {status} (expected {'pass' if expect_pass else 'fail'})")
        return report

    def run(self, cases: Sequence[Mapping[str, Any]]) -> SuiteReport:
        """Run cases in parallel and merge the reports by case id."""
        unknown = [c.get('kind') for c in cases if c.get('kind') not in self.cases]
        if unknown:
            raise UnknownCaseError(f"unknown case kinds: {sorted(set(map(str, unknown)))}")
        if not cases:
            return SuiteReport([])
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            reports = list(pool.map(self.run_case, cases))
        reports.sort(key=lambda r: r.case_id)
        return SuiteReport(reports)


def suite_run(config: Optional[Mapping[str, Any]] = None, workers: Optional[int] = None) -> SuiteReport:
    """Run a suite configuration ({"thresholds": {...}, "cases": [...]}); None runs the default suite."""
    config = DEFAULT_SUITE if config is None else config
    harness = VerificationHarness(config.get('thresholds'), workers)
    suite = harness.run(list(config.get('cases') or []))
    logger.info(f"[VERIFY] Suite finished: {sum(r.passed for r in suite.reports)}/{len(suite.reports)} passed, "
                f"ok={suite.ok}")
    return suite
