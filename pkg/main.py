#!/usr/bin/env python3
"""
FermiLab - embedded eigenvalues of periodic lattice and quantum-graph operators

Command-line front end: every construction and verification is a
subcommand that prints one JSON document (or CSV with --format csv) on
stdout. Diagnostics go to stderr.

Exit codes: 0 success, 1 verification failed, 2 domain error,
3 convergence error, 64 usage error.
"""

import sys
import argparse
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.settings import Settings
from models.coupling import TwoGraphAngles
from models.lattice import LatticeField
from models.quantum import SYMMETRIC, ANTISYMMETRIC, normalize_bc
from services.coupling import embed_coupled, rabi_scale, select_lambda0, theorem1_embed
from services.dispersion import (
    dispersion_samples,
    example1_bands,
    example2_bands,
    sample_multiplicities,
    spectrum_bands,
)
from services.greens_defect import brute_force_green, example1_defect, fit_decay, resolvent_delta, synth_defect
from services.lattice_core import example2_stencil
from services.quantum_graph import (
    chain1d_bands,
    chain1d_bound_state,
    chain1d_defect_check,
    chain1d_dispersion_samples,
    grid2d_bands,
    grid2d_bound_state,
    grid2d_mirror_lift,
)
from services.verification import suite_run
from utils.errors import ConvergenceError, DomainError, FermiLabError
from utils.helpers import emit, render_csv, render_json, setup_logging
from utils.serialization import (
    dump_stencil,
    field_rows,
    load_coupling,
    load_coupling_matrix,
    load_stencil,
    load_suite_config,
)

logger = logging.getLogger(__name__)

USAGE_EXIT = 64


@dataclass
class CommandOutput:
    """Result of one subcommand: the JSON payload, optional CSV rows and the exit code."""

    payload: Dict[str, Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    columns: Optional[List[str]] = None
    exit_code: int = 0


class CliParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit status 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _decay_or_none(u: LatticeField, **kwargs):
    try:
        return fit_decay(u, **kwargs)
    except DomainError as e:
        logger.warning(f"[CLI] Decay fit skipped: {e}")
        return None


def ex1_command(args) -> CommandOutput:
    result = example1_defect(args.alpha, args.box or 50)
    bands = example1_bands(args.samples)
    payload = result.to_dict()
    payload['bands'] = bands.to_dict()
    payload['decay'] = _decay_or_none(result.v, degree=2)
    rows = [{'g': g[0], 'v': float(result.v.at(g)[0].real)} for g in result.v.sites()]
    return CommandOutput(payload, rows)


def ex2_command(args) -> CommandOutput:
    bands = example2_bands(args.a, args.b, args.c, samples=args.samples)
    payload = {'a': args.a, 'b': args.b, 'c': args.c, 'bands': bands.to_dict()}
    if args.save_stencil:
        dump_stencil(example2_stencil(args.a, args.b, args.c), args.save_stencil)
        payload['stencil_file'] = args.save_stencil
    rows = [{'lambda': x, 'multiplicity': 'edge' if m is None else m}
            for x, m in zip(bands.lambda_grid, bands.multiplicity)]
    return CommandOutput(payload, rows)


def ex3_command(args) -> CommandOutput:
    if args.dispersion:
        rows = chain1d_dispersion_samples(args.samples, args.mu_max)
        return CommandOutput({'dispersion': rows}, rows, ['parity', 'mu', 'lambda', 'k'])
    state = chain1d_bound_state(args.mu, args.box or 20, args.branch, args.nu)
    payload = state.to_dict()
    payload['defect'] = chain1d_defect_check(state)
    mu_max = max(4.0 * math.pi, args.mu + math.pi)
    payload['bands'] = {'sym': chain1d_bands(SYMMETRIC, mu_max).to_dict(),
                        'anti': chain1d_bands(ANTISYMMETRIC, mu_max).to_dict()}
    return CommandOutput(payload, state.coefficients.rows())


def _eigenpair(stencil, lam: Optional[float], quad_n: Optional[int], box: Optional[int]):
    band = spectrum_bands(stencil).span()[0]
    if lam is None:
        lam = band[0] - 1.0
        logger.info(f"[CLI] Using lambda={lam} below the spectrum")
    result = resolvent_delta(stencil, lam, quad_n, box)
    return result, synth_defect(result, stencil), band


def coupled_command(args) -> CommandOutput:
    K = None
    lambda0 = args.lambda0
    if args.coupling:
        if args.K:
            raise DomainError("--K cannot be combined with --coupling")
        spec = load_coupling(args.coupling)
        base, K = spec.base, spec.K
        if lambda0 is None:
            lambda0 = rabi_scale(spec)
    else:
        base = load_stencil(args.stencil)
        if args.K:
            K = load_coupling_matrix(args.K)
    result, defect, band = _eigenpair(base, args.lam, args.quad_n, args.box)
    if lambda0 is None:
        lambda0 = select_lambda0(result.lam, band)
    if K is not None:
        embedding = embed_coupled(base, defect, result.u, result.lam, K, lambda0, args.index, args.variant)
    else:
        angles = TwoGraphAngles(args.theta, args.phi, lambda0)
        embedding = theorem1_embed(base, defect, result.u, result.lam, angles, args.variant)
    payload = embedding.to_dict()
    payload.update({'lambda': result.lam, 'u0': result.u0, 'V0': result.V0, 'stencil': base.name})
    return CommandOutput(payload, field_rows(embedding.state.values, embedding.state.box))


def green_command(args) -> CommandOutput:
    stencil = load_stencil(args.stencil)
    result = resolvent_delta(stencil, args.lam, args.quad_n, args.box, args.component)
    defect = synth_defect(result, stencil)
    payload = result.to_dict()
    payload['stencil'] = stencil.name
    payload['defect'] = [[list(g), v] for g, v in sorted(defect.values.items())]
    payload['decay'] = _decay_or_none(result.u, degree=stencil.degree, algebraic=0.5 * (stencil.dim - 1))
    if args.oracle_box:
        reference = brute_force_green(stencil, args.lam, args.oracle_box, args.component)
        inner = tuple(max(r // 4, 1) for r in result.u.box)
        diff = abs(result.u.crop(inner).values - reference.crop(inner).values).max()
        payload['oracle_diff'] = float(diff / abs(result.u.crop(inner).values).max())
    return CommandOutput(payload, field_rows(result.u.values, result.u.box))


def grid2d_command(args) -> CommandOutput:
    bc = normalize_bc(args.bc)
    state = grid2d_bound_state(args.mu, bc, args.box or 20, args.quad_n, args.nu, args.branch)
    payload = state.to_dict()
    mu_max = max(4.0 * math.pi, args.mu + math.pi)
    companion = 'neumann' if bc == 'dirichlet' else 'dirichlet'
    payload['bands'] = {bc: grid2d_bands(bc, mu_max).to_dict(), companion: grid2d_bands(companion, mu_max).to_dict()}
    payload['lift'] = grid2d_mirror_lift(state).to_dict()
    return CommandOutput(payload, state.coefficients.rows())


def bands_command(args) -> CommandOutput:
    stencil = load_stencil(args.stencil)
    report = spectrum_bands(stencil, args.n_k)
    payload: Dict[str, Any] = {'stencil': stencil.name, 'dim': stencil.dim, 'fiber': stencil.fiber}
    if stencil.dim == 1:
        lo, hi = report.span()[0][0], report.span()[-1][1]
        margin = 0.1 * (hi - lo) + 1.0
        step = (hi - lo + 2.0 * margin) / max(args.samples - 1, 1)
        sample_multiplicities(report, stencil, [lo - margin + i * step for i in range(args.samples)])
        rows = dispersion_samples(stencil, args.samples)
        payload['dispersion'] = rows
    else:
        rows = [piece.to_dict() for piece in report.intervals]
    payload['bands'] = report.to_dict()
    return CommandOutput(payload, rows)


def verify_command(args) -> CommandOutput:
    config = load_suite_config(args.config) if args.config else None
    suite = suite_run(config, args.workers)
    rows = [{'case_id': r.case_id, 'kind': r.kind, 'pass': r.passed, 'expect': 'pass' if r.expect_pass else 'fail',
             'as_expected': r.as_expected, 'residual': r.residual_interior} for r in suite.reports]
    return CommandOutput(suite.to_dict(), rows, exit_code=suite.exit_code)


def build_parser() -> CliParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--format', choices=('json', 'csv'), default='json', help='Output format')
    common.add_argument('--output', default=None, help='Write the document to this path instead of stdout')
    common.add_argument('--quad-n', dest='quad_n', type=int, default=None, help='Quadrature points per axis')
    common.add_argument('--box', type=int, default=None, help='Half-width of the truncated lattice box')
    common.add_argument('--log-level', dest='log_level', default=None, help='Logging level (default from env)')

    parser = CliParser(prog='fermilab', description='Embedded eigenvalues of periodic operators')
    subparsers = parser.add_subparsers(dest='command', parser_class=CliParser)
    subparsers.required = True

    ex1 = subparsers.add_parser('ex1', parents=[common], help='Closed-form defect of the fourth-order chain')
    ex1.add_argument('--alpha', type=float, default=math.log(2.0))
    ex1.add_argument('--samples', type=int, default=200)
    ex1.set_defaults(handler=ex1_command)

    ex2 = subparsers.add_parser('ex2', parents=[common], help='Bands of two coupled chains')
    ex2.add_argument('--a', type=float, required=True)
    ex2.add_argument('--b', type=float, required=True)
    ex2.add_argument('--c', type=float, required=True)
    ex2.add_argument('--samples', type=int, default=100)
    ex2.add_argument('--save-stencil', dest='save_stencil', default=None, help='Also write the stencil to this file')
    ex2.set_defaults(handler=ex2_command)

    ex3 = subparsers.add_parser('ex3', parents=[common], help='Bound state of the decorated chain')
    ex3.add_argument('--mu', type=float, default=2.0 * math.pi + 0.1)
    ex3.add_argument('--nu', type=float, default=None, help='Override the defect parameter')
    ex3.add_argument('--branch', type=int, default=None)
    ex3.add_argument('--dispersion', action='store_true', help='Emit (mu, k) dispersion samples instead')
    ex3.add_argument('--samples', type=int, default=400)
    ex3.add_argument('--mu-max', dest='mu_max', type=float, default=4.0 * math.pi)
    ex3.set_defaults(handler=ex3_command)

    coupled = subparsers.add_parser('coupled', parents=[common], help='Lift a defect eigenpair to coupled copies')
    source = coupled.add_mutually_exclusive_group(required=True)
    source.add_argument('--stencil', help='Base stencil file')
    source.add_argument('--coupling', help='Coupling descriptor (base stencil, rabi scale and K)')
    coupled.add_argument('--K', default=None, help='JSON file with an m x m Hermitian coupling matrix')
    coupled.add_argument('--theta', type=float, default=math.pi / 3)
    coupled.add_argument('--phi', type=float, default=0.0)
    coupled.add_argument('--lambda0', type=float, default=None)
    coupled.add_argument('--variant', type=int, choices=(1, 2), default=1)
    coupled.add_argument('--index', type=int, default=0, help='Eigenvector of K carrying the state')
    coupled.add_argument('--lambda', dest='lam', type=float, default=None, help='Defect energy (below the bands)')
    coupled.set_defaults(handler=coupled_command)

    green = subparsers.add_parser('green', parents=[common], help="Lattice Green's function and its defect")
    green.add_argument('--stencil', required=True)
    green.add_argument('--lambda', dest='lam', type=float, required=True)
    green.add_argument('--component', type=int, default=0)
    green.add_argument('--oracle-box', dest='oracle_box', type=int, default=None,
                       help='Compare with a sparse solve on this box')
    green.set_defaults(handler=green_command)

    grid2d = subparsers.add_parser('grid2d', parents=[common], help='Bound state of the bilayer grid')
    grid2d.add_argument('--mu', type=float, required=True)
    grid2d.add_argument('--bc', default='dirichlet')
    grid2d.add_argument('--nu', type=float, default=None, help='Override the defect parameter')
    grid2d.add_argument('--branch', type=int, default=None)
    grid2d.set_defaults(handler=grid2d_command)

    bands = subparsers.add_parser('bands', parents=[common], help='Band structure of a stencil file')
    bands.add_argument('--stencil', required=True)
    bands.add_argument('--samples', type=int, default=400)
    bands.add_argument('--n-k', dest='n_k', type=int, default=None)
    bands.set_defaults(handler=bands_command)

    verify = subparsers.add_parser('verify', parents=[common], help='Run a verification suite')
    verify.add_argument('--config', default=None, help='Suite JSON (default: built-in suite)')
    verify.add_argument('--workers', type=int, default=None)
    verify.set_defaults(handler=verify_command)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the application."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE_EXIT

    setup_logging(args.log_level or Settings.LOG_LEVEL, Settings.LOG_FILE)
    logger.info(f"[CLI] Running '{args.command}'")

    try:
        output = args.handler(args)
    except DomainError as e:
        logger.error(f"[CLI] Domain error: {e}")
        return e.exit_code
    except ConvergenceError as e:
        logger.error(f"[CLI] Convergence error: {e}")
        return e.exit_code
    except FermiLabError as e:
        logger.error(f"[CLI] {type(e).__name__}: {e}")
        return e.exit_code

    if args.format == 'csv':
        text = render_csv(output.rows, output.columns)
    else:
        text = render_json(output.payload)
    emit(text, args.output)
    return output.exit_code


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
