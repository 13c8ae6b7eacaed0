"""
Lattice Green's functions and the single-site defects built from them.

For lambda outside the spectrum, u = (A - lambda)^{-1} delta is computed by
trapezoidal quadrature of the inverse Floquet transform; the defect
V(0) = -1/u(0) then makes u an eigenfunction of A + V with eigenvalue lambda.
"""

import logging
import math
import warnings
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from config.settings import Settings
from models.greens import DecayFit, Example1Defect, GreensResult, SupportVerdict
from models.lattice import LatticeField, PeriodicStencil, SiteDefect
from services.dispersion import multiplicity_1d
from services.lattice_core import apply_truncated, example1_stencil, symbol_on_torus, truncated_matrix
from utils.errors import (
    DecayFitError,
    DegenerateDefectError,
    DomainError,
    HypothesisViolationError,
    QuadratureError,
    SingularSystemError,
    SpectralProximityError,
)
from utils.helpers import cyclic_index

logger = logging.getLogger(__name__)

UNDERFLOW = 1e-300
GUARD_FACTOR = 4
GUARD_POINT_CAP = 2 ** 24
GUARD_CHUNK = 2 ** 18


def _as_box(stencil: PeriodicStencil, box: Union[int, Sequence[int]]) -> Tuple[int, ...]:
    if isinstance(box, (int, np.integer)):
        return (int(box),) * stencil.dim
    return tuple(int(r) for r in box)


def _torus_nodes(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


def min_abs_det(stencil: PeriodicStencil, lam: float, n_guard: int) -> float:
    """min over a uniform k-grid of |det(A(e^{ik}) - lambda)|, evaluated in slabs along the first axis."""
    nodes = _torus_nodes(n_guard)
    rows_per_chunk = max(1, GUARD_CHUNK // max(1, n_guard ** (stencil.dim - 1)))
    shift = lam * np.eye(stencil.fiber)
    best = np.inf
    for start in range(0, n_guard, rows_per_chunk):
        axes = [nodes[start:start + rows_per_chunk]] + [nodes] * (stencil.dim - 1)
        dets = np.linalg.det(symbol_on_torus(stencil, axes) - shift)
        best = min(best, float(np.abs(dets).min()))
    return best


def guard_spectrum(stencil: PeriodicStencil, lam: float, quad_n: int, gap_tol: Optional[float] = None) -> float:
    """Refuse energies inside or too near the spectrum; returns the min|det| proxy."""
    gap_tol = Settings.GAP_TOL if gap_tol is None else gap_tol
    if stencil.dim == 1:
        count = multiplicity_1d(stencil, lam)
        if count.count > 0 or count.edge:
            raise SpectralProximityError(f"lambda={lam} lies in the spectrum of '{stencil.name}'")
    n_guard = GUARD_FACTOR * quad_n
    cap = int(GUARD_POINT_CAP ** (1.0 / stencil.dim))
    if n_guard > cap:
        logger.debug(f"[GREEN] Guard grid capped at {cap} points per axis")
        n_guard = max(quad_n, cap)
    proxy = min_abs_det(stencil, lam, n_guard)
    if proxy <= gap_tol:
        raise SpectralProximityError(
            f"lambda={lam} is within the spectrum of '{stencil.name}' (min|det| = {proxy:.3e} <= {gap_tol:.1e})")
    return proxy


def _quadrature(stencil: PeriodicStencil, lam: float, quad_n: int, box: Tuple[int, ...],
                component: int) -> Tuple[np.ndarray, complex]:
    nodes = [_torus_nodes(quad_n)] * stencil.dim
    symbols = symbol_on_torus(stencil, nodes) - lam * np.eye(stencil.fiber)
    rhs = np.zeros(symbols.shape[:-1] + (1,), dtype=complex)
    rhs[..., component, 0] = 1.0
    u_hat = np.linalg.solve(symbols, rhs)[..., 0]
    periodic = np.fft.ifftn(u_hat, axes=tuple(range(stencil.dim)))
    index = [cyclic_index(np.arange(-r, r + 1), quad_n) for r in box]
    values = periodic[np.ix_(*index)]
    u0 = complex(periodic[(0,) * stencil.dim + (component,)])
    return values, u0


def resolvent_delta(stencil: PeriodicStencil, lam: float, quad_n: Optional[int] = None,
                    box: Union[int, Sequence[int], None] = None, component: int = 0,
                    check_convergence: bool = True) -> GreensResult:
    """
    Solve (A - lambda) u = delta by the trapezoidal product rule on the n-torus.

    Args:
        stencil: Self-adjoint periodic operator
        lam: Real energy outside the spectrum
        quad_n: Quadrature points per axis (default Settings.QUAD_N)
        box: Half-width of the returned field (default quad_n // 4)
        component: Fiber component carrying the delta
        check_convergence: Repeat with 2 * quad_n and compare u(0)

    Returns:
        GreensResult with u on the box and the origin value u0
    """
    quad_n = Settings.QUAD_N if quad_n is None else int(quad_n)
    box = _as_box(stencil, quad_n // 4 if box is None else box)
    if any(2 * r + 2 > quad_n for r in box):
        raise DomainError(f"box {box} needs at least {2 * max(box) + 2} quadrature points per axis, got {quad_n}")
    if not 0 <= component < stencil.fiber:
        raise DomainError(f"fiber component {component} out of range for fiber {stencil.fiber}")
    guard_spectrum(stencil, lam, quad_n)

    values, u0 = _quadrature(stencil, lam, quad_n, box, component)
    quad_error = 0.0
    if check_convergence:
        _, u0_fine = _quadrature(stencil, lam, 2 * quad_n, tuple(0 for _ in box), component)
        quad_error = abs(u0_fine - u0)
        if quad_error > Settings.QUAD_DOUBLING_TOL:
            raise QuadratureError(f"doubling quad_n={quad_n} changed u(0) by {quad_error:.3e}")
    if abs(u0.imag) > 1e-12 * max(abs(u0), 1e-300):
        logger.warning(f"[GREEN] u(0) has imaginary part {u0.imag:.3e}")
    logger.info(f"[GREEN] '{stencil.name}' lambda={lam}: u(0)={u0.real:.12g}, quad_n={quad_n}, "
                f"doubling error {quad_error:.2e}")
    return GreensResult(LatticeField(box, values), u0, float(lam), quad_n, component, quad_error)


def quadrature_convergence(stencil: PeriodicStencil, lam: float, ns: Sequence[int] = (32, 64, 128, 256),
                           component: int = 0) -> List[float]:
    """|u0(2N) - u0(N)| for each N."""
    guard_spectrum(stencil, lam, max(ns))
    zero = tuple(0 for _ in range(stencil.dim))
    changes = []
    for n in ns:
        _, coarse = _quadrature(stencil, lam, n, zero, component)
        _, fine = _quadrature(stencil, lam, 2 * n, zero, component)
        changes.append(abs(fine - coarse))
    return changes


def synth_defect(result: GreensResult, stencil: Optional[PeriodicStencil] = None) -> SiteDefect:
    """Single-site defect V(0) = -1/u(0) on the delta's fiber component, so that -V u = delta."""
    if abs(result.u0) < Settings.DEGENERATE_U0:
        raise DegenerateDefectError(f"|u(0)| = {abs(result.u0):.3e} is too small to define a defect")
    fiber = result.u.fiber
    matrix = np.zeros((fiber, fiber), dtype=complex)
    matrix[result.component, result.component] = -1.0 / result.u0.real
    defect = SiteDefect.single_site(result.u.dim, fiber, matrix)
    if stencil is not None:
        residual = apply_truncated(stencil, result.u, defect, result.lam).sup_norm()
        logger.info(f"[GREEN] Defect V(0)={-1.0 / result.u0.real:.12g}, interior residual {residual:.3e}")
    return defect


def brute_force_green(stencil: PeriodicStencil, lam: float, big_box: Union[int, Sequence[int]],
                      component: int = 0) -> LatticeField:
    """Oracle: solve the truncated sparse system (A - lambda) u = delta with zero boundary."""
    box = _as_box(stencil, big_box)
    guard_spectrum(stencil, lam, Settings.QUAD_N)
    matrix = truncated_matrix(stencil, box, lam=lam).tocsc()
    rhs = LatticeField.delta(box, stencil.fiber, component).values.reshape(-1)
    with warnings.catch_warnings():
        warnings.simplefilter('error', MatrixRankWarning)
        try:
            solution = spsolve(matrix, rhs)
        except MatrixRankWarning as e:
            raise SingularSystemError(f"truncated system is singular: {e}") from e
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("truncated solve produced non-finite values")
    shape = tuple(2 * r + 1 for r in box) + (stencil.fiber,)
    return LatticeField(box, np.asarray(solution).reshape(shape))


def chain_green_closed_form(lam: float) -> float:
    """u(0) for A(z) = z + 1/z: sign(-lambda) / sqrt(lambda^2 - 4) for |lambda| > 2."""
    if abs(lam) <= 2.0:
        raise SpectralProximityError(f"lambda={lam} lies in the band [-2, 2]")
    return math.copysign(1.0, -lam) / math.sqrt(lam * lam - 4.0)


def example1_defect(alpha: float, box: int = 50) -> Example1Defect:
    """
    Closed-form defect of the fourth-order chain with eigenfunction v(g) = (-e^{alpha})^{-|g|}.

    lambda = (2 cosh(alpha) - 1)^2 - 3, V(0) = lambda + 4 e^{-alpha} - 2 e^{-2 alpha},
    V(+1) = V(-1) = e^{2 alpha} - 1.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    lam = (2.0 * math.cosh(alpha) - 1.0) ** 2 - 3.0
    if not -2.0 < lam < 6.0:
        raise DomainError(f"alpha={alpha} gives lambda={lam}, outside the embedding window (-2, 6)")
    decay = math.exp(-alpha)
    V0 = lam + 4.0 * decay - 2.0 * decay * decay
    V1 = math.exp(2.0 * alpha) - 1.0
    radius = np.abs(np.arange(-box, box + 1))
    v = LatticeField((box,), ((-decay) ** radius)[:, None])
    defect = SiteDefect(1, 1, {(0,): V0, (1,): V1, (-1,): V1})
    residual = apply_truncated(example1_stencil(), v, defect, lam).sup_norm()
    logger.info(f"[GREEN] Example-1 defect alpha={alpha}: lambda={lam}, V0={V0}, V1={V1}, residual {residual:.2e}")
    return Example1Defect(alpha, lam, V0, V1, v, defect, residual)


def fit_decay(u: LatticeField, degree: int = 1, r_min: int = 0, floor: Optional[float] = None,
              algebraic: float = 0.0) -> DecayFit:
    """
    Fit log(shell maximum) against the sup-norm radius.

    Shells below the underflow limit, or below ``floor`` times the largest
    shell (roundoff level), are left out of the fit. ``algebraic`` removes a
    power-law prefactor r^{-p} before fitting (p = 1/2 for two-dimensional
    lattice resolvents).
    """
    floor = Settings.TAIL_TOL if floor is None else floor
    if min(u.box) < 10 * max(degree, 1):
        raise DomainError(f"box {u.box} is too small for a decay fit (need >= {10 * max(degree, 1)})")
    shells = u.shell_maxima()
    radii = np.arange(shells.size)
    peak = shells.max(initial=0.0)
    usable = (shells > UNDERFLOW) & (shells > floor * peak) & (radii >= r_min)
    if usable.sum() < 3:
        raise DecayFitError(f"only {int(usable.sum())} usable shells (need 3); the field has no exponential tail")
    r = radii[usable].astype(float)
    logs = np.log(shells[usable]) + algebraic * np.log(np.maximum(r, 1.0))
    slope, intercept = np.polyfit(r, logs, 1)
    predicted = intercept + slope * r
    total = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - float(np.sum((logs - predicted) ** 2)) / total if total > 0 else 1.0
    alpha = -float(slope)
    if alpha < 0:
        logger.warning(f"[GREEN] Shell maxima grow with radius (slope {slope:.3e}); alpha clipped to 0")
        alpha = 0.0
    return DecayFit(alpha, r2, float(intercept), shells, radii)


def laurent_terms(stencil: PeriodicStencil, lam: float) -> int:
    """Number of nonzero Laurent coefficients of A(z) - lambda."""
    count = 0
    zero = (0,) * stencil.dim
    for g in sorted(set(stencil.offsets) | {zero}):
        coefficient = stencil.coefficient(g)
        if not any(g):
            coefficient = coefficient - lam * np.eye(stencil.fiber)
        if np.any(coefficient != 0):
            count += 1
    return count


def unbounded_support_check(stencil: PeriodicStencil, lam: float, boxes: Sequence[int] = (20, 40, 60),
                            quad_n: Optional[int] = None) -> SupportVerdict:
    """
    Evidence that (A - lambda)^{-1} delta is not finitely supported.

    A(z) - lambda with at least two Laurent terms vanishes somewhere in
    (C*)^n, so its inverse is not a Laurent polynomial; numerically, the
    largest radius carrying a value above the roundoff level keeps growing
    with the box.
    """
    if stencil.is_constant:
        raise HypothesisViolationError(f"stencil '{stencil.name}' is constant; the support argument needs hopping terms")
    terms = laurent_terms(stencil, lam)
    quad_n = Settings.QUAD_N if quad_n is None else quad_n
    tails = []
    for box in boxes:
        n = max(quad_n, 4 * box)
        n += n % 2
        result = resolvent_delta(stencil, lam, n, box, check_convergence=False)
        tails.append(result.u.tail_radius(Settings.TAIL_TOL))
    monotone = all(b >= a for a, b in zip(tails, tails[1:]))
    grows = len(tails) > 1 and tails[-1] > tails[0]
    notes = []
    if not monotone:
        notes.append('tail radius decreased between boxes')
    if not grows:
        notes.append('tail radius did not grow')
    verdict = SupportVerdict(terms, list(boxes), tails, bool(terms >= 2 and monotone and grows), notes)
    logger.info(f"[GREEN] Support check '{stencil.name}' lambda={lam}: terms={terms}, tails={tails}")
    return verdict
