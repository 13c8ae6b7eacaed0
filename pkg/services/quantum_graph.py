"""
Two periodic quantum graphs with a single-edge defect.

The decorated chain is a ladder of two strands joined by rungs of length
one; its anti-symmetric states decay in the gap |3 cos(mu) + 1| > 2 while the
symmetric states propagate. The bilayer grid is reduced to a half-graph
(one square layer with a dangling half-rung per vertex) carrying a Dirichlet
or Neumann condition at the free end. On every edge a solution is
C cos(mu x) + D sin(mu x)/mu with lambda = mu^2; a defect potential V0 on one
rung replaces mu by nu there, V0 = mu^2 - nu^2.
"""

import cmath
import logging
import math
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.optimize import brentq

from config.settings import Settings
from models.greens import DecayFit
from models.lattice import LatticeField
from models.quantum import (
    ANTISYMMETRIC,
    BILAYER_2D,
    CHAIN_1D,
    DIRICHLET,
    NEUMANN,
    SYMMETRIC,
    BilayerField,
    ChainBoundState,
    EdgeCoefficients,
    GridBoundState,
    GridModel,
    SecularEval,
    normalize_bc,
    normalize_parity,
)
from models.spectra import BandReport
from services.dispersion import branch_roots
from services.greens_defect import fit_decay
from utils.errors import (
    DecayFitError,
    DegenerateDefectError,
    DomainError,
    PoleError,
    PropagatingBranchError,
    QuadratureError,
    RootNotFoundError,
    SpectralProximityError,
)
from utils.helpers import cyclic_index

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
POLE_NUDGE = 1e-9
GRID_EDGE_COS = 0.6
CHAIN_SYM_EDGE_COS = -1.0 / 3.0
CHAIN_ANTI_EDGE_COS = 1.0 / 3.0
SIGN = {DIRICHLET: -1, NEUMANN: 1}
EDGE_CHEB_DEG = 24


def _guard_mu(mu: float) -> None:
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    if abs(math.sin(mu)) <= Settings.SIN_GUARD:
        raise DomainError(f"mu={mu} is a multiple of pi (flat band of infinite multiplicity)")


def solve_on_branches(func: Callable[[float], float], first_pole: float, period: float = TWO_PI,
                      lo: Optional[float] = None, hi: Optional[float] = None) -> List[float]:
    """
    Roots of a function with poles at first_pole + period * l, one bracket per branch.

    Each branch between consecutive poles is clipped to [lo, hi] and solved
    with brentq when its end values differ in sign.
    """
    lo = Settings.NU_SCAN[0] if lo is None else lo
    hi = Settings.NU_SCAN[1] if hi is None else hi
    start = math.floor((lo - first_pole) / period)
    roots = []
    left_pole = first_pole + start * period
    while left_pole < hi:
        right_pole = left_pole + period
        left = max(lo, left_pole + POLE_NUDGE)
        right = min(hi, right_pole - POLE_NUDGE)
        if left < right:
            f_left, f_right = func(left), func(right)
            if f_left == 0.0:
                roots.append(left)
            elif f_left * f_right < 0.0:
                roots.append(brentq(func, left, right, xtol=1e-15, maxiter=200))
        left_pole = right_pole
    return roots


def _select_nu(roots: List[float], mu: float, branch: Optional[int], label: str) -> float:
    admissible = [nu for nu in roots if abs(nu - abs(mu)) > Settings.NU_EXCLUSION]
    if not admissible:
        if roots:
            raise DegenerateDefectError(f"{label}: the only root nu={roots[0]} coincides with mu={mu} (V0 = 0)")
        raise RootNotFoundError(f"{label}: no root in the scan window {Settings.NU_SCAN}")
    index = 0 if branch is None else int(branch)
    if not 0 <= index < len(admissible):
        raise RootNotFoundError(f"{label}: branch {index} requested, {len(admissible)} roots available")
    return admissible[index]


def _cos_bands(threshold: float, above: bool, mu_max: float, variable: str = 'mu') -> BandReport:
    """mu-intervals in [0, mu_max] where cos(mu) >= threshold (above) or cos(mu) <= threshold."""
    half = math.acos(threshold) if above else math.pi - math.acos(threshold)
    offset = 0.0 if above else math.pi
    branches = []
    ell = 0 if above else -1
    while offset + TWO_PI * ell - half <= mu_max:
        lo = max(0.0, offset + TWO_PI * ell - half)
        hi = min(mu_max, offset + TWO_PI * ell + half)
        if hi > lo:
            branches.append((lo, hi))
        ell += 1
    return BandReport.from_branches(branches, weight=1, variable=variable)


# --- sampled edge functions ------------------------------------------------

def edge_interpolant(C: float, D: float, freq: float, domain: Tuple[float, float] = (0.0, 1.0),
                     mirrored: bool = False, deg: int = EDGE_CHEB_DEG) -> Chebyshev:
    """
    Chebyshev interpolant of C cos(freq x) + D sin(freq x)/freq sampled on the domain.

    With mirrored=True the function is read at -x, which places a half-rung
    given in its own coordinate onto the opposite side of the midpoint.
    """
    flip = -1.0 if mirrored else 1.0

    def edge(x):
        y = flip * x
        return C * np.cos(freq * y) + D * np.sin(freq * y) / freq

    return Chebyshev.interpolate(edge, deg, domain=list(domain))


def ode_residual(series: Chebyshev, potential: float, lam: float, nodes: int = 65) -> float:
    """sup |-u'' + (V - lambda) u| on the domain, relative to max(|lambda|, |V|, 1) sup |u|."""
    x = np.linspace(series.domain[0], series.domain[1], nodes)
    u = series(x)
    residual = -series.deriv(2)(x) + (potential - lam) * u
    scale = max(abs(lam), abs(potential), 1.0) * max(float(np.abs(u).max()), 1e-300)
    return float(np.abs(residual).max()) / scale


# --- decorated chain -------------------------------------------------------

def _chain_w(mu: float, parity: str) -> float:
    return 3.0 * math.cos(mu) + (1.0 if parity == ANTISYMMETRIC else -1.0)


def chain1d_secular(mu: float, z: complex, parity: str = ANTISYMMETRIC) -> SecularEval:
    """
    Cell conditions of a quasi-periodic chain state with multiplier z.

    The anti-symmetric matrix acts on (D0, C1, D1) with an odd rung; the
    symmetric one on (C0, C1, D1) with an even rung. Their determinants are
    mu sin(mu/2) (z^2 - (3 cos mu + 1) z + 1) and
    mu cos(mu/2) (z^2 - (3 cos mu - 1) z + 1).
    """
    if mu == 0:
        raise DomainError("mu must be nonzero")
    parity = normalize_parity(parity)
    z = complex(z)
    if z == 0:
        raise DomainError("Floquet multiplier must be nonzero")
    s, c = math.sin(mu), math.cos(mu)
    half_s, half_c = math.sin(0.5 * mu), math.cos(0.5 * mu)
    if parity == ANTISYMMETRIC:
        first = (-half_s, -half_s, -mu * half_c)
        closed = mu * half_s * (z * z - (3.0 * c + 1.0) * z + 1.0)
    else:
        first = (-half_c, -half_c, mu * half_s)
        closed = mu * half_c * (z * z - (3.0 * c - 1.0) * z + 1.0)
    matrix = np.array([
        [first[0], z, 0.0],
        [first[1], c, s],
        [first[2], mu * s, mu * (z - c)],
    ], dtype=complex)
    det = complex(np.linalg.det(matrix))
    return SecularEval(mu, (complex(-1j * cmath.log(z)),), matrix, det, closed)


def chain1d_z(mu: float) -> float:
    """Decaying multiplier of the anti-symmetric branch: the root of z + 1/z = 3 cos(mu) + 1 with |z| < 1."""
    w = _chain_w(mu, ANTISYMMETRIC)
    if abs(w) <= 2.0:
        raise PropagatingBranchError(f"mu={mu}: 3 cos(mu) + 1 = {w:.6g} lies in [-2, 2], the branch propagates")
    return float(branch_roots(w).decaying.real)


def chain1d_nu(mu: float, branch: Optional[int] = None) -> Tuple[float, float]:
    """Solve nu cot(nu/2) = 2 (z - cos mu) mu / sin mu for the defect rung; returns (nu, V0)."""
    _guard_mu(mu)
    z = chain1d_z(mu)
    target = 2.0 * (z - math.cos(mu)) * mu / math.sin(mu)

    def equation(nu: float) -> float:
        return nu / math.tan(0.5 * nu) - target

    nu = _select_nu(solve_on_branches(equation, 0.0), mu, branch, 'chain defect equation')
    V0 = mu * mu - nu * nu
    logger.info(f"[QGRAPH] Chain mu={mu}: z={z:.12g}, nu={nu:.12g}, V0={V0:.12g}")
    return nu, V0


def chain1d_bands(parity: str, mu_max: float = 4.0 * math.pi) -> BandReport:
    """mu-bands where 2 cos k = 3 cos(mu) -/+ 1 has real k: cos mu >= -1/3 (sym) or cos mu <= 1/3 (anti)."""
    parity = normalize_parity(parity)
    if parity == SYMMETRIC:
        return _cos_bands(CHAIN_SYM_EDGE_COS, True, mu_max)
    return _cos_bands(CHAIN_ANTI_EDGE_COS, False, mu_max)


def chain1d_dispersion_samples(n_mu: int = 400, mu_max: float = 4.0 * math.pi) -> List[Dict]:
    """(mu, k) rows of both chain dispersion relations wherever k is real."""
    rows = []
    for mu in np.linspace(0.0, mu_max, n_mu):
        for parity in (SYMMETRIC, ANTISYMMETRIC):
            half_w = 0.5 * _chain_w(mu, parity)
            if abs(half_w) <= 1.0:
                k = math.acos(half_w)
                rows.append({'parity': parity, 'mu': float(mu), 'lambda': float(mu * mu), 'k': k})
    return rows


def _chain_vertex_residuals(mu: float, nu: float, coefficients: EdgeCoefficients) -> Tuple[float, float]:
    t = math.sin(mu) / mu
    C1, D1, C2, D2, K = coefficients.C1, coefficients.D1, coefficients.C2, coefficients.D2, coefficients.K
    centre = coefficients.box[0]
    rung_value = K * math.sin(0.5 * mu) / mu
    rung_slope = K * math.cos(0.5 * mu)
    rung_value[centre] = coefficients.defect_amplitude * math.sin(0.5 * nu) / nu
    rung_slope[centre] = coefficients.defect_amplitude * math.cos(0.5 * nu)

    continuity = 0.0
    flux = 0.0
    for C, D, side in ((C1, D1, 1.0), (C2, D2, -1.0)):
        end_value = C[:-1] * math.cos(mu) + D[:-1] * t
        end_slope = -mu * math.sin(mu) * C[:-1] + math.cos(mu) * D[:-1]
        value = side * rung_value[:-1]
        continuity = max(continuity, float(np.abs(value - end_value).max()), float(np.abs(value - C[1:]).max()))
        flux = max(flux, float(np.abs(D[1:] - end_slope - side * rung_slope[:-1]).max()))
    scale = max(float(np.abs(C1).max()), 1e-300)
    return continuity / scale, flux / scale


def chain1d_bound_state(mu: float, box: int = 20, branch: Optional[int] = None,
                        nu: Optional[float] = None) -> ChainBoundState:
    """
    Splice the decaying anti-symmetric solution z^{|g|} on both sides of the defect rung.

    Vertex values are phi(g) = z^{|g|} on the upper strand and -phi(g) on the
    lower strand. Rung g != 0 carries K sin(mu x)/mu with K = mu phi / sin(mu/2);
    the defect rung carries B sin(nu x)/nu with B = nu / sin(nu/2). An explicit
    nu skips the root solve and leaves the flux at the defect unbalanced.
    """
    if box < 2:
        raise DomainError(f"box must be at least 2, got {box}")
    if nu is None:
        nu, V0 = chain1d_nu(mu, branch)
    else:
        _guard_mu(mu)
        V0 = mu * mu - nu * nu
    z = chain1d_z(mu)
    if abs(math.sin(0.5 * nu)) <= Settings.SIN_GUARD:
        raise DegenerateDefectError(f"sin(nu/2) vanishes at nu={nu}")
    cells = np.arange(-box, box + 1)
    phi = z ** np.abs(cells).astype(float)
    phi_prev = z ** np.abs(cells - 1).astype(float)
    s, c = math.sin(mu), math.cos(mu)

    C1 = phi_prev
    D1 = mu * (phi - phi_prev * c) / s
    K = mu * phi / math.sin(0.5 * mu)
    K[box] = 0.0
    amplitude = nu * phi[box] / math.sin(0.5 * nu)
    coefficients = EdgeCoefficients(mu, (box,), K, C1, D1, -C1, -D1, 'sin', nu, V0, amplitude)

    continuity, flux = _chain_vertex_residuals(mu, nu, coefficients)
    ends = C1 * c + D1 * s / mu
    positive = ends[box + 1:]
    ratio_error = float(np.abs(positive[1:] / positive[:-1] - z).max()) if positive.size > 1 else 0.0
    end_slopes = -mu * s * C1 + c * D1
    # e1(g) read backwards from x = 1 must equal e1(1 - g) read forwards from x = 0
    forward = np.arange(1, 2 * box + 1)
    backward = 2 * box + 1 - forward
    reflection = max(float(np.abs(C1[backward] - ends[forward]).max()),
                     float(np.abs(D1[backward] + end_slopes[forward]).max()))
    antisymmetry = max(float(np.abs(C1 + coefficients.C2).max()), float(np.abs(D1 + coefficients.D2).max()))

    witness = chain1d_bands(SYMMETRIC, max(4.0 * math.pi, mu + TWO_PI)).witness(mu)
    decay: Optional[DecayFit] = None
    try:
        decay = fit_decay(LatticeField((box,), phi[:, None]), floor=0.0)
    except (DecayFitError, DomainError) as e:
        logger.warning(f"[QGRAPH] Chain decay fit skipped: {e}")
    logger.info(f"[QGRAPH] Chain bound state mu={mu}: continuity {continuity:.2e}, flux {flux:.2e}, "
                f"embedded={witness is not None}")
    return ChainBoundState(mu, z, nu, V0, coefficients, phi, continuity, flux, ratio_error, reflection,
                           antisymmetry, witness is not None, witness, decay)


def chain1d_defect_check(state: ChainBoundState) -> Dict[str, float]:
    """
    Residuals at the defect rung, measured on sampled edge functions.

    The defect rung (potential V0) and the four strand edges meeting it are
    interpolated and checked against their ODEs. Their ends must agree with
    the vertex values phi(0), -phi(0) and balance Kirchhoff's condition there.
    """
    mu, nu, V0 = state.mu, state.nu, state.V0
    lam = mu * mu
    coefficients = state.coefficients
    centre = coefficients.box[0]
    if centre + 1 >= coefficients.C1.size:
        raise DomainError("the defect rung needs a strand edge on each side")
    vertex = float(state.vertex_values[centre])
    rung = edge_interpolant(0.0, coefficients.defect_amplitude, nu, (-0.5, 0.5))
    upper = [edge_interpolant(coefficients.C1[i], coefficients.D1[i], mu) for i in (centre, centre + 1)]
    lower = [edge_interpolant(coefficients.C2[i], coefficients.D2[i], mu) for i in (centre, centre + 1)]
    rung_slope = rung.deriv()

    def mismatch(before: Chebyshev, after: Chebyshev, end: float, target: float) -> float:
        return max(abs(rung(end) - target), abs(before(1.0) - target), abs(after(0.0) - target))

    def flux(before: Chebyshev, after: Chebyshev, outward: float) -> float:
        return abs(after.deriv()(0.0) - before.deriv()(1.0) - outward)

    scale = max(abs(vertex), 1e-300)
    target = 2.0 * (state.z - math.cos(mu)) * mu / math.sin(mu)
    return {
        'ode_residual': max([ode_residual(rung, V0, lam)] + [ode_residual(e, 0.0, lam) for e in upper + lower]),
        'nu_equation_residual': abs(nu / math.tan(0.5 * nu) - target),
        'upper_vertex_mismatch': mismatch(upper[0], upper[1], 0.5, vertex) / scale,
        'lower_vertex_mismatch': mismatch(lower[0], lower[1], -0.5, -vertex) / scale,
        'flux_mismatch': max(flux(upper[0], upper[1], rung_slope(0.5)),
                             flux(lower[0], lower[1], -rung_slope(-0.5))) / scale,
        'reflection_error': state.reflection_error,
    }


# --- bilayer grid ----------------------------------------------------------

def boundary_constants(mu: float, nu: float, bc: str) -> Tuple[float, float, float, float]:
    """
    Value and slope at x = 1/2 of the rung bases.

    Returns (a, b, c, d): a, b for the mu-basis and c, d for the nu-basis;
    sin(. x)/. under Dirichlet and cos(. x) under Neumann.
    """
    bc = normalize_bc(bc)
    if bc == DIRICHLET:
        return (math.sin(0.5 * mu) / mu, math.cos(0.5 * mu), math.sin(0.5 * nu) / nu, math.cos(0.5 * nu))
    return (math.cos(0.5 * mu), -mu * math.sin(0.5 * mu), math.cos(0.5 * nu), -nu * math.sin(0.5 * nu))


def secular_matrices(a: float, b: float, mu: float, k1, k2) -> np.ndarray:
    """Batched 5x5 cell matrices acting on (K, C1, D1, C2, D2) for quasi-momenta k1, k2 (real or complex)."""
    zeta1 = np.exp(-1j * np.asarray(k1, dtype=complex))
    zeta2 = np.exp(-1j * np.asarray(k2, dtype=complex))
    zeta1, zeta2 = np.broadcast_arrays(zeta1, zeta2)
    c, s, t = math.cos(mu), math.sin(mu), math.sin(mu) / mu
    M = np.zeros(zeta1.shape + (5, 5), dtype=complex)
    M[..., :4, 0] = a
    M[..., 0, 1] = -1.0
    M[..., 1, 1] = -zeta1 * c
    M[..., 1, 2] = -zeta1 * t
    M[..., 2, 3] = -1.0
    M[..., 3, 3] = -zeta2 * c
    M[..., 3, 4] = -zeta2 * t
    M[..., 4, 0] = b
    M[..., 4, 1] = -zeta1 * mu * s
    M[..., 4, 2] = zeta1 * c - 1.0
    M[..., 4, 3] = -zeta2 * mu * s
    M[..., 4, 4] = zeta2 * c - 1.0
    return M


def _grid_denominator(a: float, b: float, mu: float, sigma):
    return b * math.sin(mu) / mu + 4.0 * a * math.cos(mu) - 2.0 * a * sigma


def grid2d_secular(a: float, b: float, c: float, d: float, mu: float, k1: complex, k2: complex,
                   nu: Optional[float] = None) -> SecularEval:
    """
    Cell matrix of the half-graph at (mu, k1, k2) with its determinant.

    The closed form is e^{-i(k1+k2)} (sin mu / mu)
    (b sin mu / mu + 4 a cos mu - 2 a (cos k1 + cos k2)). When nu is given
    the forcing of the defect rung, (c, c, c, c, d) / (mu^2 - nu^2), is attached.
    """
    if mu == 0:
        raise DomainError("mu must be nonzero")
    k1, k2 = complex(k1), complex(k2)
    matrix = secular_matrices(a, b, mu, k1, k2)
    det = complex(np.linalg.det(matrix))
    sigma = cmath.cos(k1) + cmath.cos(k2)
    closed = cmath.exp(-1j * (k1 + k2)) * (math.sin(mu) / mu) * _grid_denominator(a, b, mu, sigma)
    rhs = None
    if nu is not None:
        rhs = np.array([c, c, c, c, d], dtype=complex) / (mu * mu - nu * nu)
    return SecularEval(mu, (k1, k2), matrix, det, complex(closed), (a, b, c, d), rhs)


def gap_margin(mu: float, bc: str) -> float:
    """|5 cos mu +/- 1| - 4: positive exactly when mu lies in a gap of the given half-graph."""
    bc = normalize_bc(bc)
    shift = 1.0 if bc == DIRICHLET else -1.0
    return abs(5.0 * math.cos(mu) + shift) - 4.0


def in_band(mu: float, bc: str) -> bool:
    return gap_margin(mu, bc) <= 0.0


def grid2d_bands(bc: str, mu_max: float = 4.0 * math.pi) -> BandReport:
    """Neumann bands cos mu >= -3/5 (J + 2 pi l); Dirichlet bands cos mu <= 3/5 (J + pi + 2 pi l)."""
    bc = normalize_bc(bc)
    if bc == NEUMANN:
        return _cos_bands(-GRID_EDGE_COS, True, mu_max)
    return _cos_bands(GRID_EDGE_COS, False, mu_max)


def _torus_sigma(quad_n: int) -> np.ndarray:
    k = TWO_PI * np.arange(quad_n) / quad_n
    cos_k = np.cos(k)
    return cos_k[:, None] + cos_k[None, :]


def dispersion_mean(mu: float, bc: str, quad_n: Optional[int] = None) -> float:
    """Torus average of 1 / D(mu; k) with D = 5 cos mu +/- 1 - 2 (cos k1 + cos k2)."""
    bc = normalize_bc(bc)
    quad_n = Settings.GRID_QUAD_N if quad_n is None else int(quad_n)
    if gap_margin(mu, bc) <= Settings.GAP_TOL:
        raise SpectralProximityError(f"mu={mu} is not inside a {bc} gap (margin {gap_margin(mu, bc):.3e})")
    shift = 1.0 if bc == DIRICHLET else -1.0
    return float(np.mean(1.0 / (5.0 * math.cos(mu) + shift - 2.0 * _torus_sigma(quad_n))))


@lru_cache(maxsize=256)
def _lattice_integral(mu: float, quad_n: int) -> float:
    coarse = dispersion_mean(mu, DIRICHLET, quad_n)
    fine = dispersion_mean(mu, DIRICHLET, 2 * quad_n)
    change = abs(fine - coarse) / abs(fine)
    if change > Settings.QUAD_DOUBLING_TOL:
        raise QuadratureError(f"R({mu}) changed by {change:.3e} (relative) when doubling quad_n={quad_n}")
    logger.debug(f"[QGRAPH] R({mu}) = {fine:.15g} (doubling change {change:.1e})")
    return fine


def R_integral(mu: float, quad_n: Optional[int] = None) -> float:
    """Torus average of 1 / D_D(mu; k); defined and positive in the Dirichlet gaps."""
    quad_n = Settings.GRID_QUAD_N if quad_n is None else int(quad_n)
    return _lattice_integral(float(mu), quad_n)


def _grid_guard(mu: float, nu: float) -> None:
    _guard_mu(mu)
    if abs(mu * mu - nu * nu) <= Settings.NU_EXCLUSION:
        raise DegenerateDefectError(f"mu^2 = nu^2 at mu={mu}, nu={nu}")


def grid2d_KD(mu: float, nu: float, quad_n: Optional[int] = None) -> float:
    """Rung amplitude K(0) of the Dirichlet half-graph response to the defect rung."""
    _grid_guard(mu, nu)
    a, _, c, _ = boundary_constants(mu, nu, DIRICHLET)
    R = R_integral(mu, quad_n)
    beta = 1.0 / (mu * mu - nu * nu)
    t = math.sin(mu) / mu
    return beta / a * (c * (1.0 - (1.0 + math.cos(mu)) * R) + math.cos(0.5 * nu) * t * R)


def grid2d_KN(mu: float, nu: float, quad_n: Optional[int] = None) -> float:
    """Rung amplitude K(0) of the Neumann half-graph response; uses R(mu + pi)."""
    _grid_guard(mu, nu)
    a, _, c, _ = boundary_constants(mu, nu, NEUMANN)
    R = R_integral(mu + math.pi, quad_n)
    beta = 1.0 / (mu * mu - nu * nu)
    t = math.sin(mu) / mu
    return beta / a * (c * (1.0 - (1.0 - math.cos(mu)) * R) + nu * math.sin(0.5 * nu) * t * R)


def grid2d_K_hat(mu: float, nu: float, k1, k2, bc: str):
    """
    Floquet rung amplitude beta (d t + c (4 cos mu - 2 s)) / (b t + a (4 cos mu - 2 s)).

    Here t = sin(mu)/mu, s = cos k1 + cos k2 and beta = 1/(mu^2 - nu^2).
    Accepts arrays of (possibly complex) quasi-momenta.
    """
    _grid_guard(mu, nu)
    a, b, c, d = boundary_constants(mu, nu, bc)
    sigma = np.cos(np.asarray(k1, dtype=complex)) + np.cos(np.asarray(k2, dtype=complex))
    t = math.sin(mu) / mu
    numerator = d * t + c * (4.0 * math.cos(mu) - 2.0 * sigma)
    denominator = _grid_denominator(a, b, mu, sigma)
    if np.any(np.abs(denominator) <= 1e-12 * (abs(a) + abs(b))):
        raise PoleError(f"K-hat evaluated on its denominator zero set at mu={mu}")
    value = numerator / ((mu * mu - nu * nu) * denominator)
    return complex(value) if np.ndim(value) == 0 else value


def grid2d_KD_hat(mu: float, nu: float, k1, k2):
    return grid2d_K_hat(mu, nu, k1, k2, DIRICHLET)


def grid2d_KN_hat(mu: float, nu: float, k1, k2):
    return grid2d_K_hat(mu, nu, k1, k2, NEUMANN)


def grid2d_surface_points(mu: float, bc: str, count: int = 16, seed: int = 0) -> List[Tuple[complex, complex]]:
    """Complex Floquet points (z1, z2) on the zero set of the K-hat denominator."""
    a, b, _, _ = boundary_constants(mu, 1.0, bc)
    level = 0.5 * (b * math.sin(mu) / mu / a + 4.0 * math.cos(mu))
    rng = np.random.default_rng(seed)
    points = []
    for _ in range(count):
        z1 = complex(rng.uniform(0.5, 2.0) * cmath.exp(1j * rng.uniform(-math.pi, math.pi)))
        w2 = 2.0 * level - (z1 + 1.0 / z1)
        points.append((z1, branch_roots(w2).roots[0]))
    return points


def grid2d_surface_numerator(mu: float, nu: float, bc: str, points: Sequence[Tuple[complex, complex]]) -> np.ndarray:
    """K-hat numerator d t + c (4 cos mu - 2 s) at the given surface points."""
    a, b, c, d = boundary_constants(mu, nu, bc)
    t = math.sin(mu) / mu
    sigma = np.array([0.5 * (z1 + 1.0 / z1 + z2 + 1.0 / z2) for z1, z2 in points])
    return d * t + c * (4.0 * math.cos(mu) - 2.0 * sigma)


def grid2d_decay_rate(mu: float, bc: str) -> float:
    """Predicted decay per sup-norm shell: arccosh(|5 cos mu +/- 1| / 2 - 1)."""
    margin = gap_margin(mu, bc)
    if margin <= 0.0:
        raise SpectralProximityError(f"mu={mu} lies in a {normalize_bc(bc)} band; nothing decays")
    return math.acosh(0.5 * (margin + 4.0) - 1.0)


def grid2d_nu_root(mu: float, bc: str, branch: Optional[int] = None,
                   quad_n: Optional[int] = None) -> Tuple[float, float]:
    """
    Defect parameter making the rung amplitude K(0) vanish; returns (nu, V0).

    Dirichlet: nu cot(nu/2) = (mu / sin mu) (1 + cos mu - 1/R(mu)).
    Neumann:   nu tan(nu/2) = (mu / sin mu) (1 - cos mu - 1/R(mu + pi)).
    """
    bc = normalize_bc(bc)
    _guard_mu(mu)
    if gap_margin(mu, bc) <= Settings.GAP_TOL:
        raise SpectralProximityError(f"mu={mu} is not inside a {bc} gap")
    ratio = mu / math.sin(mu)
    if bc == DIRICHLET:
        target = ratio * (1.0 + math.cos(mu) - 1.0 / R_integral(mu, quad_n))

        def equation(nu: float) -> float:
            return nu / math.tan(0.5 * nu) - target

        roots = solve_on_branches(equation, 0.0)
    else:
        target = ratio * (1.0 - math.cos(mu) - 1.0 / R_integral(mu + math.pi, quad_n))

        def equation(nu: float) -> float:
            return nu * math.tan(0.5 * nu) - target

        roots = solve_on_branches(equation, math.pi)
    nu = _select_nu(roots, mu, branch, f'{bc} defect equation')
    V0 = mu * mu - nu * nu
    logger.info(f"[QGRAPH] Grid {bc} mu={mu}: nu={nu:.12g}, V0={V0:.12g}")
    return nu, V0


def _grid_vertex_residuals(coefficients: EdgeCoefficients, rung_value: np.ndarray,
                           rung_slope: np.ndarray) -> Tuple[float, float]:
    """Continuity and Kirchhoff residuals given the rung value and outward slope at each vertex."""
    mu = coefficients.mu
    t, cos_mu, sin_mu = math.sin(mu) / mu, math.cos(mu), math.sin(mu)
    C1, D1, C2, D2 = coefficients.C1, coefficients.D1, coefficients.C2, coefficients.D2

    # vertices g whose neighbours g - e1 and g - e2 are inside the box
    rung_value = rung_value[1:, 1:]
    rung_slope = rung_slope[1:, 1:]
    end1 = C1[:-1, 1:] * cos_mu + D1[:-1, 1:] * t
    end2 = C2[1:, :-1] * cos_mu + D2[1:, :-1] * t
    slope1 = -mu * sin_mu * C1[:-1, 1:] + cos_mu * D1[:-1, 1:]
    slope2 = -mu * sin_mu * C2[1:, :-1] + cos_mu * D2[1:, :-1]

    continuity = max(float(np.abs(rung_value - C1[1:, 1:]).max()), float(np.abs(rung_value - end1).max()),
                     float(np.abs(rung_value - C2[1:, 1:]).max()), float(np.abs(rung_value - end2).max()))
    flux = float(np.abs(rung_slope - D1[1:, 1:] - D2[1:, 1:] + slope1 + slope2).max())
    scale = max(float(np.abs(C1).max()), float(np.abs(C2).max()), 1e-300)
    return continuity / scale, flux / scale


def _rung_ends(coefficients: EdgeCoefficients, a: float, b: float, c: float,
               d: float) -> Tuple[np.ndarray, np.ndarray]:
    B = coefficients.box[0]
    value = a * coefficients.K
    slope = b * coefficients.K
    value[B, B] += c * coefficients.defect_amplitude
    slope[B, B] += d * coefficients.defect_amplitude
    return value, slope


def grid2d_bound_state(mu: float, bc: str, box: int = 20, quad_n: Optional[int] = None,
                       nu: Optional[float] = None, branch: Optional[int] = None) -> GridBoundState:
    """
    Half-graph bound state by inverse Floquet transform of the cell solution.

    Args:
        mu: Spectral parameter, lambda = mu^2, inside a gap of the half-graph
        bc: 'dirichlet' or 'neumann' condition at the free end of each rung
        box: Cells kept on each side of the defect
        quad_n: Torus quadrature points per axis (default Settings.GRID_QUAD_N)
        nu: Override of the defect parameter (the root is solved for when None)
        branch: Index of the root branch when nu is solved for

    Returns:
        GridBoundState with per-cell coefficients and the vertex residuals
    """
    model = GridModel(BILAYER_2D, bc)
    bc = model.bc
    quad_n = Settings.GRID_QUAD_N if quad_n is None else int(quad_n)
    if box < 10 or 2 * box + 2 > quad_n:
        raise DomainError(f"box must lie in [10, {quad_n // 2 - 1}] for quad_n={quad_n}, got {box}")
    if nu is None:
        nu, V0 = grid2d_nu_root(mu, bc, branch, quad_n)
    else:
        _grid_guard(mu, nu)
        if abs(nu - mu) <= Settings.NU_EXCLUSION:
            raise DegenerateDefectError(f"nu={nu} coincides with mu={mu}")
        if gap_margin(mu, bc) <= Settings.GAP_TOL:
            raise SpectralProximityError(f"mu={mu} is not inside a {bc} gap")
        V0 = mu * mu - nu * nu
    a, b, c, d = boundary_constants(mu, nu, bc)
    beta = 1.0 / (mu * mu - nu * nu)

    k = TWO_PI * np.arange(quad_n) / quad_n
    matrices = secular_matrices(a, b, mu, k[:, None], k[None, :])
    rhs = np.broadcast_to(beta * np.array([c, c, c, c, d], dtype=complex), matrices.shape[:-1])
    x_hat = np.linalg.solve(matrices, rhs[..., None])[..., 0]
    periodic = np.fft.ifft2(x_hat, axes=(0, 1))
    far = max(np.abs(periodic[quad_n // 2]).max(), np.abs(periodic[:, quad_n // 2]).max())
    wraparound = float(far / np.abs(periodic).max())
    if wraparound > Settings.QUAD_DOUBLING_TOL:
        raise QuadratureError(f"field has not decayed across the quadrature torus (ratio {wraparound:.2e})")

    index = cyclic_index(np.arange(-box, box + 1), quad_n)
    x = periodic[np.ix_(index, index)]
    if np.abs(x.imag).max() > 1e-10 * np.abs(x).max():
        logger.warning(f"[QGRAPH] Coefficients have imaginary part {np.abs(x.imag).max():.2e}")
    x = x.real
    K0 = float(x[box, box, 0])
    K = x[..., 0].copy()
    # the defect rung keeps only the forced nu-solution
    K[box, box] = 0.0
    coefficients = EdgeCoefficients(mu, (box, box), K, x[..., 1], x[..., 2], x[..., 3], x[..., 4],
                                    'sin' if bc == DIRICHLET else 'cos', nu, V0, -beta)

    continuity, flux = _grid_vertex_residuals(coefficients, *_rung_ends(coefficients, a, b, c, d))
    scale = max(float(np.abs(x[..., 1]).max()), float(np.abs(x[..., 3]).max()))
    remainder = abs(K0) / scale

    field = LatticeField((box, box), x)
    decay: Optional[DecayFit] = None
    try:
        decay = fit_decay(field, r_min=2, algebraic=0.5)
    except (DecayFitError, DomainError) as e:
        logger.warning(f"[QGRAPH] Grid decay fit skipped: {e}")
    boxes = sorted({box // 2, (3 * box) // 4, box})
    tails = [field.crop((r, r)).tail_radius(Settings.TAIL_TOL) for r in boxes]

    companion = model.companion_bc
    witness = grid2d_bands(companion, max(4.0 * math.pi, mu + TWO_PI)).witness(mu)
    logger.info(f"[QGRAPH] Grid {bc} bound state mu={mu}, nu={nu:.10g}: continuity {continuity:.2e}, "
                f"flux {flux:.2e}, K(0) remainder {remainder:.2e}, embedded={witness is not None}")
    return GridBoundState(mu, nu, V0, bc, quad_n, coefficients, remainder, continuity, flux, decay,
                          grid2d_decay_rate(mu, bc), witness is not None, witness, boxes, tails)


def grid2d_mirror_lift(state: GridBoundState, sign: Optional[int] = None) -> BilayerField:
    """
    Reflect the half-graph state across the rung midpoints onto the second layer.

    Dirichlet states are odd (lower layer = -upper), Neumann states even; sign
    overrides that choice. Midpoint jumps come from interpolants of both rung
    halves; the lower layer's vertex conditions use the ends of the lower half.
    """
    sign = SIGN[state.bc] if sign is None else int(sign)
    upper = state.coefficients
    mu, nu = state.mu, state.nu
    B = upper.box[0]
    C, D = (0.0, 1.0) if upper.rung_basis == 'sin' else (1.0, 0.0)
    up_mu, up_nu = (edge_interpolant(C, D, freq, (0.0, 0.5)) for freq in (mu, nu))
    down_mu, down_nu = (edge_interpolant(C, D, freq, (-0.5, 0.0), mirrored=True) for freq in (mu, nu))

    def on_rungs(value_mu: float, value_nu: float, factor: float = 1.0) -> np.ndarray:
        out = factor * value_mu * upper.K
        out[B, B] += factor * value_nu * upper.defect_amplitude
        return out

    def slope(series: Chebyshev, x: float) -> float:
        return float(series.deriv()(x))

    scale = max(float(np.abs(upper.C1).max()), float(np.abs(upper.C2).max()), 1e-300)
    value_jump = on_rungs(up_mu(0.0), up_nu(0.0)) - on_rungs(down_mu(0.0), down_nu(0.0), sign)
    slope_jump = (on_rungs(slope(up_mu, 0.0), slope(up_nu, 0.0))
                  - on_rungs(slope(down_mu, 0.0), slope(down_nu, 0.0), sign))
    value_jump = float(np.abs(value_jump).max()) / scale
    slope_jump = float(np.abs(slope_jump).max()) / scale

    # outward slope at the lower vertex runs against s
    lower_value = on_rungs(down_mu(-0.5), down_nu(-0.5), sign)
    lower_slope = on_rungs(-slope(down_mu, -0.5), -slope(down_nu, -0.5), sign)
    lower = EdgeCoefficients(mu, upper.box, sign * upper.K, sign * upper.C1, sign * upper.D1, sign * upper.C2,
                             sign * upper.D2, upper.rung_basis, nu, state.V0, sign * upper.defect_amplitude)
    residual_lower = max(_grid_vertex_residuals(lower, lower_value, lower_slope))
    logger.debug(f"[QGRAPH] Mirror lift ({state.bc}, sign {sign}): value jump {value_jump:.1e}, "
                 f"slope jump {slope_jump:.1e}, lower residual {residual_lower:.1e}")
    return BilayerField(state, sign, upper, lower.C1, lower.D1, lower.C2, lower.D2, value_jump, slope_jump,
                        state.residual_vertex, residual_lower)


def bound_state(model: GridModel, mu: float, **kwargs):
    """Dispatch to the chain or the grid construction."""
    if model.which == CHAIN_1D:
        return chain1d_bound_state(mu, **kwargs)
    return grid2d_bound_state(mu, model.bc, **kwargs)
