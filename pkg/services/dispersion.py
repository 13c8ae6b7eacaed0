"""
Dispersion relations det(A(z) - lambda) = 0: Floquet-multiplier counting on
the unit circle, sampled band structure and the closed-form branches of the
two single-lattice examples.
"""

import cmath
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from config.settings import Settings
from models.lattice import FloquetPoint, PeriodicStencil
from models.spectra import BandReport, BranchValue, RootCount
from services.lattice_core import example1_stencil, example2_stencil, symbol_eval, symbol_grid, symbol_on_torus
from utils.errors import DomainError

logger = logging.getLogger(__name__)

EDGE_WINDOW = 1e-5
COEFF_TRIM = 1e-14


def det_symbol(stencil: PeriodicStencil, z: Union[FloquetPoint, Sequence[complex]], lam: float) -> complex:
    """det(A(z) - lambda I)."""
    matrix = symbol_eval(stencil, z)
    return complex(np.linalg.det(matrix - lam * np.eye(stencil.fiber)))


def branch_roots(w: complex) -> BranchValue:
    """Roots of z^2 - w z + 1 = 0 ordered by modulus."""
    w = complex(w)
    s = cmath.sqrt(w * w - 4.0)
    # pick the sign that avoids cancellation, then recover the partner from z * (1/z) = 1
    big = 0.5 * (w + s) if abs(w + s) >= abs(w - s) else 0.5 * (w - s)
    small = 1.0 / big
    if abs(small) > abs(big):
        small, big = big, small
    return BranchValue(w, (small, big))


def dispersion_polynomial(stencil: PeriodicStencil, lam: float) -> np.ndarray:
    """
    Coefficients (lowest degree first) of z^{D d} det(A(z) - lambda) for a 1D stencil.

    The polynomial has degree at most 2 D d; it is sampled at 2 D d + 1
    roots of unity and recovered exactly by a discrete Fourier transform.
    """
    if stencil.dim != 1:
        raise DomainError("multiplier counting is defined for one-dimensional stencils only")
    shift = stencil.degree * stencil.fiber
    n_points = 2 * shift + 1
    nodes = np.exp(2j * np.pi * np.arange(n_points) / n_points)
    symbols = symbol_grid(stencil, nodes[:, None]) - lam * np.eye(stencil.fiber)
    samples = nodes ** shift * np.linalg.det(symbols)
    coefficients = np.fft.fft(samples) / n_points
    return coefficients


def _polynomial_roots(coefficients: np.ndarray) -> np.ndarray:
    scale = np.abs(coefficients).max(initial=0.0)
    if scale == 0.0:
        raise DomainError("dispersion polynomial vanishes identically (flat band at this energy)")
    keep = np.nonzero(np.abs(coefficients) > COEFF_TRIM * scale)[0]
    trimmed = coefficients[keep[0]:keep[-1] + 1]
    if trimmed.size < 2:
        return np.zeros(0, dtype=complex)
    companion = np.polynomial.polynomial.polycompanion(trimmed)
    return np.linalg.eigvals(companion)


def multiplicity_1d(stencil: PeriodicStencil, lam: float, tol_circle: Optional[float] = None) -> RootCount:
    """
    Count unit-modulus Floquet multipliers at energy lambda.

    Roots come from companion-matrix eigenvalues. Near-circle roots that are
    not cleanly on the circle, or that nearly coincide, mark a band edge.
    """
    tol_circle = Settings.TOL_CIRCLE if tol_circle is None else tol_circle
    roots = _polynomial_roots(dispersion_polynomial(stencil, lam))
    distance = np.abs(np.abs(roots) - 1.0)
    on_circle = roots[distance < tol_circle]
    near = roots[distance < EDGE_WINDOW]
    edge = bool(near.size > on_circle.size)
    for i in range(near.size):
        for j in range(i + 1, near.size):
            if abs(near[i] - near[j]) < EDGE_WINDOW:
                edge = True
    if edge:
        logger.info(f"[DISPERSION] lambda={lam} sits at a band edge of '{stencil.name}'")
    return RootCount(int(on_circle.size), edge, roots, float(lam))


def example1_branches(lam: float) -> Tuple[complex, complex]:
    """w = z + 1/z on the two branches -1 +/- sqrt(3 + lambda) of the fourth-order chain."""
    root = cmath.sqrt(3.0 + lam)
    return -1.0 + root, -1.0 - root


def example1_branch_count(lam: float) -> int:
    """Unit-modulus multipliers predicted by the branch test |w| <= 2 with w real."""
    count = 0
    for w in example1_branches(lam):
        if abs(w.imag) < 1e-14 and abs(w.real) <= 2.0:
            count += 2
    return count


def sample_multiplicities(report: BandReport, stencil: PeriodicStencil, samples: Sequence[float]) -> BandReport:
    """Attach multiplier counts (None at band edges) at the given energies to a 1D band report."""
    report.lambda_grid = [float(x) for x in samples]
    report.multiplicity = []
    for lam in report.lambda_grid:
        result = multiplicity_1d(stencil, lam)
        report.multiplicity.append(None if result.edge else result.count)
    return report


def example1_bands(samples: int = 200) -> BandReport:
    """
    Bands of A(z) = 2(z + 1/z) + (z^2 + 1/z^2), i.e. lambda = 4 cos k + 2 cos 2k.

    The '+' branch w = -1 + sqrt(3 + lambda) stays in [-2, 2] for lambda in
    [-3, 6]; the '-' branch w = -1 - sqrt(3 + lambda) only for lambda in [-3, -2].
    """
    branches = [(-3.0, 6.0), (-3.0, -2.0)]
    report = BandReport.from_branches(branches, weight=2)
    if samples:
        sample_multiplicities(report, example1_stencil(), np.linspace(-3.0, 6.0, samples))
    return report


def example2_bands(a: float, b: float, c: float, samples: int = 0) -> BandReport:
    """Bands (a-2, a+2) +/- sqrt(b^2 + c^2) of two coupled chains."""
    r = math.hypot(b, c)
    branches = [(a - 2.0 - r, a + 2.0 - r), (a - 2.0 + r, a + 2.0 + r)]
    report = BandReport.from_branches(branches, weight=2)
    if samples:
        lo, hi = a - 3.0 - r, a + 3.0 + r
        sample_multiplicities(report, example2_stencil(a, b, c), np.linspace(lo, hi, samples))
    return report


def _branch_value(stencil: PeriodicStencil, branch: int, sign: float) -> Callable[[np.ndarray], float]:
    def value(k) -> float:
        z = np.exp(1j * np.atleast_1d(np.asarray(k, dtype=float)))
        return sign * float(np.linalg.eigvalsh(symbol_grid(stencil, z))[branch])
    return value


def _refine_extremum(stencil: PeriodicStencil, branch: int, k0: np.ndarray, sign: float, step: float) -> float:
    """Polish a grid extremum of one eigenvalue branch; sign=-1 turns a maximum into a minimum."""
    objective = _branch_value(stencil, branch, sign)
    if stencil.dim == 1:
        result = minimize_scalar(objective, bounds=(k0[0] - step, k0[0] + step), method='bounded',
                                 options={'xatol': 1e-12})
    else:
        result = minimize(objective, k0, method='Nelder-Mead', options={'xatol': 1e-10, 'fatol': 1e-15})
    return sign * float(result.fun)


def spectrum_bands(stencil: PeriodicStencil, n_k: Optional[int] = None, refine: bool = True) -> BandReport:
    """
    Bands of any stencil from sorted eigenvalue branches of A(e^{ik}) on a uniform k-grid.

    Each sorted branch is continuous on the torus, so its range is an
    interval; the multiplicity label counts covering branches. The grid
    always contains k = 0 and k = pi, and each branch extremum found on it
    is polished with scipy.optimize.
    """
    n_k = Settings.BAND_SAMPLES if n_k is None else n_k
    n_k += n_k % 2
    axis = 2.0 * np.pi * np.arange(n_k) / n_k
    symbols = symbol_on_torus(stencil, [axis] * stencil.dim)
    eigenvalues = np.linalg.eigvalsh(symbols).reshape(-1, stencil.fiber)
    grid_shape = (n_k,) * stencil.dim
    step = 2.0 * np.pi / n_k
    branches = []
    for j in range(stencil.fiber):
        lo, hi = float(eigenvalues[:, j].min()), float(eigenvalues[:, j].max())
        if refine:
            k_lo = axis[np.array(np.unravel_index(eigenvalues[:, j].argmin(), grid_shape))]
            k_hi = axis[np.array(np.unravel_index(eigenvalues[:, j].argmax(), grid_shape))]
            lo = min(lo, _refine_extremum(stencil, j, k_lo, 1.0, step))
            hi = max(hi, _refine_extremum(stencil, j, k_hi, -1.0, step))
        branches.append((lo, hi))
    logger.debug(f"[DISPERSION] Branches of '{stencil.name}': {branches}")
    return BandReport.from_branches(branches, weight=1)


def dispersion_samples(stencil: PeriodicStencil, n_k: int = 400) -> List[dict]:
    """(k, lambda) rows for every eigenvalue branch of a 1D stencil over k in [-pi, pi]."""
    if stencil.dim != 1:
        raise DomainError("dispersion samples are produced for one-dimensional stencils")
    ks = np.linspace(-np.pi, np.pi, n_k)
    eigenvalues = np.linalg.eigvalsh(symbol_on_torus(stencil, [ks]))
    rows = []
    for j in range(stencil.fiber):
        for k, lam in zip(ks, eigenvalues[:, j]):
            rows.append({'branch': j, 'k': float(k), 'lambda': float(lam)})
    return rows


def example1_dispersion(n_k: int = 400) -> List[dict]:
    """Closed-form curve lambda = 4 cos k + 2 cos 2k of the fourth-order chain, with its branch count."""
    rows = []
    for k in np.linspace(-np.pi, np.pi, n_k):
        lam = 4.0 * math.cos(k) + 2.0 * math.cos(2.0 * k)
        rows.append({'k': float(k), 'lambda': lam, 'multiplicity': example1_branch_count(lam)})
    return rows
