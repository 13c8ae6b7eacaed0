"""
Coupled copies of a periodic operator: A_coupled = I_m (x) A + K (x) L.

Diagonalizing K = U diag(lambda_i) U^H splits the coupled operator into the
blocks A + lambda_i L. With L = lambda0 I, an eigenpair of A + V placed in
one block becomes an eigenpair of the coupled operator that sits inside the
continuous spectrum of another block.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from config.settings import Settings
from models.coupling import CoupledEmbedding, CouplingSpec, HybridState, TwoGraphAngles
from models.lattice import FloquetPoint, LatticeField, PeriodicStencil, SiteDefect
from models.spectra import BandInterval, BandReport
from services.dispersion import multiplicity_1d, spectrum_bands
from services.lattice_core import apply_truncated, scalar_stencil, symbol_eval
from utils.errors import DimensionMismatchError, DomainError, EmbeddingError

logger = logging.getLogger(__name__)

PLUS = '+'
MINUS = '-'


def build_coupled(spec: CouplingSpec) -> PeriodicStencil:
    """Stencil of I_m (x) A + K (x) L on the fiber C^m (x) C^d."""
    m, d = spec.m, spec.base.fiber
    identity = np.eye(m)
    coeffs = {}
    for g in set(spec.base.coeffs) | set(spec.rabi.coeffs):
        coeffs[g] = np.kron(identity, spec.base.coefficient(g)) + np.kron(spec.K, spec.rabi.coefficient(g))
    name = f"coupled[{spec.base.name or 'A'} x{m}]"
    logger.debug(f"[COUPLING] Built {name} with fiber {m * d}")
    return PeriodicStencil(spec.base.dim, m * d, coeffs, name=name)


def two_graph_spec(base: PeriodicStencil, angles: TwoGraphAngles,
                   rabi: Optional[PeriodicStencil] = None) -> CouplingSpec:
    """Two copies with K = [[cos t, e^{ip} sin t], [e^{-ip} sin t, -cos t]] and L = lambda0 I unless given."""
    if rabi is None:
        rabi = scalar_stencil(base.dim, base.fiber, angles.lambda0)
    return CouplingSpec(base, rabi, angles.coupling_matrix())


def rabi_scale(spec: CouplingSpec) -> float:
    """lambda0 of a site-diagonal rabi term L = lambda0 I; anything else cannot carry the embedding."""
    rabi = spec.rabi
    origin = (0,) * rabi.dim
    value = rabi.coefficient(origin)
    scale = float(value[0, 0].real)
    if set(rabi.nonzero_offsets()) - {origin} or not np.allclose(value, scale * np.eye(rabi.fiber), atol=1e-14):
        raise DomainError(f"rabi stencil '{rabi.name}' is not a multiple of the identity")
    return scale


def _fix_column_phases(U: np.ndarray) -> np.ndarray:
    U = U.copy()
    for j in range(U.shape[1]):
        column = U[:, j]
        pivot = column[j] if abs(column[j]) > 1e-8 else column[np.argmax(np.abs(column))]
        U[:, j] = column * (np.conj(pivot) / abs(pivot))
    return U


def hybrid_unitary(K: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition K U = U Lambda with eigenvalues in descending order.

    Column phases are fixed so that the diagonal entry of each column (or
    its largest entry when the diagonal vanishes) is real and positive.
    """
    K = np.asarray(K, dtype=complex)
    if not np.allclose(K, K.conj().T, rtol=0.0, atol=1e-12):
        raise DomainError("coupling matrix K must be Hermitian")
    eigenvalues, U = linalg.eigh(K)
    order = np.argsort(eigenvalues, kind='stable')[::-1]
    return _fix_column_phases(U[:, order]), eigenvalues[order]


def _coupled_symbol(spec: CouplingSpec, z) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    a_hat = symbol_eval(spec.base, z)
    l_hat = symbol_eval(spec.rabi, z)
    big = np.kron(np.eye(spec.m), a_hat) + np.kron(spec.K, l_hat)
    return big, a_hat, l_hat


def conjugation_residual(spec: CouplingSpec, z_samples: Sequence, unitary: Optional[np.ndarray] = None,
                         eigenvalues: Optional[Sequence[float]] = None) -> float:
    """max_z || A_coupled(z)(U x I) - (U x I)(I x A(z) + Lambda x L(z)) ||."""
    if unitary is None or eigenvalues is None:
        unitary, eigenvalues = hybrid_unitary(spec.K)
    lifted = np.kron(unitary, np.eye(spec.base.fiber))
    worst = 0.0
    for z in z_samples:
        big, a_hat, l_hat = _coupled_symbol(spec, z)
        blocks = np.kron(np.eye(spec.m), a_hat) + np.kron(np.diag(eigenvalues), l_hat)
        worst = max(worst, float(np.linalg.norm(big @ lifted - lifted @ blocks, 2)))
    return worst


def factorization_check(spec: CouplingSpec, z, lam: float, relative: bool = True) -> float:
    """
    |det(A_coupled(z) - lambda) - prod_i det(A(z) + lambda_i L(z) - lambda)|.

    The relative form divides by the larger of the two determinants; when both
    vanish the absolute error is returned.
    """
    big, a_hat, l_hat = _coupled_symbol(spec, z)
    full = complex(np.linalg.det(big - lam * np.eye(big.shape[0])))
    _, eigenvalues = hybrid_unitary(spec.K)
    product = complex(1.0)
    for value in eigenvalues:
        product *= np.linalg.det(a_hat + value * l_hat - lam * np.eye(spec.base.fiber))
    error = abs(full - product)
    scale = max(abs(full), abs(product))
    if relative and scale > 0.0:
        return float(error / scale)
    return float(error)


def hybrid_state(u: LatticeField, angles: TwoGraphAngles, branch: str = PLUS) -> HybridState:
    """Place u in H+ = (cos(t/2) u, e^{-ip} sin(t/2) u) or H- = (-e^{ip} sin(t/2) u, cos(t/2) u)."""
    if branch == PLUS:
        weights = angles.plus_vector()
    elif branch == MINUS:
        weights = angles.minus_vector()
    else:
        raise DomainError(f"branch must be '+' or '-', got '{branch}'")
    components = (u.scaled(weights[0]), u.scaled(weights[1]))
    return HybridState(u, branch, components)


def select_lambda0(lam: float, band: Union[BandInterval, Tuple[float, float]]) -> float:
    """lambda0 = (mid(band) - lambda) / 2, placing lambda + 2 lambda0 at the middle of the band."""
    lo, hi = (band.lo, band.hi) if isinstance(band, BandInterval) else band
    return 0.5 * (0.5 * (lo + hi) - lam)


def coupled_bands(base: PeriodicStencil, angles: TwoGraphAngles, n_k: Optional[int] = None) -> BandReport:
    """Bands of the decoupled blocks A + lambda0 and A - lambda0 (they do not depend on theta)."""
    bands = spectrum_bands(base, n_k)
    branches = []
    for shift in (angles.lambda0, -angles.lambda0):
        branches.extend((b.lo + shift, b.hi + shift) for b in bands.bands)
    return BandReport.from_branches(branches, weight=1)


def continuum_witness(stencil: PeriodicStencil, energy: float, margin: float = 1e-6) -> Optional[BandInterval]:
    """Band interval of the stencil whose interior contains the energy, or None."""
    if stencil.dim == 1:
        count = multiplicity_1d(stencil, energy)
        if count.edge or count.count == 0:
            return None
    return spectrum_bands(stencil).witness(energy, margin)


def _interior_residual(stencil: PeriodicStencil, field: LatticeField, defect: Optional[SiteDefect],
                       lam: float) -> float:
    return apply_truncated(stencil, field, defect, lam).sup_norm()


def _embed(A: PeriodicStencil, V: Optional[SiteDefect], u: LatticeField, lam: float, K: np.ndarray,
           lambda0: float, column: np.ndarray, index: int, eigenvalues: np.ndarray, variant: int,
           residual_tol: float) -> CoupledEmbedding:
    if variant not in (1, 2):
        raise DomainError(f"variant must be 1 or 2, got {variant}")
    if u.dim != A.dim or u.fiber != A.fiber:
        raise DimensionMismatchError("eigenfunction does not match the base stencil")
    input_residual = _interior_residual(A, u, V, lam)
    if input_residual > residual_tol:
        raise EmbeddingError(f"(A+V)u = lambda u fails: interior residual {input_residual:.3e} > {residual_tol:.1e}")

    witness = None
    for j, other in enumerate(eigenvalues):
        if j == index:
            continue
        target = lam + (eigenvalues[index] - other) * lambda0
        witness = continuum_witness(A, target)
        if witness is not None:
            logger.info(f"[COUPLING] lambda + ({eigenvalues[index]:.3g} - {other:.3g}) lambda0 = {target:.6g} "
                        f"lies in band [{witness.lo:.6g}, {witness.hi:.6g}]")
            break
    if witness is None:
        raise EmbeddingError("the shifted energy is not interior to the continuous spectrum of A")

    spec = CouplingSpec(A, scalar_stencil(A.dim, A.fiber, lambda0), K)
    operator = build_coupled(spec)
    m = K.shape[0]
    left = np.eye(m) if variant == 1 else np.outer(column, column.conj())
    base_defect = V if V is not None else SiteDefect(A.dim, A.fiber, {})
    defect = base_defect.kron(left)

    state = LatticeField(u.box, np.concatenate([u.values * c for c in column], axis=-1))
    eigenvalue = lam + float(eigenvalues[index]) * lambda0
    residual = _interior_residual(operator, state, defect, eigenvalue)
    if residual > 10.0 * input_residual + 1e-13:
        raise EmbeddingError(f"coupled residual {residual:.3e} exceeds ten times the input residual {input_residual:.3e}")
    logger.info(f"[COUPLING] Embedded eigenvalue {eigenvalue:.6g} (variant {variant}), residual {residual:.3e}")
    return CoupledEmbedding(operator, defect, state, eigenvalue, input_residual, residual, witness,
                            variant, lambda0)


def theorem1_embed(A: PeriodicStencil, V: Optional[SiteDefect], u: LatticeField, lam: float,
                   angles: TwoGraphAngles, variant: int = 1,
                   residual_tol: Optional[float] = None) -> CoupledEmbedding:
    """
    Lift an eigenpair (A + V) u = lambda u to two coupled copies with L = lambda0 I.

    Variant 1 adds V to both copies; variant 2 adds the projection of V onto
    H+, which acts as zero on H-. The lifted state
    (cos(t/2) u, e^{-ip} sin(t/2) u) has eigenvalue lambda + lambda0, which is
    embedded whenever lambda + 2 lambda0 lies inside a band of A.
    """
    residual_tol = Settings.EIGENPAIR_TOL if residual_tol is None else residual_tol
    column = angles.plus_vector()
    result = _embed(A, V, u, lam, angles.coupling_matrix(), angles.lambda0, column, 0,
                    np.array([1.0, -1.0]), variant, residual_tol)
    result.hybrid = hybrid_state(u, angles, PLUS)
    return result


def embed_coupled(A: PeriodicStencil, V: Optional[SiteDefect], u: LatticeField, lam: float, K: np.ndarray,
                  lambda0: float, index: int = 0, variant: int = 1,
                  residual_tol: Optional[float] = None) -> CoupledEmbedding:
    """m-copy version: the state U[:, index] (x) u has eigenvalue lambda + lambda_index * lambda0."""
    residual_tol = Settings.EIGENPAIR_TOL if residual_tol is None else residual_tol
    U, eigenvalues = hybrid_unitary(K)
    if not 0 <= index < len(eigenvalues):
        raise DomainError(f"eigenvector index {index} out of range for m={len(eigenvalues)}")
    return _embed(A, V, u, lam, np.asarray(K, dtype=complex), lambda0, U[:, index], index, eigenvalues,
                  variant, residual_tol)


def random_torus_points(dim: int, count: int, seed: int = 0) -> list:
    """Reproducible sample of Floquet points on the unit torus."""
    rng = np.random.default_rng(seed)
    return [FloquetPoint.from_k(rng.uniform(-np.pi, np.pi, dim)) for _ in range(count)]
