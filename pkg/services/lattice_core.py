"""
Periodic difference operators on Z^n: named stencils, Floquet symbols and
application on truncated boxes.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from models.lattice import FloquetPoint, LatticeField, PeriodicStencil, SelfAdjointReport, SiteDefect
from utils.errors import DimensionMismatchError, DomainError

logger = logging.getLogger(__name__)

ADJOINT_TOL = 1e-13


def example1_stencil() -> PeriodicStencil:
    """Fourth-order chain: A(z) = 2(z + 1/z) + (z^2 + 1/z^2)."""
    return PeriodicStencil.hermitian(1, 1, {(1,): 2.0, (2,): 1.0}, name='example1')


def example2_stencil(a: float, b: float, c: float) -> PeriodicStencil:
    """Two chains with on-site block [[a+b, c], [c, a-b]] and unit hopping along each chain."""
    onsite = np.array([[a + b, c], [c, a - b]], dtype=complex)
    return PeriodicStencil.hermitian(1, 2, {(0,): onsite, (1,): np.eye(2)}, name='example2')


def lattice_laplacian(dim: int) -> PeriodicStencil:
    """Nearest-neighbour stencil with symbol sum_j (z_j + 1/z_j)."""
    half = {}
    for j in range(dim):
        offset = [0] * dim
        offset[j] = 1
        half[tuple(offset)] = 1.0
    return PeriodicStencil.hermitian(dim, 1, half, name=f'laplacian{dim}d')


def scalar_stencil(dim: int, fiber: int, value: float) -> PeriodicStencil:
    """value * I acting site by site."""
    return PeriodicStencil(dim, fiber, {(0,) * dim: value * np.eye(fiber)}, name='scalar')


def _points(stencil: PeriodicStencil, z: Union[FloquetPoint, Sequence[complex], np.ndarray]) -> np.ndarray:
    if isinstance(z, FloquetPoint):
        values = z.as_array()
    else:
        values = np.asarray(z, dtype=complex)
        if values.ndim == 0:
            values = values.reshape(1)
    if values.shape[-1] != stencil.dim:
        raise DimensionMismatchError(f"Floquet point has {values.shape[-1]} components, stencil dim is {stencil.dim}")
    if np.any(values == 0):
        raise DomainError("Floquet multipliers must be nonzero")
    return values


def symbol_grid(stencil: PeriodicStencil, z: np.ndarray) -> np.ndarray:
    """
    Evaluate the symbol on a batch of Floquet points.

    Args:
        stencil: Operator whose symbol is evaluated
        z: Complex array of shape (..., n)

    Returns:
        Array of shape (..., d, d) with sum_g A_g prod_j z_j^{g_j}
    """
    z = _points(stencil, z)
    batch = z.shape[:-1]
    out = np.zeros(batch + (stencil.fiber, stencil.fiber), dtype=complex)
    for g, coefficient in stencil.coeffs.items():
        power = np.prod(z ** np.array(g), axis=-1)
        out += power[..., None, None] * coefficient
    return out


def symbol_on_torus(stencil: PeriodicStencil, ks: Sequence[np.ndarray]) -> np.ndarray:
    """Symbol on the tensor grid of real quasi-momenta (one 1D array per axis), shape (N_1, ..., N_n, d, d)."""
    if len(ks) != stencil.dim:
        raise DimensionMismatchError("one quasi-momentum axis is needed per lattice dimension")
    mesh = np.meshgrid(*ks, indexing='ij')
    shape = mesh[0].shape
    out = np.zeros(shape + (stencil.fiber, stencil.fiber), dtype=complex)
    for g, coefficient in stencil.coeffs.items():
        phase = np.exp(1j * sum(gj * kj for gj, kj in zip(g, mesh)))
        out += phase[..., None, None] * coefficient
    return out


def symbol_eval(stencil: PeriodicStencil, z: Union[FloquetPoint, Sequence[complex]]) -> np.ndarray:
    """Symbol A(z) at a single Floquet point."""
    return symbol_grid(stencil, _points(stencil, z))


def check_self_adjoint(stencil: PeriodicStencil, tol: float = ADJOINT_TOL) -> SelfAdjointReport:
    """List offsets g >=lex 0 where A_{-g} != A_g^H."""
    deviations = stencil.adjoint_deviations()
    violations = [g for g, dev in deviations.items() if dev > tol]
    if violations:
        logger.warning(f"[LATTICE] Stencil '{stencil.name}' is not self-adjoint at offsets {violations}")
    return SelfAdjointReport(violations, max(deviations.values(), default=0.0))


def apply_defect(defect: Optional[SiteDefect], field: LatticeField) -> LatticeField:
    """(V u)(g) = V(g) u(g) on the box of u."""
    values = np.zeros_like(field.values)
    if defect is not None:
        if defect.fiber != field.fiber or defect.dim != field.dim:
            raise DimensionMismatchError("defect and field disagree on dim or fiber")
        for g, matrix in defect.values.items():
            if all(abs(x) <= r for x, r in zip(g, field.box)):
                index = tuple(x + r for x, r in zip(g, field.box))
                values[index] = matrix @ field.values[index]
    return LatticeField(field.box, values)


def apply_truncated(stencil: PeriodicStencil, field: LatticeField, defect: Optional[SiteDefect] = None,
                    lam: float = 0.0) -> LatticeField:
    """
    Residual (A + V - lambda) u on the interior of the field's box.

    The interior is the box shrunk by the stencil degree on every axis, so
    that only rows whose full stencil lies inside the box are reported.
    """
    if field.dim != stencil.dim or field.fiber != stencil.fiber:
        raise DimensionMismatchError(
            f"field (dim={field.dim}, fiber={field.fiber}) does not match stencil "
            f"(dim={stencil.dim}, fiber={stencil.fiber})")
    degree = stencil.degree
    if any(r <= degree for r in field.box):
        raise DomainError(f"box {field.box} must exceed the stencil degree {degree} on every axis")
    inner = tuple(r - degree for r in field.box)
    centre = tuple(slice(degree, degree + 2 * r + 1) for r in inner)
    out = -lam * field.values[centre]
    for g, coefficient in stencil.coeffs.items():
        shifted = tuple(slice(degree + gj, degree + gj + 2 * r + 1) for gj, r in zip(g, inner))
        out = out + field.values[shifted] @ coefficient.T
    residual = LatticeField(inner, out)
    if defect is not None:
        residual = residual + apply_defect(defect, field.crop(inner))
    return residual


def truncated_matrix(stencil: PeriodicStencil, box: Union[int, Sequence[int]],
                     defect: Optional[SiteDefect] = None, lam: float = 0.0) -> sparse.csr_matrix:
    """Sparse matrix of A + V - lambda on the box with zero boundary values outside it."""
    if isinstance(box, (int, np.integer)):
        box = (int(box),) * stencil.dim
    box = tuple(box)
    shape = tuple(2 * r + 1 for r in box)
    d = stencil.fiber
    grid = np.indices(shape).reshape(stencil.dim, -1).T
    size = grid.shape[0] * d
    rows, cols, vals = [], [], []
    for g, coefficient in stencil.coeffs.items():
        target = grid + np.asarray(g)
        inside = np.all((target >= 0) & (target < np.asarray(shape)), axis=1)
        src = np.ravel_multi_index(tuple(grid[inside].T), shape)
        dst = np.ravel_multi_index(tuple(target[inside].T), shape)
        for a in range(d):
            for b in range(d):
                if coefficient[a, b] != 0:
                    rows.append(src * d + a)
                    cols.append(dst * d + b)
                    vals.append(np.full(src.shape, coefficient[a, b]))
    if defect is not None:
        for g, matrix in defect.values.items():
            if all(abs(x) <= r for x, r in zip(g, box)):
                site = np.ravel_multi_index(tuple(x + r for x, r in zip(g, box)), shape)
                for a in range(d):
                    for b in range(d):
                        if matrix[a, b] != 0:
                            rows.append(np.array([site * d + a]))
                            cols.append(np.array([site * d + b]))
                            vals.append(np.array([matrix[a, b]]))
    if rows:
        matrix = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                   shape=(size, size), dtype=complex)
    else:
        matrix = sparse.coo_matrix((size, size), dtype=complex)
    return (matrix - lam * sparse.identity(size, dtype=complex, format='coo')).tocsr()
