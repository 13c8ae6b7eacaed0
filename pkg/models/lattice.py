import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import DimensionMismatchError, DomainError

logger = logging.getLogger(__name__)

Offset = Tuple[int, ...]
MatrixLike = Union[complex, float, Sequence, np.ndarray]


def is_lex_nonnegative(g: Sequence[int]) -> bool:
    """True when the first nonzero component of g is positive, or g is zero."""
    for component in g:
        if component != 0:
            return component > 0
    return True


def _as_box(box: Union[int, Sequence[int]], dim: Optional[int] = None) -> Tuple[int, ...]:
    if isinstance(box, (int, np.integer)):
        box = (int(box),) * (dim or 1)
    box = tuple(int(r) for r in box)
    if dim is not None and len(box) != dim:
        raise DimensionMismatchError(f"box {box} does not match lattice dimension {dim}")
    if any(r < 0 for r in box):
        raise DomainError(f"box half-widths must be non-negative, got {box}")
    return box


def _as_matrix(value: MatrixLike, fiber: int) -> np.ndarray:
    matrix = np.array(value, dtype=complex)
    if matrix.ndim == 0:
        matrix = matrix * np.eye(fiber, dtype=complex)
    if matrix.shape != (fiber, fiber):
        raise DimensionMismatchError(f"expected a {fiber}x{fiber} matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DomainError("stencil and defect matrices must be finite")
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True, eq=False)
class PeriodicStencil:
    """
    Finite-degree periodic difference operator on Z^n with a d-dimensional fiber.

    ``coeffs[g]`` is the matrix A_g in (A u)(x) = sum_g A_g u(x + g); the
    symbol is A(z) = sum_g A_g z^g.
    """

    dim: int
    fiber: int
    coeffs: Dict[Offset, np.ndarray]
    name: str = ""

    def __post_init__(self):
        if self.dim < 1 or self.fiber < 1:
            raise DomainError(f"dim and fiber must be positive, got dim={self.dim}, fiber={self.fiber}")
        clean: Dict[Offset, np.ndarray] = {}
        for g, value in self.coeffs.items():
            offset = tuple(int(x) for x in (g if isinstance(g, (tuple, list)) else (g,)))
            if len(offset) != self.dim:
                raise DimensionMismatchError(f"offset {offset} has wrong length for dim={self.dim}")
            matrix = _as_matrix(value, self.fiber)
            if offset in clean:
                matrix = _as_matrix(clean[offset] + matrix, self.fiber)
            clean[offset] = matrix
        object.__setattr__(self, 'coeffs', clean)

    @classmethod
    def hermitian(cls, dim: int, fiber: int, half: Mapping, name: str = "") -> 'PeriodicStencil':
        """Build a self-adjoint stencil from offsets g >=lex 0; A_{-g} is derived as A_g^H."""
        coeffs: Dict[Offset, np.ndarray] = {}
        for g, value in half.items():
            offset = tuple(int(x) for x in (g if isinstance(g, (tuple, list)) else (g,)))
            if not is_lex_nonnegative(offset):
                raise DomainError(f"only offsets g >=lex 0 may be given, got {offset}")
            matrix = _as_matrix(value, fiber)
            if not any(offset):
                if not np.allclose(matrix, matrix.conj().T, rtol=0.0, atol=1e-14):
                    raise DomainError("the zero-offset coefficient must be Hermitian")
                coeffs[offset] = matrix
            else:
                coeffs[offset] = matrix
                coeffs[tuple(-x for x in offset)] = matrix.conj().T
        return cls(dim, fiber, coeffs, name)

    @property
    def offsets(self) -> List[Offset]:
        return sorted(self.coeffs)

    @property
    def degree(self) -> int:
        active = [max(abs(x) for x in g) for g, a in self.coeffs.items() if np.any(a != 0)]
        return max(active, default=0)

    def coefficient(self, g: Sequence[int]) -> np.ndarray:
        offset = tuple(int(x) for x in g)
        if offset in self.coeffs:
            return self.coeffs[offset]
        return np.zeros((self.fiber, self.fiber), dtype=complex)

    def nonzero_offsets(self) -> List[Offset]:
        return [g for g in self.offsets if np.any(self.coeffs[g] != 0)]

    @property
    def is_constant(self) -> bool:
        """True when no coefficient away from the zero offset is nonzero."""
        return all(not any(g) for g in self.nonzero_offsets())

    def half_coeffs(self) -> Dict[Offset, np.ndarray]:
        return {g: a for g, a in self.coeffs.items() if is_lex_nonnegative(g)}

    def adjoint_deviations(self) -> Dict[Offset, float]:
        """max |A_{-g} - A_g^H| for every offset g >=lex 0 touched by the stencil."""
        touched = {g if is_lex_nonnegative(g) else tuple(-x for x in g) for g in self.coeffs}
        return {g: float(np.abs(self.coefficient(tuple(-x for x in g)) - self.coefficient(g).conj().T).max())
                for g in sorted(touched)}


@dataclass(frozen=True)
class FloquetPoint:
    """Floquet multiplier z (and optionally the quasi-momentum k with z = e^{ik})."""

    z: Tuple[complex, ...]
    k: Optional[Tuple[complex, ...]] = None

    def __post_init__(self):
        z = tuple(complex(v) for v in self.z)
        if any(v == 0 for v in z):
            raise DomainError(f"Floquet multipliers must be nonzero, got {z}")
        object.__setattr__(self, 'z', z)
        if self.k is not None:
            k = tuple(complex(v) for v in self.k)
            if len(k) != len(z) or not np.allclose(np.exp(1j * np.array(k)), np.array(z), rtol=1e-12, atol=0.0):
                raise DomainError("quasi-momenta k are inconsistent with multipliers z")
            object.__setattr__(self, 'k', k)

    @classmethod
    def from_k(cls, k: Union[complex, Sequence[complex]]) -> 'FloquetPoint':
        ks = tuple(np.atleast_1d(np.asarray(k, dtype=complex)).tolist())
        return cls(tuple(np.exp(1j * np.array(ks)).tolist()), ks)

    @property
    def dim(self) -> int:
        return len(self.z)

    def as_array(self) -> np.ndarray:
        return np.array(self.z, dtype=complex)


@dataclass(frozen=True, eq=False)
class LatticeField:
    """
    Complex d-vector field on the box prod_j [-R_j, R_j] of Z^n.

    ``values`` has shape (2R_1+1, ..., 2R_n+1, d); lattice point g lives at
    array index g + R.
    """

    box: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        box = _as_box(self.box)
        values = np.array(self.values, dtype=complex)
        expected = tuple(2 * r + 1 for r in box)
        if values.ndim != len(box) + 1 or values.shape[:-1] != expected:
            raise DimensionMismatchError(f"values shape {values.shape} does not match box {box}")
        if not np.all(np.isfinite(values)):
            raise DomainError("lattice field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'box', box)
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, box: Union[int, Sequence[int]], fiber: int = 1, dim: Optional[int] = None) -> 'LatticeField':
        box = _as_box(box, dim)
        return cls(box, np.zeros(tuple(2 * r + 1 for r in box) + (fiber,), dtype=complex))

    @classmethod
    def delta(cls, box: Union[int, Sequence[int]], fiber: int = 1, component: int = 0,
              dim: Optional[int] = None) -> 'LatticeField':
        box = _as_box(box, dim)
        values = np.zeros(tuple(2 * r + 1 for r in box) + (fiber,), dtype=complex)
        values[box + (component,)] = 1.0
        return cls(box, values)

    @classmethod
    def from_function(cls, box: Union[int, Sequence[int]], fiber: int,
                      func: Callable[[Offset], MatrixLike], dim: Optional[int] = None) -> 'LatticeField':
        box = _as_box(box, dim)
        values = np.zeros(tuple(2 * r + 1 for r in box) + (fiber,), dtype=complex)
        for index in np.ndindex(*values.shape[:-1]):
            g = tuple(i - r for i, r in zip(index, box))
            values[index] = np.broadcast_to(np.asarray(func(g), dtype=complex), (fiber,))
        return cls(box, values)

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def fiber(self) -> int:
        return self.values.shape[-1]

    def at(self, g: Sequence[int]) -> np.ndarray:
        index = tuple(int(x) + r for x, r in zip(g, self.box))
        if any(i < 0 or i > 2 * r for i, r in zip(index, self.box)):
            raise DomainError(f"site {tuple(g)} lies outside the box {self.box}")
        return self.values[index]

    def sites(self) -> Iterator[Offset]:
        for index in np.ndindex(*self.values.shape[:-1]):
            yield tuple(i - r for i, r in zip(index, self.box))

    def crop(self, box: Union[int, Sequence[int]]) -> 'LatticeField':
        box = _as_box(box, self.dim)
        if any(r > R for r, R in zip(box, self.box)):
            raise DomainError(f"cannot crop box {self.box} to the larger box {box}")
        slices = tuple(slice(R - r, R + r + 1) for r, R in zip(box, self.box))
        return LatticeField(box, self.values[slices])

    def radius_grid(self) -> np.ndarray:
        """Sup-norm distance |g|_inf of every site from the origin."""
        axes = [np.abs(np.arange(-r, r + 1)) for r in self.box]
        grids = np.meshgrid(*axes, indexing='ij')
        return np.maximum.reduce(grids) if len(grids) > 1 else grids[0]

    def site_norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)

    def sup_norm(self) -> float:
        return float(self.site_norms().max(initial=0.0))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values.ravel()))

    def shell_maxima(self) -> np.ndarray:
        """Largest site norm on each sup-norm shell |g|_inf = r, r = 0..min(box)."""
        radius = self.radius_grid()
        norms = self.site_norms()
        return np.array([norms[radius == r].max() for r in range(min(self.box) + 1)])

    def tail_radius(self, tol: float, relative: bool = True) -> int:
        """Largest |g|_inf whose site norm exceeds tol (times the sup norm when relative)."""
        threshold = tol * self.sup_norm() if relative else tol
        radius = self.radius_grid()
        above = radius[self.site_norms() > threshold]
        return int(above.max()) if above.size else -1

    def scaled(self, factor: complex) -> 'LatticeField':
        return LatticeField(self.box, self.values * factor)

    def __add__(self, other: 'LatticeField') -> 'LatticeField':
        if self.box != other.box or self.fiber != other.fiber:
            raise DimensionMismatchError("fields must share box and fiber to be added")
        return LatticeField(self.box, self.values + other.values)


@dataclass(frozen=True, eq=False)
class SiteDefect:
    """Site-diagonal perturbation (V u)(g) = V(g) u(g) with finitely many nonzero sites."""

    dim: int
    fiber: int
    values: Dict[Offset, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean: Dict[Offset, np.ndarray] = {}
        for g, value in self.values.items():
            site = tuple(int(x) for x in (g if isinstance(g, (tuple, list)) else (g,)))
            if len(site) != self.dim:
                raise DimensionMismatchError(f"defect site {site} has wrong length for dim={self.dim}")
            clean[site] = _as_matrix(value, self.fiber)
        object.__setattr__(self, 'values', clean)

    @classmethod
    def single_site(cls, dim: int, fiber: int, matrix: MatrixLike,
                    site: Optional[Sequence[int]] = None) -> 'SiteDefect':
        site = tuple(site) if site is not None else (0,) * dim
        return cls(dim, fiber, {site: matrix})

    @property
    def sites(self) -> List[Offset]:
        return sorted(self.values)

    @property
    def radius(self) -> int:
        return max((max(abs(x) for x in g) for g in self.values), default=0)

    def at(self, g: Sequence[int]) -> np.ndarray:
        site = tuple(int(x) for x in g)
        if site in self.values:
            return self.values[site]
        return np.zeros((self.fiber, self.fiber), dtype=complex)

    def shifted(self, site: Sequence[int], delta: float) -> 'SiteDefect':
        """Copy with delta * I added at one site."""
        values = dict(self.values)
        key = tuple(int(x) for x in site)
        values[key] = self.at(key) + delta * np.eye(self.fiber)
        return SiteDefect(self.dim, self.fiber, values)

    def kron(self, left: np.ndarray) -> 'SiteDefect':
        """Lift to the fiber C^m (x) C^d as left (x) V(g)."""
        left = np.asarray(left, dtype=complex)
        return SiteDefect(self.dim, left.shape[0] * self.fiber,
                          {g: np.kron(left, v) for g, v in self.values.items()})

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return all(np.allclose(v, v.conj().T, rtol=0.0, atol=atol) for v in self.values.values())


@dataclass
class SelfAdjointReport:
    """Offsets g >=lex 0 where A_{-g} differs from A_g^H."""

    violations: List[Offset] = field(default_factory=list)
    max_deviation: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict:
        return {'passed': self.passed, 'violations': [list(g) for g in self.violations],
                'max_deviation': self.max_deviation}
