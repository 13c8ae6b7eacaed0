import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from models.lattice import LatticeField, PeriodicStencil, SiteDefect
from models.spectra import BandInterval
from utils.errors import DimensionMismatchError, DomainError

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """m copies of a periodic operator A coupled through K (x) L."""

    base: PeriodicStencil
    rabi: PeriodicStencil
    K: np.ndarray

    def __post_init__(self):
        K = np.array(self.K, dtype=complex)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise DimensionMismatchError(f"K must be square, got shape {K.shape}")
        if K.shape[0] < 2:
            raise DomainError("at least two graphs must be coupled (m >= 2)")
        if not np.allclose(K, K.conj().T, rtol=0.0, atol=HERMITIAN_TOL):
            raise DomainError("coupling matrix K must be Hermitian")
        if (self.base.dim, self.base.fiber) != (self.rabi.dim, self.rabi.fiber):
            raise DimensionMismatchError(
                f"base (dim={self.base.dim}, fiber={self.base.fiber}) and rabi "
                f"(dim={self.rabi.dim}, fiber={self.rabi.fiber}) stencils differ")
        bad = [g for g, dev in self.rabi.adjoint_deviations().items() if dev > HERMITIAN_TOL]
        if bad:
            raise DomainError(f"rabi stencil is not self-adjoint at offsets {bad}")
        K.setflags(write=False)
        object.__setattr__(self, 'K', K)

    @property
    def m(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class TwoGraphAngles:
    """Bias/coupling mix theta, coupling phase phi and Rabi scale lambda0 for two coupled copies."""

    theta: float
    phi: float = 0.0
    lambda0: float = 1.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.theta, self.phi, self.lambda0)):
            raise DomainError("theta, phi and lambda0 must be finite")

    def coupling_matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        e = complex(math.cos(self.phi), math.sin(self.phi))
        return np.array([[c, e * s], [e.conjugate() * s, -c]], dtype=complex)

    def plus_vector(self) -> np.ndarray:
        half = 0.5 * self.theta
        return np.array([math.cos(half), np.exp(-1j * self.phi) * math.sin(half)], dtype=complex)

    def minus_vector(self) -> np.ndarray:
        half = 0.5 * self.theta
        return np.array([-np.exp(1j * self.phi) * math.sin(half), math.cos(half)], dtype=complex)

    def unitary(self) -> np.ndarray:
        """Columns span the +1 and -1 eigenspaces of the coupling matrix."""
        return np.column_stack([self.plus_vector(), self.minus_vector()])

    def plus_projector(self) -> np.ndarray:
        v = self.plus_vector()
        return np.outer(v, v.conj())


@dataclass(frozen=True, eq=False)
class HybridState:
    """A field u placed in one of the invariant subspaces H+ or H- of two coupled copies."""

    u: LatticeField
    branch: str
    components: Tuple[LatticeField, LatticeField]

    def combined(self) -> LatticeField:
        """Field on the coupled fiber C^2 (x) C^d (first copy, then second)."""
        first, second = self.components
        return LatticeField(self.u.box, np.concatenate([first.values, second.values], axis=-1))

    def energy_split(self) -> Tuple[float, float]:
        first, second = self.components
        return first.norm() ** 2, second.norm() ** 2


@dataclass
class CoupledEmbedding:
    """Coupled operator with its defect, the lifted eigenfunction and the certified eigenvalue."""

    operator: PeriodicStencil
    defect: SiteDefect
    state: LatticeField
    eigenvalue: float
    input_residual: float
    residual: float
    witness: Optional[BandInterval]
    variant: int
    lambda0: float
    hybrid: Optional[HybridState] = None

    @property
    def embedded(self) -> bool:
        return self.witness is not None

    def to_dict(self) -> Dict:
        return {
            'eigenvalue': self.eigenvalue,
            'variant': self.variant,
            'lambda0': self.lambda0,
            'input_residual': self.input_residual,
            'residual': self.residual,
            'embedded': self.embedded,
            'witness': self.witness.to_dict() if self.witness else None,
            'fiber': self.operator.fiber,
            'energy_split': list(self.hybrid.energy_split()) if self.hybrid else None,
        }
