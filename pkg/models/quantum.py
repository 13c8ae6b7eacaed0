from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.greens import DecayFit
from models.spectra import BandInterval
from utils.errors import DomainError

CHAIN_1D = 'chain1d'
BILAYER_2D = 'bilayer2d'
NEUMANN = 'neumann'
DIRICHLET = 'dirichlet'
SYMMETRIC = 'sym'
ANTISYMMETRIC = 'anti'


def normalize_bc(bc: str) -> str:
    value = (bc or '').strip().lower()
    if value in ('n', NEUMANN):
        return NEUMANN
    if value in ('d', DIRICHLET):
        return DIRICHLET
    raise DomainError(f"boundary condition must be 'neumann' or 'dirichlet', got '{bc}'")


def normalize_parity(parity: str) -> str:
    value = (parity or '').strip().lower()
    if value in ('sym', 'symmetric', '+'):
        return SYMMETRIC
    if value in ('anti', 'antisymmetric', '-'):
        return ANTISYMMETRIC
    raise DomainError(f"parity must be 'sym' or 'anti', got '{parity}'")


@dataclass(frozen=True)
class GridModel:
    """
    One of the two fixed metric-graph models.

    Horizontal edges e1, e2 are parametrized by [0, 1]. The chain's rung e0
    is [-1/2, 1/2]; the grid's half-graph keeps the dangling half edge e0'
    on [0, 1/2] with the free vertex at x = 0.
    """

    which: str
    bc: Optional[str] = None

    def __post_init__(self):
        if self.which not in (CHAIN_1D, BILAYER_2D):
            raise DomainError(f"unknown quantum graph model '{self.which}'")
        if self.which == BILAYER_2D:
            object.__setattr__(self, 'bc', normalize_bc(self.bc))

    @property
    def dim(self) -> int:
        return 1 if self.which == CHAIN_1D else 2

    @property
    def edge_length(self) -> float:
        return 1.0

    @property
    def rung(self) -> Tuple[float, float]:
        return (-0.5, 0.5) if self.which == CHAIN_1D else (0.0, 0.5)

    @property
    def companion_bc(self) -> Optional[str]:
        """Boundary condition whose band must host the embedded eigenvalue."""
        if self.which == CHAIN_1D:
            return None
        return NEUMANN if self.bc == DIRICHLET else DIRICHLET


@dataclass
class EdgeCoefficients:
    """
    Per-cell coefficients u(x) = C cos(mu x) + D sin(mu x)/mu on e1, e2 and K on the rung.

    Arrays are indexed like a LatticeField: cell g sits at index g + box.
    The rung basis is sin(mu x)/mu (odd rung or Dirichlet) or cos(mu x)
    (Neumann). The defect rung in cell 0 is stored separately in the nu basis.
    """

    mu: float
    box: Tuple[int, ...]
    K: np.ndarray
    C1: np.ndarray
    D1: np.ndarray
    C2: np.ndarray
    D2: np.ndarray
    rung_basis: str
    nu: float
    V0: float
    defect_amplitude: float

    def __post_init__(self):
        for name in ('K', 'C1', 'D1', 'C2', 'D2'):
            values = np.asarray(getattr(self, name))
            if not np.all(np.isfinite(values)):
                raise DomainError(f"edge coefficients {name} must be finite")

    def index(self, g) -> Tuple[int, ...]:
        return tuple(int(x) + r for x, r in zip(g, self.box))

    def cells(self) -> List[Tuple[int, ...]]:
        return [tuple(i - r for i, r in zip(index, self.box)) for index in np.ndindex(*self.K.shape)]

    def rows(self) -> List[Dict]:
        labels = ['g'] if len(self.box) == 1 else ['g1', 'g2']
        out = []
        for g in self.cells():
            i = self.index(g)
            row = {label: value for label, value in zip(labels, g)}
            row.update({'K': float(np.real(self.K[i])), 'C1': float(np.real(self.C1[i])),
                        'D1': float(np.real(self.D1[i])), 'C2': float(np.real(self.C2[i])),
                        'D2': float(np.real(self.D2[i]))})
            out.append(row)
        return out


@dataclass
class SecularEval:
    """Secular matrix of one cell at (mu, k) and its determinant."""

    mu: float
    k: Tuple[complex, ...]
    matrix: np.ndarray
    det: complex
    det_closed: complex
    constants: Optional[Tuple[float, float, float, float]] = None
    rhs: Optional[np.ndarray] = None

    @property
    def det_error(self) -> float:
        return float(abs(self.det - self.det_closed))

    def to_dict(self) -> Dict:
        return {'mu': self.mu, 'k': list(self.k), 'det': self.det, 'det_closed': self.det_closed,
                'constants': list(self.constants) if self.constants else None}


@dataclass
class ChainBoundState:
    """Bound state of the decorated chain spliced from decaying solutions on both sides of the defect rung."""

    mu: float
    z: float
    nu: float
    V0: float
    coefficients: EdgeCoefficients
    vertex_values: np.ndarray
    residual_continuity: float
    residual_flux: float
    decay_ratio_error: float
    reflection_error: float
    antisymmetry_error: float
    embedded: bool
    witness: Optional[BandInterval]
    decay: Optional[DecayFit] = None

    @property
    def residual_vertex(self) -> float:
        return max(self.residual_continuity, self.residual_flux)

    def to_dict(self) -> Dict:
        return {
            'mu': self.mu, 'z': self.z, 'nu': self.nu, 'V0': self.V0,
            'residual_vertex': self.residual_vertex,
            'residual_continuity': self.residual_continuity,
            'residual_flux': self.residual_flux,
            'decay_ratio_error': self.decay_ratio_error,
            'reflection_error': self.reflection_error,
            'antisymmetry_error': self.antisymmetry_error,
            'decay_alpha': self.decay.alpha if self.decay else None,
            'embedded': self.embedded,
            'witness': self.witness.to_dict() if self.witness else None,
            'box': list(self.coefficients.box),
        }


@dataclass
class GridBoundState:
    """Half-graph bound state of the bilayer grid obtained by inverse Floquet transform."""

    mu: float
    nu: float
    V0: float
    bc: str
    quad_n: int
    coefficients: EdgeCoefficients
    defect_remainder: float
    residual_continuity: float
    residual_flux: float
    decay: Optional[DecayFit]
    predicted_alpha: float
    embedded: bool
    witness: Optional[BandInterval]
    boxes: List[int] = field(default_factory=list)
    tails: List[int] = field(default_factory=list)

    @property
    def residual_vertex(self) -> float:
        return max(self.residual_continuity, self.residual_flux)

    @property
    def box(self) -> int:
        return self.coefficients.box[0]

    def to_dict(self) -> Dict:
        return {
            'mu': self.mu, 'nu': self.nu, 'V0': self.V0, 'bc': self.bc, 'quad_n': self.quad_n,
            'box': self.box,
            'residual_vertex': self.residual_vertex,
            'residual_continuity': self.residual_continuity,
            'residual_flux': self.residual_flux,
            'defect_remainder': self.defect_remainder,
            'decay_alpha': self.decay.alpha if self.decay else None,
            'decay_r2': self.decay.r2 if self.decay else None,
            'predicted_alpha': self.predicted_alpha,
            'embedded': self.embedded,
            'witness': self.witness.to_dict() if self.witness else None,
            'tails': {'boxes': self.boxes, 'tails': self.tails},
        }


@dataclass
class BilayerField:
    """Bound state on the full bilayer obtained by reflecting the half-graph state across rung midpoints."""

    state: GridBoundState
    sign: int
    upper: EdgeCoefficients
    lower_C1: np.ndarray
    lower_D1: np.ndarray
    lower_C2: np.ndarray
    lower_D2: np.ndarray
    midpoint_value_jump: float
    midpoint_derivative_jump: float
    residual_upper: float
    residual_lower: float

    def to_dict(self) -> Dict:
        return {'sign': self.sign, 'midpoint_value_jump': self.midpoint_value_jump,
                'midpoint_derivative_jump': self.midpoint_derivative_jump,
                'residual_upper': self.residual_upper, 'residual_lower': self.residual_lower}
