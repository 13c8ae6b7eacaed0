from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from models.lattice import LatticeField, SiteDefect


@dataclass
class DecayFit:
    """Log-linear fit log m_r = intercept - alpha * r of sup-norm shell maxima m_r."""

    alpha: float
    r2: float
    intercept: float
    shells: np.ndarray
    radii: np.ndarray

    def to_dict(self) -> Dict:
        return {'alpha': self.alpha, 'r2': self.r2, 'intercept': self.intercept,
                'radii': self.radii, 'shells': self.shells}


@dataclass
class GreensResult:
    """Lattice Green's function u solving (A - lambda) u = delta, with the origin value u0."""

    u: LatticeField
    u0: complex
    lam: float
    quad_n: int
    component: int = 0
    quad_error: float = 0.0

    @property
    def V0(self) -> float:
        return -1.0 / self.u0.real

    def to_dict(self) -> Dict:
        return {'lambda': self.lam, 'u0': self.u0.real, 'u0_imag': self.u0.imag, 'V0': self.V0,
                'quad_n': self.quad_n, 'quad_error': self.quad_error, 'component': self.component,
                'box': list(self.u.box)}


@dataclass
class SupportVerdict:
    """Evidence that a Green's function has unbounded support."""

    laurent_terms: int
    boxes: List[int]
    tails: List[int]
    unbounded: bool
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {'laurent_terms': self.laurent_terms, 'boxes': self.boxes, 'tails': self.tails,
                'unbounded': self.unbounded, 'notes': self.notes}


@dataclass
class Example1Defect:
    """Closed-form single-chain defect with its exponentially decaying eigenfunction."""

    alpha: float
    lam: float
    V0: float
    V1: float
    v: LatticeField
    defect: Optional[SiteDefect] = None
    residual: Optional[float] = None

    def to_dict(self) -> Dict:
        return {'alpha': self.alpha, 'lambda': self.lam, 'V0': self.V0, 'V1': self.V1,
                'residual': self.residual, 'box': list(self.v.box)}
