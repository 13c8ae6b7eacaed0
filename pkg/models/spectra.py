from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class BandInterval:
    """Closed interval of the spectral variable carrying a multiplicity label."""

    lo: float
    hi: float
    mult: int = 1

    def contains(self, x: float, margin: float = 0.0) -> bool:
        return self.lo + margin < x < self.hi - margin

    def to_dict(self) -> Dict:
        return {'lo': self.lo, 'hi': self.hi, 'mult': self.mult}


@dataclass
class BandReport:
    """
    Band data for one operator.

    ``bands`` are the raw branch images (one per dispersion branch),
    ``intervals`` the non-overlapping pieces of their union labelled with
    multiplicity. ``multiplicity`` holds one entry per ``lambda_grid``
    sample; ``None`` marks a band edge.
    """

    variable: str = 'lambda'
    bands: List[BandInterval] = field(default_factory=list)
    intervals: List[BandInterval] = field(default_factory=list)
    lambda_grid: List[float] = field(default_factory=list)
    multiplicity: List[Optional[int]] = field(default_factory=list)

    @classmethod
    def from_branches(cls, branches: Sequence[Tuple[float, float]], weight: int = 2,
                      variable: str = 'lambda') -> 'BandReport':
        """Stack branch intervals; each piece's multiplicity is weight times the number of covering branches."""
        bands = [BandInterval(float(lo), float(hi), weight) for lo, hi in branches if hi >= lo]
        points = sorted({b.lo for b in bands} | {b.hi for b in bands})
        pieces: List[BandInterval] = []
        for left, right in zip(points[:-1], points[1:]):
            middle = 0.5 * (left + right)
            count = sum(1 for b in bands if b.lo < middle < b.hi)
            if count == 0:
                continue
            mult = weight * count
            if pieces and pieces[-1].hi == left and pieces[-1].mult == mult:
                pieces[-1] = BandInterval(pieces[-1].lo, right, mult)
            else:
                pieces.append(BandInterval(left, right, mult))
        # degenerate (zero-width) branches still belong to the spectrum
        for b in bands:
            if b.lo == b.hi and not any(p.lo <= b.lo <= p.hi for p in pieces):
                pieces.append(BandInterval(b.lo, b.hi, weight))
        pieces.sort(key=lambda p: (p.lo, p.hi))
        return cls(variable=variable, bands=bands, intervals=pieces)

    def span(self) -> List[Tuple[float, float]]:
        """Union of all bands as disjoint closed intervals."""
        merged: List[List[float]] = []
        for piece in sorted(self.intervals, key=lambda p: p.lo):
            if merged and piece.lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], piece.hi)
            else:
                merged.append([piece.lo, piece.hi])
        return [(lo, hi) for lo, hi in merged]

    def witness(self, x: float, margin: float = 0.0) -> Optional[BandInterval]:
        """Band interval containing x in its interior (at distance > margin from the edges)."""
        for piece in self.intervals:
            if piece.contains(x, margin):
                return piece
        # x may sit on an interior breakpoint between two stacked pieces
        for lo, hi in self.span():
            if lo + margin < x < hi - margin:
                covering = [p for p in self.intervals if p.lo <= x <= p.hi]
                return BandInterval(lo, hi, max(p.mult for p in covering))
        return None

    def multiplicity_at(self, x: float) -> int:
        return sum(b.mult for b in self.bands if b.lo < x < b.hi)

    def to_dict(self) -> Dict:
        return {
            'variable': self.variable,
            'bands': [b.to_dict() for b in self.bands],
            'intervals': [p.to_dict() for p in self.intervals],
            'span': [list(s) for s in self.span()],
            'samples': [{'x': x, 'mult': m if m is not None else 'edge'}
                        for x, m in zip(self.lambda_grid, self.multiplicity)],
        }


@dataclass(frozen=True)
class BranchValue:
    """Solutions z, 1/z of z + 1/z = w, the one with |z| <= 1 first."""

    w: complex
    roots: Tuple[complex, complex]

    @property
    def decaying(self) -> complex:
        return self.roots[0]


@dataclass
class RootCount:
    """Unit-modulus Floquet multipliers of a 1D dispersion polynomial."""

    count: int
    edge: bool
    roots: np.ndarray
    lam: float

    @property
    def value(self):
        return 'edge' if self.edge else self.count

    def to_dict(self) -> Dict:
        return {'lambda': self.lam, 'multiplicity': self.value,
                'roots': [complex(r) for r in self.roots]}
