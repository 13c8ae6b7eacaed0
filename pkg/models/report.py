from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from models.greens import DecayFit
from models.spectra import BandInterval

NEGATIVE_RESIDUAL_MIN = 1e-3


@dataclass
class VerificationReport:
    """Outcome of one verification case; the thresholds used are stored alongside the measurements."""

    case_id: str
    kind: str
    residual_interior: float
    residual_trend: List[float] = field(default_factory=list)
    embedded: bool = False
    witness: Optional[BandInterval] = None
    decay: Optional[DecayFit] = None
    oracle_diff: Optional[float] = None
    tails: List[int] = field(default_factory=list)
    thresholds: Dict[str, float] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)
    expect_pass: bool = True
    error: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.checks) and all(self.checks.values())

    @property
    def as_expected(self) -> bool:
        """A negative control only counts when it was computed and missed by a clear margin."""
        if self.expect_pass:
            return self.passed
        floor = self.thresholds.get('negative_residual_min', NEGATIVE_RESIDUAL_MIN)
        return self.error is None and not self.passed and self.residual_interior >= floor

    def to_dict(self) -> Dict:
        return {
            'case_id': self.case_id,
            'kind': self.kind,
            'pass': self.passed,
            'expect': 'pass' if self.expect_pass else 'fail',
            'as_expected': self.as_expected,
            'residual_interior': self.residual_interior,
            'residual_trend': self.residual_trend,
            'embedded': self.embedded,
            'witness': self.witness.to_dict() if self.witness else None,
            'decay': {'alpha': self.decay.alpha, 'r2': self.decay.r2} if self.decay else None,
            'oracle_diff': self.oracle_diff,
            'tails': self.tails,
            'thresholds': self.thresholds,
            'checks': self.checks,
            'error': self.error,
            'details': self.details,
        }


@dataclass
class SuiteReport:
    """Aggregate of verification reports, ordered by case id."""

    reports: List[VerificationReport] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """Every case expected to pass did pass; negative controls only show up in `unexpected`."""
        return all(r.passed for r in self.reports if r.expect_pass)

    @property
    def controls_ok(self) -> bool:
        return all(r.as_expected for r in self.reports if not r.expect_pass)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def to_dict(self) -> Dict:
        return {
            'ok': self.ok,
            'controls_ok': self.controls_ok,
            'total': len(self.reports),
            'passed': sum(1 for r in self.reports if r.passed),
            'negative_controls': sum(1 for r in self.reports if not r.expect_pass),
            'unexpected': [r.case_id for r in self.reports if not r.as_expected],
            'cases': [r.to_dict() for r in self.reports],
        }
