from .lattice import PeriodicStencil, FloquetPoint, LatticeField, SiteDefect, SelfAdjointReport
from .spectra import BandInterval, BandReport, BranchValue, RootCount
from .coupling import CouplingSpec, TwoGraphAngles, HybridState, CoupledEmbedding
from .greens import GreensResult, DecayFit, SupportVerdict, Example1Defect
from .quantum import (
    GridModel,
    EdgeCoefficients,
    SecularEval,
    ChainBoundState,
    GridBoundState,
    BilayerField
)
from .report import VerificationReport, SuiteReport

__all__ = [
    'PeriodicStencil',
    'FloquetPoint',
    'LatticeField',
    'SiteDefect',
    'SelfAdjointReport',
    'BandInterval',
    'BandReport',
    'BranchValue',
    'RootCount',
    'CouplingSpec',
    'TwoGraphAngles',
    'HybridState',
    'CoupledEmbedding',
    'GreensResult',
    'DecayFit',
    'SupportVerdict',
    'Example1Defect',
    'GridModel',
    'EdgeCoefficients',
    'SecularEval',
    'ChainBoundState',
    'GridBoundState',
    'BilayerField',
    'VerificationReport',
    'SuiteReport'
]
