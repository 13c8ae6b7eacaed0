from .lattice_core import symbol_eval, check_self_adjoint, apply_truncated, truncated_matrix
from .dispersion import multiplicity_1d, spectrum_bands, example1_bands, example2_bands, example1_dispersion
from .coupling import build_coupled, theorem1_embed, embed_coupled, select_lambda0
from .greens_defect import resolvent_delta, synth_defect, brute_force_green, fit_decay, unbounded_support_check
from .quantum_graph import chain1d_bound_state, grid2d_bound_state, grid2d_mirror_lift, bound_state
from .verification import VerificationHarness, suite_run

__all__ = [
    'symbol_eval',
    'check_self_adjoint',
    'apply_truncated',
    'truncated_matrix',
    'multiplicity_1d',
    'spectrum_bands',
    'example1_bands',
    'example2_bands',
    'example1_dispersion',
    'build_coupled',
    'theorem1_embed',
    'embed_coupled',
    'select_lambda0',
    'resolvent_delta',
    'synth_defect',
    'brute_force_green',
    'fit_decay',
    'unbounded_support_check',
    'chain1d_bound_state',
    'grid2d_bound_state',
    'grid2d_mirror_lift',
    'bound_state',
    'VerificationHarness',
    'suite_run'
]
