import os
import logging
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


def _env_number(name, default, cast):
    """Read a numeric environment variable, falling back to the default on bad input."""
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return cast(raw.strip())
    except ValueError as e:
        logger.error(f"Failed to parse {name}='{raw}': {e}; using default {default}")
        return default


class Settings:
    # Torus quadrature
    QUAD_N = _env_number('FERMILAB_QUAD_N', 128, int)
    GRID_QUAD_N = _env_number('FERMILAB_GRID_QUAD_N', 256, int)

    # Spectral classification
    TOL_CIRCLE = _env_number('FERMILAB_TOL_CIRCLE', 1e-8, float)
    GAP_TOL = _env_number('FERMILAB_GAP_TOL', 1e-6, float)
    BAND_SAMPLES = _env_number('FERMILAB_BAND_SAMPLES', 64, int)

    # Verification suite
    SUITE_WORKERS = _env_number('FERMILAB_SUITE_WORKERS', 4, int)

    # Logging
    LOG_LEVEL = os.getenv('FERMILAB_LOG_LEVEL', 'WARNING')
    LOG_FILE = os.getenv('FERMILAB_LOG_FILE')

    # Fixed numerical constants
    EIGENPAIR_TOL = 1e-8
    DEGENERATE_U0 = 1e-10
    QUAD_DOUBLING_TOL = 1e-9
    TAIL_TOL = 1e-13
    SIN_GUARD = 1e-6
    NU_EXCLUSION = 1e-6
    NU_SCAN = (1e-3, 12.0)

    # Verification thresholds (single source of truth, overridable per suite)
    THRESHOLDS = {
        'residual_combinatorial': 1e-8,
        'residual_chain': 1e-10,
        'residual_grid': 1e-8,
        'decay_r2_min': 0.999,
        'trend_factor': 2.0,
        'oracle_rel': 1e-6,
        'decay_rate_rel': 0.05,
        'negative_residual_min': 1e-3,
    }
