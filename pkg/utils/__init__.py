from .helpers import (
    setup_logging,
    ensure_directory_exists,
    to_jsonable,
    render_json,
    render_csv,
    emit,
    cyclic_index
)
from .errors import (
    FermiLabError,
    DomainError,
    ConvergenceError
)

__all__ = [
    'setup_logging',
    'ensure_directory_exists',
    'to_jsonable',
    'render_json',
    'render_csv',
    'emit',
    'cyclic_index',
    'FermiLabError',
    'DomainError',
    'ConvergenceError'
]
