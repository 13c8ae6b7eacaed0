"""
File formats: stencil JSON, coupling descriptors and verification suite configs.

A stencil file stores only offsets g >=lex 0; each "matrix" is the
row-major list of d*d [re, im] pairs (plain numbers are read as real).
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Union

import numpy as np

from models.coupling import CouplingSpec
from models.lattice import PeriodicStencil, is_lex_nonnegative
from services.lattice_core import scalar_stencil
from utils.errors import DomainError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise DomainError(f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise DomainError(f"{path} is not valid JSON: {e}") from e


def _entry(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise DomainError(f"complex entries are [re, im] pairs, got {value}")
        return complex(float(value[0]), float(value[1]))
    return complex(float(value))


def parse_matrix(raw: Any, size: int) -> np.ndarray:
    """Read a size x size matrix given flat (row-major) or nested, with [re, im] or real entries."""
    if not isinstance(raw, (list, tuple)):
        return _entry(raw) * np.eye(size, dtype=complex)
    if len(raw) == size * size:
        flat = list(raw)
    elif len(raw) == size and all(isinstance(row, (list, tuple)) and len(row) == size for row in raw):
        flat = [v for row in raw for v in row]
    else:
        raise DomainError(f"expected {size * size} matrix entries (flat) or {size} rows of {size}")
    return np.array([_entry(v) for v in flat], dtype=complex).reshape(size, size)


def matrix_entries(matrix: np.ndarray) -> List[List[float]]:
    return [[float(v.real), float(v.imag)] for v in np.asarray(matrix, dtype=complex).ravel()]


def parse_stencil(payload: Mapping[str, Any], name: str = "") -> PeriodicStencil:
    """Build a self-adjoint stencil from its JSON object."""
    try:
        dim = int(payload['dim'])
        fiber = int(payload['fiber'])
        coeffs = payload['coeffs']
    except (KeyError, TypeError, ValueError) as e:
        raise DomainError(f"stencil JSON needs integer 'dim', 'fiber' and a 'coeffs' list: {e}") from e
    half: Dict[tuple, np.ndarray] = {}
    for item in coeffs:
        offset = tuple(int(x) for x in item['offset'])
        if not is_lex_nonnegative(offset):
            raise DomainError(f"stencil files store offsets g >=lex 0 only, got {offset}")
        if offset in half:
            raise DomainError(f"offset {offset} listed twice")
        half[offset] = parse_matrix(item['matrix'], fiber)
    return PeriodicStencil.hermitian(dim, fiber, half, name=payload.get('name', name))


def stencil_to_dict(stencil: PeriodicStencil) -> Dict[str, Any]:
    coeffs = [{'offset': list(g), 'matrix': matrix_entries(a)}
              for g, a in sorted(stencil.half_coeffs().items())]
    return {'dim': stencil.dim, 'fiber': stencil.fiber, 'name': stencil.name, 'coeffs': coeffs}


def load_stencil(path: PathLike) -> PeriodicStencil:
    path = Path(path)
    stencil = parse_stencil(read_json(path), name=path.stem)
    logger.info(f"Loaded stencil '{stencil.name}' (dim={stencil.dim}, fiber={stencil.fiber}) from {path}")
    return stencil


def dump_stencil(stencil: PeriodicStencil, path: PathLike) -> None:
    Path(path).write_text(json.dumps(stencil_to_dict(stencil), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_coupling_matrix(path: PathLike) -> np.ndarray:
    """K from a file holding either {"K": ...} or the bare nested matrix."""
    payload = read_json(path)
    raw = payload['K'] if isinstance(payload, dict) else payload
    if not isinstance(raw, list) or not raw:
        raise DomainError(f"{path}: K must be a non-empty list of rows")
    return parse_matrix(raw, len(raw))


def load_coupling(path: PathLike) -> CouplingSpec:
    """
    Coupling descriptor {"base": FILE, "rabi": {"scale": x} | FILE, "K": [[...]]}.

    Stencil paths are resolved relative to the descriptor's directory.
    """
    path = Path(path)
    payload = read_json(path)
    try:
        base = load_stencil(path.parent / payload['base'])
        raw_K = payload['K']
    except (KeyError, TypeError) as e:
        raise DomainError(f"{path}: coupling descriptor needs 'base' and 'K'") from e
    rabi_spec = payload.get('rabi', {'scale': 1.0})
    if isinstance(rabi_spec, dict):
        rabi = scalar_stencil(base.dim, base.fiber, float(rabi_spec.get('scale', 1.0)))
    else:
        rabi = load_stencil(path.parent / rabi_spec)
    return CouplingSpec(base, rabi, parse_matrix(raw_K, len(raw_K)))


def parse_suite_config(payload: Any) -> Dict[str, Any]:
    """Normalize a suite config; a bare list is taken as the case list."""
    if isinstance(payload, list):
        payload = {'cases': payload}
    if not isinstance(payload, dict):
        raise DomainError("suite config must be a JSON object or a list of cases")
    cases = payload.get('cases') or []
    seen = set()
    for case in cases:
        if not isinstance(case, dict) or 'kind' not in case:
            raise DomainError(f"every case needs a 'kind': {case}")
        case.setdefault('id', case['kind'])
        case.setdefault('params', {})
        case.setdefault('expect', 'pass')
        if case['expect'] not in ('pass', 'fail'):
            raise DomainError(f"case '{case['id']}': expect must be 'pass' or 'fail'")
        if case['id'] in seen:
            raise DomainError(f"duplicate case id '{case['id']}'")
        seen.add(case['id'])
    thresholds = payload.get('thresholds') or {}
    if not isinstance(thresholds, dict):
        raise DomainError("'thresholds' must be an object")
    return {'thresholds': thresholds, 'cases': cases}


def load_suite_config(path: PathLike) -> Dict[str, Any]:
    config = parse_suite_config(read_json(path))
    logger.info(f"Loaded {len(config['cases'])} verification cases from {path}")
    return config


def field_rows(values: np.ndarray, box: Sequence[int]) -> List[Dict[str, Any]]:
    """Flat per-site records (g1..gn, component, re, im) of a lattice field array."""
    rows = []
    labels = ['g'] if len(box) == 1 else [f'g{j + 1}' for j in range(len(box))]
    for index in np.ndindex(*values.shape[:-1]):
        site = [i - r for i, r in zip(index, box)]
        for component, value in enumerate(values[index]):
            row = dict(zip(labels, site))
            row.update({'component': component, 're': float(value.real), 'im': float(value.imag)})
            rows.append(row)
    return rows
