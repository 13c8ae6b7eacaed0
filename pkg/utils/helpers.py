import json
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: str = "WARNING", log_file: Optional[str] = None) -> None:
    """Setup logging configuration.

    Diagnostics always go to stderr so that stdout carries only the
    emitted document.
    """
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def ensure_directory_exists(path: str) -> bool:
    """Ensure the parent directory of an output file exists."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        return True
    except OSError as e:
        logger.error(f"Error creating directory {directory}: {e}")
        return False


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy and complex values into plain JSON types.

    Args:
        value: Arbitrary nested structure of dicts, lists, tuples, numpy
            arrays, numpy scalars and Python numbers

    Returns:
        The same structure using only dict, list, str, bool, int, float and
        None. Complex numbers become ``[re, im]`` pairs and non-finite floats
        become strings.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return str(value)
    if hasattr(value, 'to_dict'):
        return to_jsonable(value.to_dict())
    return value


def render_json(payload: Dict[str, Any]) -> str:
    """Render a payload as a deterministic JSON document."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"


def render_csv(rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    """Render a list of flat records as CSV text."""
    frame = pd.DataFrame(list(rows), columns=list(columns) if columns else None)
    return frame.to_csv(index=False, float_format='%.17g')


def emit(text: str, output: Optional[str] = None) -> None:
    """Write rendered text to a file, or to stdout when no path is given."""
    if output:
        ensure_directory_exists(output)
        with open(output, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        logger.info(f"Wrote {len(text)} characters to {output}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def cyclic_index(offsets: np.ndarray, period: int) -> np.ndarray:
    """Map signed lattice offsets onto indices of a periodic grid of the given period."""
    return np.mod(offsets, period)
