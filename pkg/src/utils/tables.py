"""
CSV artifacts: a header comment line, then a pandas-written table with
full-precision floats and LF line endings
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.config.settings import settings
from src.utils.errors import SubellipticError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class OutputError(SubellipticError):
    """Artifact could not be written or read"""
    pass


def header_line(config_hash: Optional[str] = None) -> str:
    return f"# {settings.TOOL_NAME} {settings.VERSION} config={config_hash or 'none'}\n"


def write_table(frame: pd.DataFrame, path, config_hash: Optional[str] = None) -> Path:
    """
    Write a DataFrame as CSV under the header comment

    Args:
        frame: Table
        path: Destination
        config_hash: Digest of the effective configuration

    Returns:
        The written path
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(header_line(config_hash))
            frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="nan")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e

    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_table(path) -> pd.DataFrame:
    path = Path(path)
    try:
        return pd.read_csv(path, comment="#", float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise OutputError(f"cannot read {path}: {e}") from e


def write_field(points: np.ndarray, values: np.ndarray, path, config_hash: Optional[str] = None) -> Path:
    """
    Nodal field as columns x1..xn, value in lexicographic node order

    Infinite values (unreachable distances) are written as inf.
    """
    points = np.asarray(points, dtype=float)
    columns = {f"x{k + 1}": points[:, k] for k in range(points.shape[1])}
    columns["value"] = np.asarray(values, dtype=float)
    return write_table(pd.DataFrame(columns), path, config_hash)


def read_field(path) -> Tuple[np.ndarray, np.ndarray]:
    """Counterpart of write_field: (coordinates, values)"""
    table = read_table(path)
    if "value" not in table.columns:
        raise OutputError(f"{path} has no value column")
    coords = table.drop(columns="value").to_numpy(dtype=float)
    return coords, table["value"].to_numpy(dtype=float)


def write_rows(rows: Iterable[dict], path, config_hash: Optional[str] = None, columns: Optional[List[str]] = None) -> Path:
    return write_table(pd.DataFrame(list(rows), columns=columns), path, config_hash)
