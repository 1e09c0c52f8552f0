import os
import csv
import json
import logging
import math
from typing import Dict, List, Sequence, Tuple

from pydantic import ValidationError as PydanticValidationError

from app.api.schemas import StateFile
from app.config import SWEEP_SETTINGS
from app.exceptions import StateParseError, ValidationError
from app.models.linalg import DensityMatrix

# Set up logging
logger = logging.getLogger(__name__)

# Row ordering checked on re-read: c_g <= c_min <= c_r <= c_max
ORDERED_COLUMNS = ("c_g", "c_min", "c_r", "c_max")
ORDER_SLACK = 1e-6

def parse_state_document(data) -> DensityMatrix:
    """
    Parse a decoded state document {"dim": d, "matrix": [[[re, im], ...], ...]}

    Args:
        data: Decoded JSON document

    Returns:
        DensityMatrix: Validated state
    """
    try:
        state_file = StateFile.model_validate(data)
    except PydanticValidationError as e:
        raise StateParseError(f"Malformed state document: {e}") from e
    return state_file.to_density_matrix()

def load_state_file(path: str) -> DensityMatrix:
    """
    Load and validate a state file
    """
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Error reading state file {path}: {str(e)}")
        raise StateParseError(f"Could not read state file {path}: {e}") from e
    return parse_state_document(data)

def save_state_file(rho: DensityMatrix, path: str) -> str:
    """
    Write a state in the [re, im] pair format
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        json.dump(StateFile.from_density_matrix(rho).model_dump(), f)
    return path

def format_value(value: float) -> str:
    return f"{value:.{SWEEP_SETTINGS['significant_digits']}g}"

def write_sweep_csv(columns: Sequence[str], rows: Sequence[Dict[str, float]], path: str) -> str:
    """
    Write sweep rows with fixed float formatting

    Args:
        columns (Sequence[str]): Header in output order
        rows (Sequence[Dict[str, float]]): One dict per row
        path (str): Destination CSV path

    Returns:
        str: The path written
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path

def read_sweep_csv(path: str) -> Tuple[List[str], List[Dict[str, float]]]:
    """
    Re-parse a sweep CSV and re-validate every row: all values finite and
    c_g <= c_min <= c_r <= c_max where those columns are present
    """
    try:
        with open(path, "r", newline="") as f:
            reader = csv.reader(f)
            columns = next(reader)
            records = [record for record in reader if record]
        for index, record in enumerate(records):
            if len(record) != len(columns):
                raise StateParseError(f"Row {index} of {path} has {len(record)} fields, expected {len(columns)}")
        rows = [dict(zip(columns, (float(v) for v in record))) for record in records]
    except (OSError, StopIteration, ValueError) as e:
        raise StateParseError(f"Could not parse sweep CSV {path}: {e}") from e

    ordered = [c for c in ORDERED_COLUMNS if c in columns]
    for index, row in enumerate(rows):
        if not all(math.isfinite(v) for v in row.values()):
            raise ValidationError(f"Row {index} of {path} has non-finite values")
        for lower, upper in zip(ordered, ordered[1:]):
            if row[lower] > row[upper] + ORDER_SLACK:
                raise ValidationError(f"Row {index} of {path} violates {lower} <= {upper}")
    return columns, rows
