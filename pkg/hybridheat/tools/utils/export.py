import csv
import json
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel

# Configure module-level logger
logger = logging.getLogger("export.py")
logger.setLevel(logging.INFO)


def clean_record(value):
    """
    Converts a report value into plain JSON-safe Python objects.

    :param value: A pydantic model, numpy array/scalar, mapping or sequence.
    :return: The same data built from dict, list, str, int, float, bool and None.
    """
    try:
        if isinstance(value, BaseModel):
            return clean_record(value.model_dump(mode="json"))
        if isinstance(value, dict):
            return {str(k): clean_record(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [clean_record(v) for v in value]
        if isinstance(value, np.ndarray):
            return clean_record(value.tolist())
        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, Path):
            return str(value)
        return value
    except Exception as e:
        raise ValueError(f"Error in cleaning record: {e}")


def format_value(value) -> str:
    """Shortest round-trip text for floats, '.' as decimal separator."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str | Path, rows: list[dict], fieldnames: list[str] | None = None) -> Path:
    """RFC-4180 style CSV with a header row; columns follow the first row unless given."""
    path = Path(path)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=fieldnames)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: format_value(row[k]) for k in fieldnames})
    except OSError as e:
        raise RuntimeError(f"Error writing CSV {path}: {e}")
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def write_json(path: str | Path, data) -> Path:
    """UTF-8 JSON with sorted keys."""
    path = Path(path)
    try:
        text = json.dumps(clean_record(data), sort_keys=True, indent=2, ensure_ascii=False)
        path.write_text(text + "\n", encoding="utf-8")
    except (OSError, TypeError) as e:
        raise RuntimeError(f"Error writing JSON {path}: {e}")
    logger.info(f"Wrote report {path}")
    return path
