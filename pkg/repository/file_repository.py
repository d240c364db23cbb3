"""
File Repository - JSON and CSV outputs of CLI runs.

Every file carries the config hash: a "config_hash" key in JSON, a
"# config_hash=<hex>" first line in CSV. Matrices are nested arrays of
17-significant-digit decimals.
"""

import csv
import json
import os
import re

import numpy as np

from utils.exception import CustomException

_PLACEHOLDER = "__matrix_{}__"


def format_number(value):
    return f"{float(value):.17g}"


def format_matrix(values):
    """Nested JSON array text with 17 significant digits per entry."""
    a = np.asarray(values, dtype=float)
    if a.ndim == 0:
        return format_number(a)
    return "[" + ",".join(format_matrix(row) for row in a) + "]"


def _encode(document):
    """json.dumps with every numpy array written through format_matrix."""
    arrays = []

    def replace(node):
        if isinstance(node, np.ndarray):
            arrays.append(node)
            return _PLACEHOLDER.format(len(arrays) - 1)
        if isinstance(node, dict):
            return {k: replace(v) for k, v in node.items()}
        if isinstance(node, (list, tuple)):
            return [replace(v) for v in node]
        if isinstance(node, np.generic):
            return node.item()
        return node

    text = json.dumps(replace(document), indent=2, sort_keys=True)
    return re.sub(r'"__matrix_(\d+)__"', lambda m: format_matrix(arrays[int(m.group(1))]), text)


def _ensure_dir(path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_json(path, document, config_hash):
    """
    Write a JSON document with the config hash embedded.

    Raises:
        CustomException: the file could not be written
    """
    try:
        _ensure_dir(path)
        with open(path, "w") as f:
            f.write(_encode({**document, "config_hash": config_hash}))
            f.write("\n")
        return path
    except OSError as e:
        raise CustomException(f"Error writing {path}: {e}")


def write_csv(path, columns, rows, config_hash):
    """CSV with a '# config_hash=<hex>' first line; floats written with 17 significant digits."""
    try:
        _ensure_dir(path)
        with open(path, "w", newline="") as f:
            f.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(f)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_number(v) if isinstance(v, (float, np.floating)) else v for v in row])
        return path
    except OSError as e:
        raise CustomException(f"Error writing {path}: {e}")


def read_json(path):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        raise CustomException(f"Output file not found: {path}")
    except json.JSONDecodeError as e:
        raise CustomException(f"Invalid JSON in {path}: {e}")


def read_csv(path):
    """
    Returns:
        tuple: (config_hash, header, rows as lists of strings)
    """
    try:
        with open(path, "r", newline="") as f:
            first = f.readline().strip()
            if not first.startswith("# config_hash="):
                raise CustomException(f"{path}: missing config hash header")
            reader = csv.reader(f)
            header = next(reader)
            return first.split("=", 1)[1], header, [row for row in reader]
    except FileNotFoundError:
        raise CustomException(f"Output file not found: {path}")
