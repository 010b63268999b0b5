"""
Plain-text exchange formats: sample CSV and model/structure JSON.
"""
import csv
import json
from pathlib import Path

import numpy as np

from .model import VineModel
from .structure import RVineStructure, StructureError


class InputError(ValueError):
    """Malformed input file; the message carries the location."""


def write_samples(path, x, columns=None):
    """CSV with a header row (default u1..ud), LF endings, 17 significant digits."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1] if x.size else len(columns or [])
    columns = list(columns) if columns is not None else [f"u{i}" for i in range(1, d + 1)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in x:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_samples(path, unit=True):
    """
    Read a sample CSV written by ``write_samples``. With ``unit=True`` every
    value must lie in [0, 1].
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise InputError(f"{path}:1: missing header row")
        d = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d:
                raise InputError(f"{path}:{lineno}: expected {d} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric field in {row}") from None
            if unit and not all(0.0 <= v <= 1.0 for v in vals):
                raise InputError(f"{path}:{lineno}: values must lie in [0, 1]")
            rows.append(vals)
    x = np.array(rows, dtype=float).reshape(len(rows), d)
    return x, header


def write_json(path, obj):
    with open(path, "w", newline="") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def load_model(path):
    """A ``VineModel`` from model JSON (a fit report's ``model`` entry is accepted)."""
    obj = read_json(path)
    if isinstance(obj, dict) and "model" in obj and "structure" not in obj:
        obj = obj["model"]
    try:
        return VineModel.from_dict(obj)
    except (KeyError, TypeError, ValueError, StructureError) as exc:
        raise InputError(f"{path}: invalid model ({type(exc).__name__}: {exc})") from None


def load_structure(path):
    obj = read_json(path)
    if isinstance(obj, dict) and "structure" in obj:
        obj = obj["structure"]
    try:
        return RVineStructure.from_dict(obj)
    except (KeyError, TypeError, ValueError, StructureError) as exc:
        raise InputError(f"{path}: invalid structure ({type(exc).__name__}: {exc})") from None


def write_rows(path, rows):
    """CSV from a list of dicts sharing keys."""
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
