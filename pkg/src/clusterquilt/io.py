"""On-disk formats.

Patch manifest (JSON, 0-based indices)::

    {"n": 10, "p": 4,
     "patches": [{"features": [0, 1], "samples": [0, 1, 2], "data_file": "patch_0.csv"}, ...]}

``data_file`` paths are resolved relative to the manifest.  Data CSVs have
``|features|`` rows and ``|samples|`` columns, no header.  Floats are written
in the shortest form that parses back to the same double.
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, PatchValidationError
from .patches import Patch, PatchSet


class LoadError(InvalidInputError):
    """A file could not be read or parsed.

    ``constraint`` tags the failure (e.g. ``"json-syntax"``, ``"missing-file"``).
    """

    def __init__(self, message, constraint, path=None):
        super().__init__(message)
        self.constraint = constraint
        self.path = None if path is None else str(path)


def format_float(x) -> str:
    x = float(x)
    if x == 0:
        return "0"  # also folds -0.0
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def write_matrix_csv(path, A) -> None:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in A:
            w.writerow(format_float(v) for v in row)


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except FileNotFoundError as exc:
        raise LoadError(f"data file not found: {path}", "missing-file", path) from exc
    if not rows:
        raise LoadError(f"{path} is empty", "empty-file", path)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise LoadError(f"{path}: rows have different lengths", "ragged-csv", path)
    try:
        A = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise LoadError(f"{path}: non-numeric entry ({exc})", "non-numeric", path) from exc
    if not np.all(np.isfinite(A)):
        raise LoadError(f"{path}: NaN or Inf entries", "finite-data", path)
    return A


def write_labels(path, labels) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in np.asarray(labels).ravel())


def read_labels(path) -> np.ndarray:
    """One integer label per line (a single comma-separated row is also accepted)."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise LoadError(f"label file not found: {path}", "missing-file", path) from exc
    tokens = [t.strip() for t in text.replace(",", "\n").split()]
    tokens = [t for t in tokens if t]
    if not tokens:
        raise LoadError(f"{path} has no labels", "empty-file", path)
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise LoadError(f"{path}: non-numeric label ({exc})", "non-numeric", path) from exc
    if any(not v.is_integer() for v in values):
        raise LoadError(f"{path}: labels must be integers", "non-integer", path)
    return np.array(values, dtype=np.int64)


def read_json(path):
    path = Path(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise LoadError(f"file not found: {path}", "missing-file", path) from exc
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON ({exc})", "json-syntax", path) from exc


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ints(values, where):
    if not isinstance(values, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
        raise PatchValidationError(f"{where} must be a list of integers", "index-type")
    return values


def load_manifest(path) -> PatchSet:
    """Read and validate a patch manifest plus its data files."""
    path = Path(path)
    meta = read_json(path)
    if not isinstance(meta, dict):
        raise PatchValidationError("manifest must be a JSON object", "manifest-shape")
    for key in ("n", "p", "patches"):
        if key not in meta:
            raise PatchValidationError(f"manifest is missing {key!r}", "manifest-shape")
    n, p = meta["n"], meta["p"]
    if not all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in (n, p)):
        raise PatchValidationError("n and p must be positive integers", "manifest-shape")
    if not isinstance(meta["patches"], list) or not meta["patches"]:
        raise PatchValidationError("patches must be a nonempty list", "manifest-shape")
    patches = []
    for m, entry in enumerate(meta["patches"]):
        if not isinstance(entry, dict) or not {"features", "samples", "data_file"} <= set(entry):
            raise PatchValidationError(f"patch {m} needs features, samples and data_file", "manifest-shape")
        f = _ints(entry["features"], f"patch {m} features")
        s = _ints(entry["samples"], f"patch {m} samples")
        data = read_matrix_csv(path.parent / entry["data_file"])
        patches.append(Patch(np.array(f, dtype=np.int64), np.array(s, dtype=np.int64), data))
    return PatchSet(n, p, tuple(patches))


def save_patchset(ps: PatchSet, directory, manifest_name: str = "manifest.json") -> Path:
    """Write ``ps`` as a manifest plus one CSV per patch; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for m, pt in enumerate(ps):
        name = f"patch_{m}.csv"
        write_matrix_csv(directory / name, pt.data)
        entries.append({"features": pt.features.tolist(), "samples": pt.samples.tolist(), "data_file": name})
    out = directory / manifest_name
    write_json(out, {"n": ps.n, "p": ps.p, "patches": entries})
    return out


def atomic_directory(target):
    """Staging directory next to ``target``; call ``commit`` to move it into place."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    return _Staging(target)


class _Staging:
    def __init__(self, target: Path):
        self.target = target
        self.path = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))

    def commit(self):
        if self.target.exists():
            if self.target.is_dir() and not any(self.target.iterdir()):
                self.target.rmdir()
            else:
                # merge into an existing directory file by file
                for item in self.path.iterdir():
                    os.replace(item, self.target / item.name)
                self.path.rmdir()
                return self.target
        os.replace(self.path, self.target)
        return self.target

    def abort(self):
        for item in sorted(self.path.rglob("*"), reverse=True):
            item.rmdir() if item.is_dir() else item.unlink()
        self.path.rmdir()
