"""On-disk formats: Matrix Market matrices, JSON manifests and results, CSV logs."""

import csv
import json
import os
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .problem import CandidateSolution, NepvProblem

SCHEMA_VERSION = 1
NAMES = "ABCPQ"
SOLUTION_FIELDS = ("lambda", "mu", "v", "residual_nepv", "residual_mu", "classification")
CSV_COLUMNS = ("iter", "track_id", "lambda_re", "lambda_im", "abs_error_vs_final", "residual_estimate")


class BundleError(OSError):
    """A problem bundle is missing, unreadable or malformed."""


def _symmetry(X):
    if np.array_equal(X, X.T):
        return "symmetric"
    if np.array_equal(X, X.conj().T):
        return "hermitian"
    return "general"


def write_matrix(path, X):
    """Write ``X`` in Matrix Market format with full round-trip precision.

    Banded or sparse matrices use the coordinate format, dense ones the
    array format; real-valued matrices are written with the ``real`` field.
    """
    X = np.asarray(X)
    if np.iscomplexobj(X) and not np.any(X.imag):
        X = X.real
    symmetry = _symmetry(X)
    if not np.iscomplexobj(X) and symmetry == "hermitian":
        symmetry = "symmetric"
    if np.count_nonzero(X) <= 0.25 * X.size:
        X = scipy.sparse.coo_matrix(X)
    scipy.io.mmwrite(str(path), X, symmetry=symmetry, precision=17)


def read_matrix(path):
    M = scipy.io.mmread(str(path))
    if scipy.sparse.issparse(M):
        M = M.toarray()
    return np.asarray(M)


def save_bundle(problem, directory, **meta):
    """Write the five matrices and ``manifest.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for name in NAMES:
        fname = f"{name}.mtx"
        write_matrix(directory / fname, getattr(problem, name))
        files[name] = fname
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "n": problem.n,
        "meta": _jsonable({**problem.meta, **meta}),
        "files": files,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def load_bundle(directory):
    """Read a bundle written by :func:`save_bundle`."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except (OSError, ValueError) as exc:
        raise BundleError(f"cannot read manifest in {directory}: {exc}") from exc
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise BundleError(f"unsupported bundle schema {manifest.get('schema_version')!r}")
    try:
        mats = [read_matrix(directory / manifest["files"][name]) for name in NAMES]
    except (OSError, KeyError, ValueError) as exc:
        raise BundleError(f"cannot read matrices in {directory}: {exc}") from exc
    return NepvProblem(*mats, meta=manifest.get("meta", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def solutions_document(solutions, **meta):
    """JSON-ready document with canonical field order.

    Floats are emitted with the shortest representation that round-trips,
    which never needs more than 17 significant digits.
    """
    return {
        "schema_version": SCHEMA_VERSION,
        "meta": _jsonable(meta),
        "solutions": [{k: s.to_dict()[k] for k in SOLUTION_FIELDS} for s in solutions],
    }


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")


def save_solutions(path, solutions, **meta):
    write_json(path, solutions_document(solutions, **meta))


def load_solutions(path, key="solutions"):
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema {doc.get('schema_version')!r} in {path}")
    return [CandidateSolution.from_dict(d) for d in doc[key]]


def write_convergence_csv(path, log):
    """One row per (iteration, Ritz track); the header is always written."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in log.rows():
            writer.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})


def read_convergence_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
