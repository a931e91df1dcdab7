"""Dataset files and ellipsoid glyphs.

JSON datasets are arrays of ``{"id": ..., "matrix": [[...], ...]}`` records
(row-major nested lists).  CSV datasets start with a ``# m=<dim>`` line,
then a header ``id,a11,a12,...,amm`` naming the upper-triangle entries, then
one row per matrix.  CSV floats are written with 17 significant digits and
JSON floats with Python's shortest round-trip repr, so a write/read cycle
reproduces every value bit for bit.
"""

import csv
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, InputError, ParseError
from .quantiles import Dataset
from .spectral import as_symmetric, eig_sym, pd_threshold

SYMMETRY_TOL = 1e-8
FORMATS = ("json", "csv")


def _fmt(x):
    return format(float(x), ".17g")


@dataclass(frozen=True)
class EllipsoidGlyph:
    """Ellipsoid of an SPD matrix: eigenvectors as axes, eigenvalues as axis lengths."""

    center_id: str
    axis_lengths: np.ndarray
    axes: np.ndarray

    def reconstruct(self):
        return (self.axes * self.axis_lengths) @ self.axes.T

    def to_dict(self):
        return {
            "center_id": self.center_id,
            "axis_lengths": [float(v) for v in self.axis_lengths],
            "axes": [[float(v) for v in row] for row in self.axes],
        }


def ellipsoid_glyph(matrix, center_id=""):
    dec = eig_sym(matrix)
    d = dec.eigenvalues
    if d[-1] <= pd_threshold(d):
        raise DomainError(f"glyph {center_id!r}: matrix is not positive definite (eigenvalue {d[-1]:.6g})", eigenvalue=float(d[-1]))
    return EllipsoidGlyph(str(center_id), d, dec.eigenvectors)


def export_ellipsoids(matrices, out_path=None, labels=None):
    """One glyph per SPD matrix; written as a JSON list when ``out_path`` is given."""
    matrices = list(matrices)
    if labels is None:
        labels = [str(i) for i in range(len(matrices))]
    glyphs = [ellipsoid_glyph(M, lab) for M, lab in zip(matrices, labels)]
    if out_path is not None:
        Path(out_path).write_text(json.dumps([g.to_dict() for g in glyphs], indent=1) + "\n", encoding="utf-8")
    return glyphs


def _validated(rows, where):
    """Records ``(label, matrix)`` -> Dataset with symmetry/PD/dimension checks."""
    labels, mats = [], []
    m = None
    for idx, (label, A, loc) in enumerate(rows):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise ParseError(f"matrix must be square, got shape {A.shape}", loc)
        if m is None:
            m = A.shape[0]
        elif A.shape[0] != m:
            raise InputError(f"{loc}: mixed dimensions ({A.shape[0]} vs {m})")
        try:
            A = as_symmetric(A, f"matrix {label!r}", atol=SYMMETRY_TOL)
        except InputError as exc:
            raise InputError(f"{loc}: {exc}") from None
        w = np.linalg.eigvalsh(A)
        if w[0] <= pd_threshold(w):
            raise DomainError(
                f"{loc}: matrix {label!r} (index {idx}) is not positive definite; smallest eigenvalue {w[0]:.6g}",
                eigenvalue=float(w[0]),
                index=idx,
            )
        labels.append(label)
        mats.append(A)
    if not mats:
        raise InputError(f"{where}: dataset is empty")
    return Dataset(np.array(mats), tuple(labels))


def parse_json_dataset(text, where="<json>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{where}:{exc.lineno}:{exc.colno}") from None
    if isinstance(doc, dict) and "records" in doc:
        doc = [r for r in doc["records"] if r.get("matrix") is not None]
    if not isinstance(doc, list):
        raise ParseError("expected a JSON array of {id, matrix} records", where)
    rows = []
    for i, rec in enumerate(doc):
        loc = f"{where}: record {i}"
        if not isinstance(rec, dict) or "matrix" not in rec:
            raise ParseError("record must be an object with a 'matrix' field", loc)
        try:
            A = np.array(rec["matrix"], dtype=float)
        except (TypeError, ValueError):
            raise ParseError("matrix must be a nested list of numbers", loc) from None
        if A.ndim == 0:
            A = A.reshape(1, 1)
        rows.append((str(rec.get("id", i)), A, loc))
    return _validated(rows, where)


_M_LINE = re.compile(r"^\s*#\s*m\s*=\s*(\d+)\s*$")


def parse_csv_dataset(text, where="<csv>"):
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", f"{where}:1")
    match = _M_LINE.match(lines[0])
    if not match:
        raise ParseError("first line must declare the dimension as '# m=<dim>'", f"{where}:1")
    m = int(match.group(1))
    if m < 1:
        raise ParseError("dimension must be positive", f"{where}:1")
    k = m * (m + 1) // 2
    reader = csv.reader(io.StringIO("\n".join(lines[1:])))
    iu = np.triu_indices(m)
    rows = []
    header_seen = False
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if not header_seen:
            header_seen = True
            if len(row) != k + 1:
                raise ParseError(f"header must have {k + 1} columns (id + upper triangle), got {len(row)}", f"{where}:{lineno}")
            continue
        loc = f"{where}:{lineno}"
        if len(row) != k + 1:
            raise ParseError(f"expected {k + 1} columns, got {len(row)}", loc)
        try:
            vals = np.array([float(c) for c in row[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), loc) from None
        A = np.zeros((m, m))
        A[iu] = vals
        A[(iu[1], iu[0])] = vals
        rows.append((row[0], A, loc))
    return _validated(rows, where)


def infer_format(path, fmt=None):
    if fmt:
        if fmt not in FORMATS:
            raise InputError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        return fmt
    suffix = Path(path).suffix.lower().lstrip(".")
    return suffix if suffix in FORMATS else "json"


def load_dataset(path, fmt=None):
    """Read and validate a dataset; every matrix must be symmetric (to 1e-8) and PD."""
    fmt = infer_format(path, fmt)
    text = Path(path).read_text(encoding="utf-8")
    if fmt == "csv":
        return parse_csv_dataset(text, str(path))
    return parse_json_dataset(text, str(path))


def dataset_to_text(data, fmt="json"):
    if fmt == "csv":
        m = data.dim
        iu = np.triu_indices(m)
        out = io.StringIO()
        out.write(f"# m={m}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["id"] + [f"a{i + 1}{j + 1}" for i, j in zip(*iu)])
        for lab, A in zip(data.labels, data.points):
            w.writerow([lab] + [_fmt(v) for v in A[iu]])
        return out.getvalue()
    recs = [
        {"id": lab, "matrix": [[float(v) for v in row] for row in A]}
        for lab, A in zip(data.labels, data.points)
    ]
    return json.dumps(recs, indent=1) + "\n"


def save_dataset(data, path, fmt=None):
    fmt = infer_format(path, fmt)
    Path(path).write_text(dataset_to_text(data, fmt), encoding="utf-8")


def matrix_to_list(A):
    return [[float(v) for v in row] for row in np.atleast_2d(A)]


def synthetic_dataset(n, m=3, seed=0, spread=0.25):
    """DTI-like sample: a prolate tensor with random rotations and log-normal eigenvalue noise."""
    rng = np.random.default_rng(seed)
    base = np.log(np.linspace(3.0, 1.0, m)) if m > 1 else np.zeros(1)
    mats = []
    for _ in range(n):
        G = rng.normal(size=(m, m)) * spread
        Q, R = np.linalg.qr(np.eye(m) + G)
        Q = Q * np.sign(np.diag(R))
        lam = np.exp(base + spread * rng.normal(size=m))
        A = (Q * lam) @ Q.T
        mats.append(0.5 * (A + A.T))
    return Dataset(np.array(mats), tuple(f"s{i}" for i in range(n)))
