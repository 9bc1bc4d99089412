"""Reading and writing matrices, labels and experiment results.

Formats
-------
DENSE_CSV
    Comma-separated numeric rows. An optional header row of column
    identifiers and an optional leading column of row identifiers are
    detected by non-numeric cells.
COORD
    ``%``-prefixed comment lines, then a header ``n_rows n_cols nnz`` and
    ``nnz`` lines ``i j value`` with 1-based indices. Unlisted entries are 0.
EDGES
    Two or three whitespace- or comma-separated columns ``row col [weight]``
    holding arbitrary identifiers; rows/columns are indexed by first
    appearance.

Results are JSON documents; floats are written with round-trip precision.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import math
import os
import platform
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .engine import DEFAULT_TOLERANCE, RunConfig
from .matrix import as_dense, validate_adjacency

FORMAT_VERSION = "1.0"


class DataFormatError(ValueError):
    """Malformed input file; the message carries the offending line number."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        where = f"{path}:{lineno}" if lineno else str(path)
        super().__init__(f"{where}: {message}")


class MatrixFormat(str, enum.Enum):
    DENSE_CSV = "csv"
    COORD = "coord"
    EDGES = "edges"

    @classmethod
    def parse(cls, value) -> "MatrixFormat":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        aliases = {"dense_csv": "csv", "dense": "csv", "mtx": "coord", "edgelist": "edges"}
        try:
            return cls(aliases.get(v, v))
        except ValueError:
            raise ValueError(f"unknown matrix format {value!r}") from None

    @classmethod
    def from_path(cls, path) -> "MatrixFormat":
        suffix = Path(path).suffix.lower()
        if suffix in (".coord", ".mtx"):
            return cls.COORD
        if suffix in (".edges", ".tsv", ".txt"):
            return cls.EDGES
        return cls.DENSE_CSV


@dataclass
class MatrixData:
    matrix: object
    row_ids: list | None = None
    col_ids: list | None = None

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class LabeledDataset:
    matrix: object
    row_classes: np.ndarray | None = None
    col_classes: np.ndarray | None = None
    class_names: list | None = None
    row_ids: list | None = None
    col_ids: list | None = None
    provenance: str = ""

    def __post_init__(self):
        n, m = self.matrix.shape
        for arr, size, what in ((self.row_classes, n, "row"), (self.col_classes, m, "column")):
            if arr is None:
                continue
            arr = np.asarray(arr)
            if arr.size != size:
                raise ValueError(f"{arr.size} {what} classes for {size} {what}s")
            if arr.size and set(np.unique(arr).tolist()) != set(range(int(arr.max()) + 1)):
                raise ValueError(f"{what} class indices must be dense from 0")

    @property
    def density(self) -> float:
        A = self.matrix
        nnz = A.nnz if sp.issparse(A) else np.count_nonzero(A)
        return nnz / (A.shape[0] * A.shape[1])


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# --- matrices -----------------------------------------------------------------

def _load_dense_csv(path) -> MatrixData:
    with open(path, newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(path, 0, "file is empty")
    col_ids = None
    first_no, first = rows[0]
    cells = [c.strip() for c in first]
    # a header has column names after the (possibly empty) corner cell
    if cells[0] == "" or any(not _is_number(c) for c in cells[1:]):
        col_ids = cells
        rows = rows[1:]
    body = [(no, [c.strip() for c in r]) for no, r in rows]
    if not body:
        raise DataFormatError(path, first_no, "no data rows")
    row_ids = None
    if any(not _is_number(r[0]) for _, r in body):
        row_ids = [r[0] for _, r in body]
        body = [(no, r[1:]) for no, r in body]
    if col_ids is not None and row_ids is not None and len(col_ids) == len(body[0][1]) + 1:
        col_ids = col_ids[1:]
    width = len(body[0][1])
    values = np.empty((len(body), width))
    for k, (no, r) in enumerate(body):
        if len(r) != width:
            raise DataFormatError(path, no, f"expected {width} values, found {len(r)}")
        for c, cell in enumerate(r):
            if not _is_number(cell):
                raise DataFormatError(path, no, f"non-numeric value {cell!r}")
            v = float(cell)
            if not math.isfinite(v):
                raise DataFormatError(path, no, f"non-finite value {cell!r}")
            if v < 0:
                raise DataFormatError(path, no, f"negative value {cell!r}")
            values[k, c] = v
    if col_ids is not None and len(col_ids) != width:
        raise DataFormatError(path, first_no, f"header has {len(col_ids)} names for {width} columns")
    return MatrixData(validate_adjacency(values), row_ids, col_ids)


def _load_coord(path) -> MatrixData:
    header = None
    rows, cols, vals = [], [], []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            parts = s.split()
            if header is None:
                if len(parts) != 3 or not all(p.isdigit() for p in parts):
                    raise DataFormatError(path, lineno, f"expected header 'n_rows n_cols nnz', got {s!r}")
                header = tuple(int(p) for p in parts)
                if header[0] < 1 or header[1] < 1:
                    raise DataFormatError(path, lineno, "matrix dimensions must be positive")
                continue
            if len(parts) not in (2, 3):
                raise DataFormatError(path, lineno, f"expected 'i j value', got {s!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                v = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise DataFormatError(path, lineno, f"cannot parse {s!r}") from None
            if not (1 <= i <= header[0] and 1 <= j <= header[1]):
                raise DataFormatError(path, lineno, f"index ({i}, {j}) outside {header[0]}x{header[1]}")
            if not math.isfinite(v):
                raise DataFormatError(path, lineno, f"non-finite value {parts[2]!r}")
            if v < 0:
                raise DataFormatError(path, lineno, f"negative value {parts[2]!r}")
            if (i, j) in seen:
                raise DataFormatError(path, lineno, f"duplicate entry ({i}, {j})")
            seen.add((i, j))
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
    if header is None:
        raise DataFormatError(path, 0, "missing header line")
    if len(vals) != header[2]:
        raise DataFormatError(path, 0, f"header declares {header[2]} entries, found {len(vals)}")
    A = sp.csr_matrix((vals, (rows, cols)), shape=header[:2], dtype=float)
    return MatrixData(A)


def _load_edges(path) -> MatrixData:
    row_index, col_index = {}, {}
    entries = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith(("%", "#")):
                continue
            parts = s.replace(",", " ").split()
            if len(parts) not in (2, 3):
                raise DataFormatError(path, lineno, f"expected 'row col [weight]', got {s!r}")
            try:
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise DataFormatError(path, lineno, f"bad weight {parts[2]!r}") from None
            if not math.isfinite(w) or w < 0:
                raise DataFormatError(path, lineno, f"weight must be finite and >= 0, got {parts[2]!r}")
            i = row_index.setdefault(parts[0], len(row_index))
            j = col_index.setdefault(parts[1], len(col_index))
            if (i, j) in entries:
                raise DataFormatError(path, lineno, f"duplicate edge ({parts[0]}, {parts[1]})")
            entries[(i, j)] = w
    if not entries:
        raise DataFormatError(path, 0, "no edges")
    (ri, ci), vals = zip(*entries.keys()), list(entries.values())
    A = sp.csr_matrix((vals, (ri, ci)), shape=(len(row_index), len(col_index)), dtype=float)
    return MatrixData(A, list(row_index), list(col_index))


def load_matrix(path, format=None, dense: bool | None = None, with_ids: bool = False):
    """Load an adjacency matrix.

    ``format`` defaults from the file suffix (``.coord``/``.mtx`` -> COORD,
    ``.edges``/``.tsv``/``.txt`` -> EDGES, otherwise DENSE_CSV). COORD and
    EDGES load as CSR unless ``dense=True``. With ``with_ids`` a
    :class:`MatrixData` carrying row/column identifiers is returned.
    """
    fmt = MatrixFormat.from_path(path) if format is None else MatrixFormat.parse(format)
    loader = {MatrixFormat.DENSE_CSV: _load_dense_csv, MatrixFormat.COORD: _load_coord,
              MatrixFormat.EDGES: _load_edges}[fmt]
    data = loader(path)
    if dense:
        data.matrix = as_dense(data.matrix)
    elif dense is False and not sp.issparse(data.matrix):
        data.matrix = sp.csr_matrix(data.matrix)
    return data if with_ids else data.matrix


def save_matrix(path, M, format="csv", row_ids=None, col_ids=None) -> None:
    """Write ``M`` so that :func:`load_matrix` restores it exactly.

    Dense CSV writes every entry with 17 significant digits; COORD writes the
    nonzero entries. Negative entries (e.g. Pearson similarities) are written
    as-is but are rejected by :func:`load_matrix`; use :func:`load_similarity`.
    """
    fmt = MatrixFormat.parse(format)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if fmt is MatrixFormat.DENSE_CSV:
        D = as_dense(M)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if col_ids is not None:
                w.writerow(([""] if row_ids is not None else []) + list(col_ids))
            for k, row in enumerate(D):
                cells = [_fmt(v) for v in row]
                w.writerow(([row_ids[k]] if row_ids is not None else []) + cells)
    elif fmt is MatrixFormat.COORD:
        C = sp.coo_matrix(M)
        C.sum_duplicates()
        keep = C.data != 0
        r, c, v = C.row[keep], C.col[keep], C.data[keep]
        order = np.lexsort((c, r))
        with open(path, "w") as fh:
            fh.write("% coordinate matrix, 1-based indices\n")
            fh.write(f"{C.shape[0]} {C.shape[1]} {order.size}\n")
            for k in order:
                fh.write(f"{r[k] + 1} {c[k] + 1} {_fmt(v[k])}\n")
    else:
        raise ValueError("EDGES is an input-only format")


def load_similarity(path) -> np.ndarray:
    """Load a dense CSV similarity matrix; negative entries are allowed."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DataFormatError(path, 0, str(exc)) from None


# --- labels -------------------------------------------------------------------

_HEADER_NAMES = {"id", "identifier", "name", "gene", "row", "node", "item"}


def load_labels(path, ids=None) -> tuple[np.ndarray, list]:
    """Read ``identifier,class`` rows; return ``(class_indices, class_names)``.

    Class strings map to indices 0..k-1 in sorted order. When ``ids`` (the
    matrix row identifiers) is given, labels are matched by identifier and
    every identifier must be labelled exactly once; otherwise file order is
    row order.
    """
    pairs = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not any(cells):
                continue
            if len(cells) != 2 or not cells[0] or not cells[1]:
                raise DataFormatError(path, lineno, f"expected 'identifier,class', got {row!r}")
            if not pairs and cells[0].lower() in _HEADER_NAMES:
                continue
            pairs.append((lineno, cells[0], cells[1]))
    if not pairs:
        raise DataFormatError(path, 0, "no labels")
    seen = {}
    for lineno, ident, _ in pairs:
        if ident in seen:
            raise DataFormatError(path, lineno, f"duplicate identifier {ident!r} (first on line {seen[ident]})")
        seen[ident] = lineno
    names = sorted({cls for _, _, cls in pairs})
    index = {name: k for k, name in enumerate(names)}
    by_id = {ident: index[cls] for _, ident, cls in pairs}
    if ids is None:
        return np.array([index[cls] for _, _, cls in pairs], dtype=np.intp), names
    ids = [str(i) for i in ids]
    unknown = [i for i in by_id if i not in set(ids)]
    if unknown:
        raise DataFormatError(path, seen[unknown[0]], f"unknown identifier {unknown[0]!r}")
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise DataFormatError(path, 0, f"{len(missing)} identifier(s) without a label, e.g. {missing[0]!r}")
    return np.array([by_id[i] for i in ids], dtype=np.intp), names


def load_dataset(matrix_path, labels_path=None, format=None, provenance: str = "") -> LabeledDataset:
    """Matrix plus optional row labels, matched by identifier when available."""
    data = load_matrix(matrix_path, format=format, with_ids=True)
    row_classes = names = None
    if labels_path is not None:
        row_classes, names = load_labels(labels_path, ids=data.row_ids)
        if row_classes.size != data.matrix.shape[0]:
            raise DataFormatError(labels_path, 0,
                                  f"{row_classes.size} labels for {data.matrix.shape[0]} rows")
    return LabeledDataset(data.matrix, row_classes, None, names, data.row_ids, data.col_ids,
                          provenance or str(matrix_path))


def sha256sum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# --- results ------------------------------------------------------------------

def to_jsonable(obj):
    """Convert numpy containers, dataclasses and enums to JSON-ready values.

    Non-finite floats become ``None`` so the output is strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj):
        return to_jsonable(dataclasses.asdict(obj))
    return obj


def make_payload(experiment: str, config: RunConfig | dict | None, seeds: dict, curves=(),
                 tables: dict | None = None, extra: dict | None = None,
                 started: float | None = None) -> dict:
    """Assemble a result document with config echo, seeds and wall-clock metadata."""
    cfg = config.to_dict() if isinstance(config, RunConfig) else dict(config or RunConfig().to_dict())
    cfg.setdefault("tolerance", DEFAULT_TOLERANCE)
    now = time.time()
    payload = {
        "format_version": FORMAT_VERSION,
        "experiment": experiment,
        "config": cfg,
        "seeds": dict(seeds),
        "curves": [c.to_dict() if hasattr(c, "to_dict") else dict(c) for c in curves],
        "tables": dict(tables or {}),
        "metadata": {
            "finished_unix": now,
            "wall_seconds": None if started is None else now - started,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    if extra:
        payload.update(extra)
    return to_jsonable(payload)


def save_results(path, payload: dict) -> None:
    payload = to_jsonable(payload)
    for key in ("format_version", "config", "seeds"):
        if key not in payload:
            raise ValueError(f"result payload lacks {key!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")
    os.replace(tmp, path)


def load_results(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_table(path, records: list[dict]) -> None:
    """Write a list of flat records as CSV with full float precision."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fields = list(dict.fromkeys(k for r in records for k in r))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in records:
            w.writerow({k: _fmt(v) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})
