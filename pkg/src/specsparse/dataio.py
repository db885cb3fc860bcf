"""Dataset loading and on-disk persistence of graphs, embeddings, labels and reports.

Feature matrices are dense float64 row-major arrays. Graphs use a plain
textual edge list: a ``"<n> <m>"`` header line followed by ``m`` lines of
``"<u> <v> <w>"`` with 0-based vertex ids, ``u < v`` and ``w > 0`` written
with 17 significant digits so weights round-trip bit-exactly. Lines starting
with ``#`` are comments.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError
from .graph import WeightedGraph


@dataclass
class Dataset:
    """Labeled point cloud: n rows of d features, optional integer class ids."""

    points: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""
    label_values: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ParseError("feature matrix must be 2-dimensional")
        n, d = self.points.shape
        if n < 2:
            raise ParseError(f"dataset has {n} rows, need at least 2")
        if d < 1:
            raise ParseError("dataset has no feature columns")
        if not np.all(np.isfinite(self.points)):
            raise ParseError("dataset contains non-finite feature values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ParseError("labels length does not match row count")
            if self.labels.size and (self.labels.min() < 0):
                raise ParseError("labels must be non-negative contiguous ids")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def num_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(self.labels.max()) + 1 if self.labels.size else 0


def _remap_labels(raw: list):
    """Map raw label values to contiguous 0-based ids, sorted by raw value.

    Numeric-looking labels sort numerically, otherwise lexicographically.
    Returns (ids array, ordered raw values).
    """
    uniq = sorted(set(raw), key=_label_sort_key)
    index = {v: i for i, v in enumerate(uniq)}
    return np.array([index[v] for v in raw], dtype=np.int64), uniq


def _label_sort_key(value):
    try:
        return (0, float(value), "")
    except (TypeError, ValueError):
        return (1, 0.0, str(value))


def standardize(dataset: Dataset) -> Dataset:
    """Per-feature standardization (zero mean, unit variance; constant columns untouched)."""
    mean = dataset.points.mean(axis=0)
    std = dataset.points.std(axis=0)
    std[std == 0.0] = 1.0
    return Dataset(
        points=(dataset.points - mean) / std,
        labels=None if dataset.labels is None else dataset.labels.copy(),
        name=dataset.name,
        label_values=list(dataset.label_values),
    )


def load_dense_csv(path, label_column: int | None = None, name: str = "") -> Dataset:
    """Load a dense CSV of numeric features, optionally extracting one label column.

    The label column (0-based index) may be non-numeric; raw label values are
    remapped to contiguous 0-based ids. Rows are 1-based in error messages.
    """
    rows = []
    raw_labels = []
    arity = None
    with open(path, "r", newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or (len(record) == 1 and record[0].strip() == ""):
                continue
            if arity is None:
                arity = len(record)
                if label_column is not None and not (0 <= label_column < arity):
                    raise ParseError(
                        f"label column {label_column} out of range for {arity} columns"
                    )
            elif len(record) != arity:
                raise ParseError(
                    f"row {lineno}: expected {arity} fields, got {len(record)}"
                )
            feats = []
            for col, tok in enumerate(record):
                if label_column is not None and col == label_column:
                    raw_labels.append(tok.strip())
                    continue
                try:
                    value = float(tok)
                except ValueError:
                    raise ParseError(f"row {lineno}: field {col} is not numeric: {tok!r}")
                if not math.isfinite(value):
                    raise ParseError(f"row {lineno}: non-finite value in field {col}")
                feats.append(value)
            if not feats:
                raise ParseError(f"row {lineno}: no feature columns")
            rows.append(feats)
    if len(rows) < 2:
        raise ParseError(f"{path}: dataset has {len(rows)} rows, need at least 2")
    labels = None
    label_values = []
    if label_column is not None:
        labels, label_values = _remap_labels(raw_labels)
    return Dataset(np.array(rows, dtype=np.float64), labels, name or str(path), label_values)


def load_libsvm(path, name: str = "") -> Dataset:
    """Load a libsvm-format file ("<label> <index>:<value> ...", 1-based indices).

    Indices must be strictly increasing within a line; the feature dimension is
    the maximum index observed and absent indices are zero.
    """
    raw_labels = []
    rows = []
    max_index = 0
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            raw_labels.append(parts[0])
            prev = 0
            entries = []
            for item in parts[1:]:
                try:
                    idx_text, val_text = item.split(":", 1)
                    idx = int(idx_text)
                    value = float(val_text)
                except ValueError:
                    raise ParseError(f"line {lineno}: malformed feature {item!r}")
                if idx <= prev:
                    raise ParseError(
                        f"line {lineno}: feature indices must be strictly increasing "
                        f"(saw {idx} after {prev})"
                    )
                if not math.isfinite(value):
                    raise ParseError(f"line {lineno}: non-finite value for index {idx}")
                prev = idx
                entries.append((idx, value))
            max_index = max(max_index, prev)
            rows.append(entries)
    if len(rows) < 2:
        raise ParseError(f"{path}: dataset has {len(rows)} rows, need at least 2")
    points = np.zeros((len(rows), max_index), dtype=np.float64)
    for i, entries in enumerate(rows):
        for idx, value in entries:
            points[i, idx - 1] = value
    labels, label_values = _remap_labels(raw_labels)
    return Dataset(points, labels, name or str(path), label_values)


def save_graph(graph: WeightedGraph, path) -> None:
    """Write a graph in the textual edge-list format (17 significant digits)."""
    with open(path, "w") as fh:
        fh.write(f"{graph.n} {graph.m}\n")
        for u, v, w in zip(graph.edges_u, graph.edges_v, graph.edges_w):
            fh.write(f"{u} {v} {w:.17g}\n")


def load_graph(path) -> WeightedGraph:
    """Read a graph written by :func:`save_graph`; validates the format strictly."""
    header = None
    edges = []
    seen = set()
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if header is None:
                if len(parts) != 2:
                    raise ParseError(f"line {lineno}: malformed header {line!r}")
                try:
                    header = (int(parts[0]), int(parts[1]))
                except ValueError:
                    raise ParseError(f"line {lineno}: malformed header {line!r}")
                if header[0] < 1 or header[1] < 0:
                    raise ParseError(f"line {lineno}: invalid header counts {line!r}")
                continue
            if len(parts) != 3:
                raise ParseError(f"line {lineno}: expected 'u v w', got {line!r}")
            try:
                u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"line {lineno}: malformed edge {line!r}")
            n = header[0]
            if not (0 <= u < n and 0 <= v < n):
                raise ParseError(f"line {lineno}: vertex id out of range [0,{n})")
            if u >= v:
                raise ParseError(f"line {lineno}: edges must satisfy u < v")
            if not (w > 0.0) or not math.isfinite(w):
                raise ParseError(f"line {lineno}: weight must be positive finite, got {w}")
            if (u, v) in seen:
                raise ParseError(f"line {lineno}: duplicate edge ({u},{v})")
            seen.add((u, v))
            edges.append((u, v, w))
    if header is None:
        raise ParseError(f"{path}: empty graph file")
    if len(edges) != header[1]:
        raise ParseError(
            f"{path}: header promises {header[1]} edges, file holds {len(edges)}"
        )
    return WeightedGraph.from_edges(header[0], edges)


def save_embedding(embedding, csv_path, sidecar_path=None) -> None:
    """Write an embedding as CSV (one row per vertex, 15 significant digits)
    plus a JSON sidecar with eigenvalues, residuals and provenance."""
    vectors = embedding.vectors
    with open(csv_path, "w") as fh:
        for row in vectors:
            fh.write(",".join(f"{x:.15g}" for x in row) + "\n")
    if sidecar_path is not None:
        sidecar = {
            "eigenvalues": [float(x) for x in embedding.eigenvalues],
            "residuals": [float(x) for x in embedding.residuals],
            "normalized": bool(embedding.normalized),
            "source": embedding.source,
        }
        with open(sidecar_path, "w") as fh:
            json.dump(sidecar, fh, indent=2)
            fh.write("\n")


def save_labels(labels, path) -> None:
    """Write labels as two-column CSV: vertex id, cluster id."""
    labels = np.asarray(labels)
    with open(path, "w") as fh:
        for i, lab in enumerate(labels):
            fh.write(f"{i},{int(lab)}\n")


def load_labels(path) -> np.ndarray:
    """Read a label CSV: either one id per line or (vertex, id) pairs."""
    pairs = []
    single = []
    with open(path, "r", newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or (len(record) == 1 and record[0].strip() == ""):
                continue
            try:
                if len(record) == 1:
                    single.append(int(float(record[0])))
                elif len(record) == 2:
                    pairs.append((int(record[0]), int(float(record[1]))))
                else:
                    raise ValueError
            except ValueError:
                raise ParseError(f"line {lineno}: malformed label record {record!r}")
    if pairs and single:
        raise ParseError(f"{path}: mixed one- and two-column label records")
    if pairs:
        out = np.zeros(len(pairs), dtype=np.int64)
        for vid, lab in pairs:
            if not (0 <= vid < len(pairs)):
                raise ParseError(f"{path}: vertex id {vid} out of range")
            out[vid] = lab
        return out
    return np.array(single, dtype=np.int64)


def save_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
