"""Delimited-text ingestion of expression-style matrices.

Layouts
-------
``samples`` orientation (default): one row per sample. The header names the
columns; the first column holds sample ids, an optional column called
``label`` (configurable) holds the group, every other column is a gene::

    sample,label,g1,g2
    s1,normal,4.1,7.0

``genes`` orientation: one row per gene, first column gene ids, header
row holding sample ids. An optional row whose first cell is ``label``
carries the group of every sample::

    gene,s1,s2
    label,normal,tumor
    g1,4.1,3.9

Without a header, ids are generated (``s1..``, ``g1..``) and no labels are
read. Empty cells and NA/NaN markers count as missing: samples containing
any are dropped and their number is reported in ``dropped``.
"""
import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ParseError

MISSING = {"", "na", "nan", "null", "none", "?"}


@dataclass
class ExpressionMatrix:
    values: np.ndarray  # samples x genes
    gene_ids: list
    sample_ids: list
    labels: list = field(default_factory=list)
    dropped: int = 0
    digest: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ArgumentError("expression values must be a 2-D samples x genes array")
        n, g = self.values.shape
        if len(self.gene_ids) != g:
            raise ArgumentError(f"{len(self.gene_ids)} gene ids for {g} gene columns")
        if len(set(self.gene_ids)) != g:
            seen, dup = set(), None
            for gid in self.gene_ids:
                if gid in seen:
                    dup = gid
                    break
                seen.add(gid)
            raise ParseError(f"duplicate gene id {dup!r}")
        if len(self.sample_ids) != n:
            raise ArgumentError(f"{len(self.sample_ids)} sample ids for {n} samples")
        if self.labels and len(self.labels) != n:
            raise ArgumentError(f"{len(self.labels)} labels for {n} samples")
        if not np.all(np.isfinite(self.values)):
            raise ParseError("expression values contain non-finite entries")
        if not self.digest:
            self.digest = hashlib.sha256(self.values.tobytes()).hexdigest()

    @property
    def shape(self):
        return self.values.shape

    def group(self, label):
        """Rows whose label equals ``label``."""
        if not self.labels:
            raise ArgumentError("matrix carries no sample labels")
        idx = [i for i, lab in enumerate(self.labels) if lab == label]
        if not idx:
            known = sorted(set(self.labels))
            raise ArgumentError(f"no samples labelled {label!r}; labels present: {known}")
        return self.values[idx]

    def subset_genes(self, idx):
        idx = list(idx)
        return ExpressionMatrix(self.values[:, idx], [self.gene_ids[i] for i in idx],
                                list(self.sample_ids), list(self.labels), self.dropped,
                                digest=self.digest)


def _cell(text, line, col):
    t = text.strip()
    if t.lower() in MISSING:
        return np.nan
    try:
        return float(t)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} at row {line}, column {col} (file line and field numbers)") from None


def _read_rows(path, delimiter):
    with open(path, newline="", encoding="utf-8") as fh:
        raw = fh.read()
    digest = hashlib.sha256(raw.encode("utf-8")).hexdigest()
    rows = []
    for line, row in enumerate(csv.reader(raw.splitlines(), delimiter=delimiter), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        rows.append((line, row))
    if not rows:
        raise ParseError(f"{path}: no data")
    width = len(rows[0][1])
    for line, row in rows:
        if len(row) != width:
            raise ParseError(f"line {line}: expected {width} fields, found {len(row)} (ragged row)")
    return rows, digest


def load_matrix(path, delimiter=",", orientation="samples", header=True, label_column="label"):
    """Read a delimited file into a samples x genes :class:`ExpressionMatrix`."""
    if orientation not in ("samples", "genes"):
        raise ArgumentError(f"orientation must be 'samples' or 'genes', got {orientation!r}")
    if delimiter in ("tab", "\\t"):
        delimiter = "\t"
    rows, digest = _read_rows(path, delimiter)

    if orientation == "samples":
        if header:
            (hline, head), body = rows[0], rows[1:]
            names = [h.strip() for h in head]
        else:
            body = rows
            names = ["sample"] + [f"g{j}" for j in range(1, len(rows[0][1]))]
        lab_col = names.index(label_column) if label_column in names[1:] else None
        gene_cols = [j for j in range(1, len(names)) if j != lab_col]
        sample_ids, labels, vals = [], [], []
        for i, (line, row) in enumerate(body):
            sample_ids.append(row[0].strip() or f"s{i + 1}")
            if lab_col is not None:
                labels.append(row[lab_col].strip())
            vals.append([_cell(row[j], line, j + 1) for j in gene_cols])
        gene_ids = [names[j] for j in gene_cols]
        values = np.array(vals, dtype=np.float64).reshape(len(body), len(gene_cols))
    else:
        if header:
            (hline, head), body = rows[0], rows[1:]
            sample_ids = [h.strip() for h in head[1:]]
        else:
            body = rows
            sample_ids = [f"s{j}" for j in range(1, len(rows[0][1]))]
        labels = []
        if body and body[0][1][0].strip() == label_column:
            labels = [c.strip() for c in body[0][1][1:]]
            body = body[1:]
        gene_ids = [row[0].strip() for _, row in body]
        vals = [[_cell(c, line, j + 2) for j, c in enumerate(row[1:])] for line, row in body]
        values = np.array(vals, dtype=np.float64).reshape(len(body), len(sample_ids)).T

    keep = ~np.any(np.isnan(values), axis=1)
    dropped = int(np.sum(~keep))
    if dropped:
        values = values[keep]
        sample_ids = [s for s, k in zip(sample_ids, keep) if k]
        labels = [s for s, k in zip(labels, keep) if k] if labels else labels
    if values.shape[0] == 0:
        raise ParseError(f"{path}: every sample has missing values")
    return ExpressionMatrix(values, gene_ids, sample_ids, labels, dropped, digest)


def write_matrix(path, matrix, delimiter=",", orientation="samples", label_column="label"):
    """Inverse of :func:`load_matrix` (with a header row)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if orientation == "samples":
            head = ["sample"] + ([label_column] if matrix.labels else []) + list(matrix.gene_ids)
            w.writerow(head)
            for i, sid in enumerate(matrix.sample_ids):
                lab = [matrix.labels[i]] if matrix.labels else []
                w.writerow([sid] + lab + [repr(float(v)) for v in matrix.values[i]])
        elif orientation == "genes":
            w.writerow(["gene"] + list(matrix.sample_ids))
            if matrix.labels:
                w.writerow([label_column] + list(matrix.labels))
            for j, gid in enumerate(matrix.gene_ids):
                w.writerow([gid] + [repr(float(v)) for v in matrix.values[:, j]])
        else:
            raise ArgumentError(f"orientation must be 'samples' or 'genes', got {orientation!r}")
