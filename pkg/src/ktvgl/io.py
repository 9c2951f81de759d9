"""Plain-text file formats: one JSON header line, then one record per line.

Series files hold ``t sample i_1 ... i_M value`` records (zero-based). Network
files (fits and ground truth) hold ``t m i j value`` records for the upper
triangle of every matrix; readers mirror them. Values are written with
``repr`` so any finite double survives a round trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .tensor import TensorSeries

SCHEMA_VERSION = 1


class DataError(ValueError):
    """Malformed or inconsistent input file."""


def _header_line(header: dict) -> str:
    return json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n"


def _read_header(f, kind: str) -> dict:
    line = f.readline()
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"bad header line: {exc}") from exc
    if header.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"unsupported schema version {header.get('schema_version')!r}")
    if header.get("kind") not in (kind,) and not (kind == "network" and
                                                   header.get("kind") in ("fit", "truth")):
        raise DataError(f"expected a {kind} file, got {header.get('kind')!r}")
    return header


def _read_records(f, ncols: int) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(f, start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != ncols:
            raise DataError(f"line {lineno}: expected {ncols} fields, got {len(parts)}")
        rows.append(parts)
    if not rows:
        return np.empty((0, ncols))
    try:
        arr = np.array(rows, dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric record: {exc}") from exc
    if not np.all(np.isfinite(arr)):
        raise DataError("non-finite value in records")
    return arr


def write_series(path, x: TensorSeries, meta: Optional[Dict[str, Any]] = None) -> None:
    header = {"schema_version": SCHEMA_VERSION, "kind": "series",
              "shape": [x.T, *map(int, x.shape)],
              "samples_per_step": list(map(int, x.n_per_step)),
              "meta": meta or {}}
    idx = np.indices(x.shape).reshape(x.M, -1).T
    idx_txt = [" ".join(map(str, row)) for row in idx]
    with open(path, "w") as f:
        f.write(_header_line(header))
        for t, s in enumerate(x.samples):
            for n, sample in enumerate(s):
                prefix = f"{t} {n} "
                f.writelines(prefix + ij + " " + repr(float(v)) + "\n"
                             for ij, v in zip(idx_txt, sample.ravel()))


def read_series(path):
    """Returns ``(TensorSeries, header)``."""
    with open(path) as f:
        header = _read_header(f, "series")
        shape = header.get("shape")
        counts = header.get("samples_per_step")
        if not shape or len(shape) < 2 or counts is None or len(counts) != shape[0]:
            raise DataError("header needs shape [T, d_1, ..., d_M] and samples_per_step")
        T, dims = int(shape[0]), tuple(int(d) for d in shape[1:])
        rec = _read_records(f, 3 + len(dims))
    D = int(np.prod(dims))
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
    total = int(offsets[-1]) * D
    if len(rec) != total:
        raise DataError(f"expected {total} records, found {len(rec)}")
    idx = rec[:, :-1].astype(int)
    t, n = idx[:, 0], idx[:, 1]
    if np.any((t < 0) | (t >= T)):
        raise DataError("time index out of range")
    if np.any((n < 0) | (n >= np.asarray(counts)[t])):
        raise DataError("sample index out of range")
    for k, d in enumerate(dims):
        if np.any((idx[:, 2 + k] < 0) | (idx[:, 2 + k] >= d)):
            raise DataError(f"index out of range in mode {k}")
    flat = (offsets[t] + n) * D + np.ravel_multi_index(idx[:, 2:].T, dims)
    if np.unique(flat).size != total:
        raise DataError("duplicate or missing tensor entries")
    values = np.empty(total)
    values[flat] = rec[:, -1]
    values = values.reshape(-1, *dims)
    samples = tuple(values[offsets[i]:offsets[i + 1]] for i in range(T))
    return TensorSeries(samples), header


@dataclass
class NetworkFile:
    """Factor paths plus free-form header fields (config echo, diagnostics, truth info)."""

    thetas: List[np.ndarray]
    kind: str = "fit"
    header: Dict[str, Any] = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.thetas[0].shape[0]

    @property
    def dims(self):
        return [th.shape[-1] for th in self.thetas]


def write_network(path, net: NetworkFile) -> None:
    header = dict(net.header)
    header.update({"schema_version": SCHEMA_VERSION, "kind": net.kind, "T": net.T,
                   "dims": net.dims})
    with open(path, "w") as f:
        f.write(_header_line(header))
        for m, th in enumerate(net.thetas):
            iu, ju = np.triu_indices(th.shape[-1])
            pairs = [f" {m} {i} {j} " for i, j in zip(iu, ju)]
            for t in range(th.shape[0]):
                vals = th[t][iu, ju]
                f.writelines(f"{t}{p}{v!r}\n" for p, v in zip(pairs, vals.tolist()))


def read_network(path) -> NetworkFile:
    with open(path) as f:
        header = _read_header(f, "network")
        rec = _read_records(f, 5)
    try:
        T = int(header["T"])
        dims = [int(d) for d in header["dims"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError("network header needs T and dims") from exc
    expected = T * sum(d * (d + 1) // 2 for d in dims)
    if len(rec) != expected:
        raise DataError(f"expected {expected} records, found {len(rec)}")
    idx = rec[:, :4].astype(int)
    if np.any((idx[:, 1] < 0) | (idx[:, 1] >= len(dims))):
        raise DataError("mode index out of range")
    thetas = [np.full((T, d, d), np.nan) for d in dims]
    for m, d in enumerate(dims):
        sel = idx[:, 1] == m
        t, i, j = idx[sel, 0], idx[sel, 2], idx[sel, 3]
        if np.any((t < 0) | (t >= T) | (i < 0) | (j >= d) | (i > j)):
            raise DataError(f"mode {m}: record index out of range")
        thetas[m][t, i, j] = rec[sel, 4]
        thetas[m][t, j, i] = rec[sel, 4]
    if any(np.isnan(th).any() for th in thetas):
        raise DataError("missing matrix entries")
    kind = header.pop("kind")
    for key in ("schema_version", "T", "dims"):
        header.pop(key, None)
    return NetworkFile(thetas=thetas, kind=kind, header=header)
