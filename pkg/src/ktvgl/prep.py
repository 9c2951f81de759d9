"""CSV ingestion and preprocessing of real tensor time series."""

from __future__ import annotations

import csv
import logging
from typing import List, Tuple

import numpy as np

from .io import DataError

logger = logging.getLogger(__name__)


def _parse_value(raw: str, where: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise DataError(f"{where}: non-numeric value {raw!r}") from None
    if not np.isfinite(v):
        raise DataError(f"{where}: non-finite value {raw!r}")
    return v


def _index(keys: List[str]) -> dict:
    return {k: i for i, k in enumerate(keys)}


def read_long_csv(path) -> Tuple[np.ndarray, List[str], List[List[str]]]:
    """Read ``time, key_1, ..., key_M, value`` rows into a ``(T, d_1, ..., d_M)`` array.

    Keys are ordered by first appearance. Returns the array, the time labels
    and the per-mode key labels. Every combination must be present exactly once.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) < 3:
            raise DataError("long layout needs a header: time, key_1, ..., key_M, value")
        M = len(header) - 2
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    times: List[str] = []
    keys: List[List[str]] = [[] for _ in range(M)]
    seen_t, seen_k = set(), [set() for _ in range(M)]
    for lineno, r in enumerate(rows, start=2):
        if len(r) != M + 2:
            raise DataError(f"line {lineno}: expected {M + 2} fields, got {len(r)}")
        if r[0] not in seen_t:
            seen_t.add(r[0])
            times.append(r[0])
        for m in range(M):
            if r[1 + m] not in seen_k[m]:
                seen_k[m].add(r[1 + m])
                keys[m].append(r[1 + m])
    shape = (len(times),) + tuple(len(k) for k in keys)
    data = np.full(shape, np.nan)
    t_index = _index(times)
    k_index = [_index(k) for k in keys]
    for lineno, r in enumerate(rows, start=2):
        pos = (t_index[r[0]],) + tuple(k_index[m][r[1 + m]] for m in range(M))
        if not np.isnan(data[pos]):
            raise DataError(f"line {lineno}: duplicate cell {tuple(r[:-1])}")
        data[pos] = _parse_value(r[-1], f"line {lineno}")
    if np.isnan(data).any():
        raise DataError(f"{int(np.isnan(data).sum())} missing cells; the tensor must be complete")
    return data, times, keys


def read_wide_csv(path, sep: str = ":") -> Tuple[np.ndarray, List[str], List[List[str]]]:
    """Read a wide CSV: first column time, one column per series.

    Series columns are named ``key_1<sep>key_2<sep>...``; every combination of
    keys must appear exactly once.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DataError("wide layout needs a header: time, series...")
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    parts = [h.split(sep) for h in header[1:]]
    M = len(parts[0])
    if any(len(p) != M for p in parts):
        raise DataError(f"series columns must all have {M} keys separated by {sep!r}")
    keys: List[List[str]] = [[] for _ in range(M)]
    for p in parts:
        for m in range(M):
            if p[m] not in keys[m]:
                keys[m].append(p[m])
    k_index = [_index(k) for k in keys]
    shape = tuple(len(k) for k in keys)
    cols = [tuple(k_index[m][p[m]] for m in range(M)) for p in parts]
    if len(set(cols)) != len(cols):
        raise DataError("duplicate series columns")
    if len(cols) != int(np.prod(shape)):
        raise DataError("missing series columns; the tensor must be complete")
    data = np.empty((len(rows),) + shape)
    times = []
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(r)}")
        times.append(r[0])
        for pos, raw in zip(cols, r[1:]):
            if not raw.strip():
                raise DataError(f"line {lineno}: missing cell")
            data[(lineno - 2,) + pos] = _parse_value(raw, f"line {lineno}")
    return data, times, keys


def moving_average(x: np.ndarray, k: int) -> np.ndarray:
    """Centered moving average of window ``k`` along axis 0.

    Step ``t`` averages ``t - k//2 .. t + (k-1)//2``, clipped at the ends, so
    the length is preserved.
    """
    if k < 1:
        raise ValueError("smoothing window must be >= 1")
    x = np.asarray(x, dtype=float)
    if k == 1:
        return x.copy()
    T = x.shape[0]
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    lo = np.clip(np.arange(T) - k // 2, 0, T)
    hi = np.clip(np.arange(T) + (k - 1) // 2 + 1, 0, T)
    width = (hi - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    return (csum[hi] - csum[lo]) / width


def normalize(x: np.ndarray, method: str = "z") -> np.ndarray:
    """Per-series z-scores over time (``"z"``), global min-max (``"minmax"``) or ``"none"``."""
    x = np.asarray(x, dtype=float)
    if method == "none":
        return x.copy()
    if method == "minmax":
        span = x.max() - x.min()
        return (x - x.min()) / span if span > 0 else np.zeros_like(x)
    if method != "z":
        raise ValueError(f"unknown normalization {method!r}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    flat = std == 0
    if flat.any():
        logger.warning("%d constant series left at zero after centering", int(flat.sum()))
    return (x - mean) / np.where(flat, 1.0, std)
