"""Network snapshots as DOT or JSON graphs."""

from __future__ import annotations

import json
from typing import List, Optional, Sequence

import numpy as np


def partial_correlation(theta: np.ndarray) -> np.ndarray:
    """``-theta_ij / sqrt(theta_ii theta_jj)`` off the diagonal, 1 on it."""
    theta = np.asarray(theta, dtype=float)
    diag = np.diag(theta)
    if np.any(diag <= 0):
        raise ValueError("diagonal of a precision matrix must be positive")
    scale = np.sqrt(np.outer(diag, diag))
    pc = -theta / scale
    np.fill_diagonal(pc, 1.0)
    return pc


def snapshot_edges(theta: np.ndarray, threshold: float = 0.01):
    """Edges ``(i, j, weight)``, ``i < j``, whose |partial correlation| exceeds ``threshold``."""
    pc = partial_correlation(theta)
    iu, ju = np.triu_indices(pc.shape[0], k=1)
    return [(int(i), int(j), float(pc[i, j])) for i, j in zip(iu, ju)
            if abs(pc[i, j]) > threshold]


def _quote(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(edges, labels: Sequence[str], name: str = "network") -> str:
    lines = [f"graph {_quote(name)} {{"]
    for i, lab in enumerate(labels):
        lines.append(f"  {i} [label={_quote(lab)}];")
    for i, j, w in edges:
        lines.append(f"  {i} -- {j} [weight={w!r}, sign={_quote('+' if w > 0 else '-')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(edges, labels: Sequence[str], t: int, mode: int, threshold: float) -> str:
    doc = {"t": t, "mode": mode, "threshold": threshold,
           "nodes": [{"id": i, "label": lab} for i, lab in enumerate(labels)],
           "edges": [{"source": i, "target": j, "partial_correlation": w} for i, j, w in edges]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_snapshot(theta: np.ndarray, t: int, mode: int, threshold: float = 0.01,
                    fmt: str = "dot", labels: Optional[List[str]] = None) -> str:
    labels = labels or [str(i) for i in range(theta.shape[0])]
    if len(labels) != theta.shape[0]:
        raise ValueError("one label per node is required")
    edges = snapshot_edges(theta, threshold)
    if fmt == "dot":
        return to_dot(edges, labels, name=f"mode{mode}_t{t}")
    if fmt == "json":
        return to_json(edges, labels, t, mode, threshold)
    raise ValueError(f"unknown format {fmt!r}")
