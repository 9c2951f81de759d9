"""Edge-recovery and change-point metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .tensor import DEFAULT_KRON_CAP, kron_list

METRICS = ("aucroc", "aucpr", "bestf1", "tdr")


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise ValueError("labels must contain both classes")
    return scores, labels


def auc_roc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties count one half)."""
    scores, labels = _check_binary(scores, labels)
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    ranks = (ends - (counts - 1) / 2.0)[inverse]
    n_pos = labels.sum()
    n_neg = labels.size - n_pos
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _pr_points(scores, labels):
    """Precision and recall at every distinct score used as a ``>=`` threshold."""
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    return tp / (tp + fp), tp / labels.sum()


def auc_pr(scores, labels) -> float:
    """Average precision: ``sum_k (r_k - r_{k-1}) p_k``."""
    precision, recall = _pr_points(scores, labels)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def best_f1(scores, labels) -> float:
    precision, recall = _pr_points(scores, labels)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(denom), where=denom > 0)
    return float(f1.max())


def temporal_deviation(path: np.ndarray) -> np.ndarray:
    """``||theta_t - theta_{t-1}||_F / ||theta_t||_F`` for ``t = 1..T-1``."""
    path = np.asarray(path, dtype=float)
    if path.shape[0] < 2:
        raise ValueError("temporal deviation needs at least two time steps")
    diff = np.linalg.norm(np.diff(path, axis=0), axis=(1, 2))
    return diff / np.linalg.norm(path[1:], axis=(1, 2))


def tdr(path: np.ndarray, change_points: Sequence[int]) -> float:
    """Mean deviation at the change points over the mean deviation overall.

    ``change_points`` are zero-based first steps of new segments; the deviation
    at ``c`` is the one between steps ``c - 1`` and ``c``.
    """
    cps = np.asarray(sorted(change_points), dtype=int)
    if cps.size == 0:
        raise ValueError("TDR needs at least one change point")
    td = temporal_deviation(path)
    if np.any(cps < 1) or np.any(cps > td.size):
        raise ValueError("change points must lie in [1, T-1]")
    overall = td.mean()
    if overall == 0:
        raise ValueError("TDR undefined: the path never changes")
    return float(td[cps - 1].mean() / overall)


def _upper_pairs(d: int):
    return np.triu_indices(d, k=1)


def score_edges(estimate, truth: Sequence[np.ndarray], scope: str = "per-mode",
                cap: Optional[int] = DEFAULT_KRON_CAP) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Edge scores ``|estimate|`` and labels ``truth != 0`` on off-diagonal pairs.

    Returns one ``(scores, labels)`` pair per mode (``scope="per-mode"``,
    ``estimate`` a list of factor paths) or a single pair for the full
    Kronecker network (``scope="flattened"``, ``estimate`` a ``(T, D, D)``
    path). Both arrays have shape ``(T, n_pairs)``.
    """
    if scope == "per-mode":
        if len(estimate) != len(truth):
            raise ValueError("estimate and truth have a different number of modes")
        pairs = zip(estimate, truth)
    elif scope == "flattened":
        T = truth[0].shape[0]
        K = np.stack([kron_list([th[t] for th in truth], cap=cap) for t in range(T)])
        pairs = [(np.asarray(estimate), K)]
    else:
        raise ValueError(f"unknown scope {scope!r}")
    out = []
    for est, tru in pairs:
        est = np.asarray(est, dtype=float)
        if est.shape != tru.shape:
            raise ValueError(f"estimate shape {est.shape} does not match truth {tru.shape}")
        iu = _upper_pairs(tru.shape[-1])
        out.append((np.abs(est[:, iu[0], iu[1]]), tru[:, iu[0], iu[1]] != 0))
    return out


@dataclass
class MetricReport:
    """Per-mode metrics and their mean over modes (``summary``)."""

    modes: List[Dict[str, Optional[float]]] = field(default_factory=list)
    summary: Dict[str, Optional[float]] = field(default_factory=dict)
    scope: str = "per-mode"
    pooling: str = "pooled"

    def to_dict(self) -> dict:
        return asdict(self)


_EDGE_FUNCS = {"aucroc": auc_roc, "aucpr": auc_pr, "bestf1": best_f1}


def _edge_metric(name, scores, labels, pooling):
    fn = _EDGE_FUNCS[name]
    if pooling == "pooled":
        return fn(scores, labels)
    vals = [fn(s, l) for s, l in zip(scores, labels) if 0 < l.sum() < l.size]
    if not vals:
        raise ValueError("no time step has both edge classes")
    return float(np.mean(vals))


def evaluate(estimate, truth_thetas: Sequence[np.ndarray],
             change_points: Optional[Sequence[Sequence[int]]] = None,
             metrics: Sequence[str] = ("aucroc", "aucpr", "bestf1"),
             scope: str = "per-mode", pooling: str = "pooled",
             cap: Optional[int] = DEFAULT_KRON_CAP) -> MetricReport:
    """Score an estimate against the true networks.

    For ``scope="flattened"`` TDR is computed on the full path against the
    union of the per-mode change points.
    """
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics {sorted(unknown)}")
    if pooling not in ("pooled", "per-time"):
        raise ValueError(f"unknown pooling {pooling!r}")
    scored = score_edges(estimate, truth_thetas, scope=scope, cap=cap)
    if scope == "flattened":
        paths = [np.asarray(estimate)]
        cps = [sorted(set().union(*change_points))] if change_points else [[]]
    else:
        paths = list(estimate)
        cps = list(change_points) if change_points else [[] for _ in paths]

    report = MetricReport(scope=scope, pooling=pooling)
    for (scores, labels), path, cp in zip(scored, paths, cps):
        row: Dict[str, Optional[float]] = {
            "n_pos": int(labels.sum()), "n_neg": int(labels.size - labels.sum())}
        for name in metrics:
            if name == "tdr":
                row[name] = tdr(path, cp) if len(cp) else None
            else:
                row[name] = _edge_metric(name, scores, labels, pooling)
        report.modes.append(row)
    if "tdr" in metrics and all(r["tdr"] is None for r in report.modes):
        raise ValueError("TDR requested but no change points are available")
    for name in metrics:
        vals = [r[name] for r in report.modes if r[name] is not None]
        report.summary[name] = float(np.mean(vals)) if vals else None
    return report
