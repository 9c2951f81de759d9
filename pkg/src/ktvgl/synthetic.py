"""Synthetic Kronecker-structured tensor time series with known networks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .tensor import TensorSeries, batched_mode_products

DEFAULT_CHANGE_SETS = ((100, 200), (100, 250), (150, 250))


@dataclass
class GroundTruth:
    """True factor paths (one ``(T, d_m, d_m)`` array per mode) and their change points.

    A change point ``c`` is the first (zero-based) time step of a new segment,
    so ``0 < c < T``.
    """

    thetas: List[np.ndarray]
    change_points: List[Tuple[int, ...]]
    seed: int
    edge_prob: float
    value_range: Tuple[float, float]

    @property
    def T(self) -> int:
        return self.thetas[0].shape[0]

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(th.shape[-1] for th in self.thetas)

    def union_change_points(self) -> Tuple[int, ...]:
        return tuple(sorted(set().union(*self.change_points)))


def gen_er_precision(d: int, edge_prob: float = 0.25,
                     value_range: Tuple[float, float] = (-3.0, 3.0),
                     rng: np.random.Generator = None,
                     symmetrize: str = "upper") -> np.ndarray:
    """Random sparse precision matrix from an Erdos-Renyi directed graph.

    Ordered pairs ``(i, j)``, ``i != j``, are selected independently with
    probability ``edge_prob``. ``symmetrize="upper"`` keeps the selections
    above the diagonal and mirrors them (each undirected edge then has
    probability ``edge_prob``); ``"either"`` keeps an edge when either
    direction was selected. Edge weights are uniform on ``value_range``; the
    diagonal is then shifted by ``0.1 + |lambda_min|``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng() if rng is None else rng
    directed = rng.random((d, d)) < edge_prob
    weights = rng.uniform(value_range[0], value_range[1], size=(d, d))
    upper = np.triu(np.ones((d, d), dtype=bool), k=1)
    if symmetrize == "upper":
        adj = directed & upper
    elif symmetrize == "either":
        adj = (directed | directed.T) & upper
    else:
        raise ValueError(f"unknown symmetrization {symmetrize!r}")
    theta = np.where(adj, weights, 0.0)
    theta = theta + theta.T
    c = np.linalg.eigvalsh(theta)[0]
    return theta + (0.1 + abs(c)) * np.eye(d)


def _segments(T: int, cps: Sequence[int]) -> List[Tuple[int, int]]:
    bounds = [0, *cps, T]
    return list(zip(bounds[:-1], bounds[1:]))


def gen_network_path(dims: Sequence[int], T: int = 300,
                     change_points: Sequence[Sequence[int]] = None,
                     edge_prob: float = 0.25,
                     value_range: Tuple[float, float] = (-3.0, 3.0),
                     seed: int = 0, symmetrize: str = "upper") -> GroundTruth:
    """Piecewise-constant factor paths with an independent draw per segment."""
    dims = [int(d) for d in dims]
    if T < 1:
        raise ValueError("T must be >= 1")
    if change_points is None:
        change_points = [()] * len(dims)
    if len(change_points) != len(dims):
        raise ValueError("need one change-point list per mode")
    cps = []
    for m, c in enumerate(change_points):
        c = tuple(int(v) for v in c)
        if any(b <= a for a, b in zip(c, c[1:])):
            raise ValueError(f"mode {m}: change points must be strictly increasing")
        if any(not 0 < v < T for v in c):
            raise ValueError(f"mode {m}: change points must lie strictly inside (0, {T})")
        cps.append(c)

    rng = np.random.default_rng(seed)
    thetas = []
    for d, c in zip(dims, cps):
        path = np.empty((T, d, d))
        for start, stop in _segments(T, c):
            path[start:stop] = gen_er_precision(d, edge_prob, value_range, rng, symmetrize)
        thetas.append(path)
    return GroundTruth(thetas=thetas, change_points=cps, seed=seed,
                       edge_prob=edge_prob, value_range=tuple(value_range))


def sample_series(truth: GroundTruth, n_per_step: int = 1, seed: int = 0) -> TensorSeries:
    """Draw ``vec(X_t) ~ N(0, K_t^{-1})`` with ``K_t`` the Kronecker product of the factors.

    With ``theta = L L^T`` per mode, ``X = Z x_0 L_0^{-T} ... x_{M-1} L_{M-1}^{-T}``
    for standard normal ``Z``, so the full factor is never built.
    """
    if n_per_step < 1:
        raise ValueError("n_per_step must be >= 1")
    rng = np.random.default_rng(seed)
    T = truth.T
    z = rng.standard_normal((T, n_per_step) + truth.dims)
    factors = []
    for th in truth.thetas:
        try:
            L = np.linalg.cholesky(th)
        except np.linalg.LinAlgError as exc:
            raise ValueError("ground-truth network is not positive definite") from exc
        factors.append(np.swapaxes(np.linalg.inv(L), 1, 2))
    return TensorSeries.from_array(batched_mode_products(z, factors))
