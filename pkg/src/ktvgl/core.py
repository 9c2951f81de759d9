"""Kronecker time-varying graphical lasso.

The precision of ``vec(X_t)`` is modelled as ``theta_t[0] (x) ... (x)
theta_t[M-1]``. Fitting alternates over modes: with the other factors fixed,
the mode-m problem is an ordinary TVGL on the whitened mode covariances
returned by :func:`mode_covariance`, with ``lam_m`` and ``rho_m`` divided by
``D / d_m``.

A multi-network path is represented as a list with one ``(T, d_m, d_m)``
array per mode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Union

import numpy as np

from .tensor import DEFAULT_KRON_CAP, TensorSeries, batched_mode_products, kron_list, unfold
from .tvgl import (AdmmState, PenaltySpec, TvglConfig, _logdet_pd, offdiag_l1,
                   solve_tvgl)

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class KtvglConfig:
    """Per-mode penalties plus outer-loop controls.

    ``lams`` and ``penalties`` are given in the form of the full objective;
    the division by ``D / d_m`` happens inside :func:`fit_ktvgl`.
    """

    lams: tuple
    penalties: tuple
    inner: TvglConfig = field(default_factory=TvglConfig)
    max_outer_sweeps: int = 10
    outer_tol: float = 1e-4
    report_normalization: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lams", tuple(float(l) for l in self.lams))
        object.__setattr__(self, "penalties", tuple(self.penalties))
        if len(self.lams) != len(self.penalties):
            raise ValueError("need one lambda and one penalty per mode")
        if any(not l >= 0 for l in self.lams):
            raise ValueError("lambdas must be nonnegative")
        if self.max_outer_sweeps < 1 or not self.outer_tol > 0:
            raise ValueError("max_outer_sweeps must be >= 1 and outer_tol > 0")

    @classmethod
    def uniform(cls, M: int, lam: float, rho: float, kind: str = "laplacian",
                **kwargs) -> "KtvglConfig":
        """Same ``lam``, ``rho`` and penalty kind for every mode."""
        return cls(lams=(lam,) * M, penalties=(PenaltySpec(kind, rho),) * M, **kwargs)

    @property
    def M(self) -> int:
        return len(self.lams)


@dataclass
class KtvglResult:
    thetas: List[np.ndarray]
    objectives: List[float]
    sweeps: int
    converged: bool
    inner_iterations: List[List[int]]  # [sweep][mode]
    inner_converged: bool
    objective_increased: bool
    states: List[AdmmState]

    def normalized(self) -> List[np.ndarray]:
        return normalize_factors(self.thetas)


def _check_path(x: TensorSeries, thetas: Sequence[np.ndarray]) -> None:
    if len(thetas) != x.M:
        raise ValueError(f"expected {x.M} mode factors, got {len(thetas)}")
    for m, th in enumerate(thetas):
        if th.shape != (x.T, x.shape[m], x.shape[m]):
            raise ValueError(
                f"mode {m}: factor path of shape {th.shape}, expected "
                f"{(x.T, x.shape[m], x.shape[m])}")


def init_networks(x: TensorSeries) -> List[np.ndarray]:
    """Identity factors for every time step and mode."""
    return [np.tile(np.eye(d), (x.T, 1, 1)) for d in x.shape]


def _mode_scatter(samples: np.ndarray, mats: Sequence[np.ndarray], m: int) -> np.ndarray:
    """Sum over samples of ``Y A^T`` for a ``(T, n, ...)`` block; returns ``(T, d_m, d_m)``."""
    Y = batched_mode_products(samples, mats, skip=m)
    ax = 2 + m
    d_m = samples.shape[ax]
    A = np.moveaxis(samples, ax, 2).reshape(samples.shape[0], -1, d_m, samples[0, 0].size // d_m)
    Yu = np.moveaxis(Y, ax, 2).reshape(A.shape)
    return np.einsum("tnir,tnjr->tij", Yu, A)


def mode_covariance(x: TensorSeries, thetas: Sequence[np.ndarray], m: int) -> np.ndarray:
    """Whitened mode-``m`` covariances, one ``d_m x d_m`` matrix per time step.

    ``S_t = 1/(n_t D_m) sum_n unfold(X_tn x_{l!=m} theta_t[l], m) unfold(X_tn, m)^T``
    with ``D_m`` the product of the other mode sizes. The Kronecker product of
    the other factors is never formed.
    """
    if not 0 <= m < x.M:
        raise ValueError(f"mode {m} out of range")
    _check_path(x, thetas)
    scale = x.D_without(m)
    if x.is_uniform:
        S = _mode_scatter(x.stacked(), thetas, m) / (x.n_per_step[0] * scale)
    else:
        S = np.empty((x.T, x.shape[m], x.shape[m]))
        for t, s in enumerate(x.samples):
            mats = [th[t:t + 1] for th in thetas]
            S[t] = _mode_scatter(s[None], mats, m)[0] / (s.shape[0] * scale)
    return 0.5 * (S + np.swapaxes(S, 1, 2))


def trace_identity_check(x: TensorSeries, thetas: Sequence[np.ndarray], t: int, m: int,
                         cap: Optional[int] = DEFAULT_KRON_CAP):
    """``(tr(S_t K_t), D_m tr(S_t^(m) theta_t[m]))`` with ``K_t`` built explicitly."""
    _check_path(x, thetas)
    K = kron_list([th[t] for th in thetas], cap=cap)
    vecs = x.samples[t].reshape(x.samples[t].shape[0], -1)
    S_full = vecs.T @ vecs / vecs.shape[0]
    lhs = float(np.sum(S_full * K.T))
    single = TensorSeries((x.samples[t],))
    Sm = mode_covariance(single, [th[t:t + 1] for th in thetas], m)[0]
    rhs = float(x.D_without(m) * np.sum(Sm * thetas[m][t].T))
    return lhs, rhs


def kron_logdet(factors: Sequence[np.ndarray]) -> float:
    """``logdet`` of the Kronecker product from the factors alone."""
    dims = [f.shape[0] for f in factors]
    D = int(np.prod(dims))
    return float(sum((D // d) * _logdet_pd(f) for d, f in zip(dims, factors)))


def ktvgl_objective(x: TensorSeries, thetas: Sequence[np.ndarray], config: KtvglConfig) -> float:
    """Full penalized negative log-likelihood, evaluated factor-wise."""
    _check_path(x, thetas)
    if config.M != x.M:
        raise ValueError("config has a different number of modes than the data")
    S0 = mode_covariance(x, thetas, 0)
    total = x.D_without(0) * float(np.einsum("tij,tji->", S0, thetas[0]))
    for m, th in enumerate(thetas):
        total -= x.D_without(m) * float(np.sum(_logdet_pd(th)))
        total += config.lams[m] * float(np.sum(offdiag_l1(th)))
        if x.T > 1:
            total += config.penalties[m].rho * config.penalties[m].psi(np.diff(th, axis=0))
    return total


def normalize_factors(thetas: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Rescale modes ``1..M-1`` to trace ``d_m``, absorbing the scale in mode 0.

    The Kronecker product at every time step is unchanged.
    """
    out = [np.array(th, dtype=float) for th in thetas]
    for m in range(1, len(out)):
        d = out[m].shape[-1]
        c = np.trace(out[m], axis1=1, axis2=2) / d
        out[m] /= c[:, None, None]
        out[0] *= c[:, None, None]
    return out


def fit_ktvgl(x: TensorSeries, config: KtvglConfig,
              warm_start: Optional[Sequence[Union[np.ndarray, AdmmState]]] = None) -> KtvglResult:
    """Alternating minimization over the mode factors.

    Parameters
    ----------
    x : TensorSeries
    config : KtvglConfig
    warm_start : list, optional
        One entry per mode, either a ``(T, d_m, d_m)`` path or an
        :class:`AdmmState` from an earlier fit. Defaults to identities.

    Returns
    -------
    KtvglResult
        Factor paths (normalized for reporting only when
        ``config.report_normalization`` is set), per-sweep objectives starting
        with the objective at initialization, and inner-solver diagnostics.
    """
    if config.M != x.M:
        raise ValueError(f"config has {config.M} modes, data has {x.M}")
    if warm_start is None:
        states: List[Union[np.ndarray, AdmmState]] = list(init_networks(x))
    else:
        if len(warm_start) != x.M:
            raise ValueError("warm start needs one entry per mode")
        states = list(warm_start)
    thetas = [s.precision.copy() if isinstance(s, AdmmState) else np.array(s, dtype=float)
              for s in states]
    _check_path(x, thetas)

    objectives = [ktvgl_objective(x, thetas, config)]
    inner_iterations: List[List[int]] = []
    inner_converged = True
    increased = False
    converged = False
    sweep = 0
    for sweep in range(1, config.max_outer_sweeps + 1):
        iters = []
        for m in range(x.M):
            S = mode_covariance(x, thetas, m)
            sub = replace(config.inner, lam=config.lams[m],
                          penalty=config.penalties[m]).scaled(x.D_without(m))
            try:
                res = solve_tvgl(S, sub, warm_start=states[m])
            except Exception as exc:
                raise SolverError(f"inner solve failed in sweep {sweep}, mode {m}: {exc}") from exc
            thetas[m] = res.precision
            states[m] = res.state
            iters.append(res.iterations)
            inner_converged &= res.converged
        inner_iterations.append(iters)
        obj = ktvgl_objective(x, thetas, config)
        prev = objectives[-1]
        objectives.append(obj)
        if obj > prev + 1e-6 * abs(prev):
            increased = True
            logger.warning("objective increased in sweep %d: %.6g -> %.6g", sweep, prev, obj)
        if (prev - obj) <= config.outer_tol * max(abs(prev), 1e-12):
            converged = True
            break

    out = normalize_factors(thetas) if config.report_normalization else thetas
    return KtvglResult(thetas=out, objectives=objectives, sweeps=sweep, converged=converged,
                       inner_iterations=inner_iterations, inner_converged=inner_converged,
                       objective_increased=increased,
                       states=[s if isinstance(s, AdmmState) else AdmmState.from_path(s)
                               for s in states])


def fit_static_kgl(x: TensorSeries, lams: Sequence[float],
                   inner: TvglConfig = TvglConfig(), max_outer_sweeps: int = 10,
                   outer_tol: float = 1e-4) -> List[np.ndarray]:
    """One network per mode for the whole dataset (all samples pooled, no temporal term)."""
    pooled = x.pooled()
    config = KtvglConfig(lams=tuple(lams), penalties=(PenaltySpec("laplacian", 0.0),) * x.M,
                         inner=inner, max_outer_sweeps=max_outer_sweeps, outer_tol=outer_tol)
    res = fit_ktvgl(pooled, config)
    return [th[0] for th in res.thetas]
