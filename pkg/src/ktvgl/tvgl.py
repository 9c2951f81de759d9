"""Time-varying graphical lasso solved by ADMM.

Minimizes, over a path of precision matrices ``theta[0..T-1]``::

    sum_t  tr(S_t theta_t) - logdet theta_t + lam * ||theta_t||_{1,od}
      + rho * sum_{t>=1} psi(theta_t - theta_{t-1})

with ``psi`` either the Laplacian (sum of squares) or the element-wise l1
penalty. The splitting uses one consensus copy ``z0`` for the sparsity term
and a pair ``(z1[t], z2[t])`` for every temporal difference, with scaled
duals ``u0, u1, u2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

logger = logging.getLogger(__name__)

LAPLACIAN = "laplacian"
L1 = "l1"
PENALTY_KINDS = (LAPLACIAN, L1)


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass(frozen=True)
class PenaltySpec:
    """Temporal-consistency penalty ``rho * psi``."""

    kind: str = LAPLACIAN
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}; use one of {PENALTY_KINDS}")
        if not self.rho >= 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")

    def psi(self, diff: np.ndarray) -> float:
        if self.kind == LAPLACIAN:
            return float(np.sum(np.square(diff)))
        return float(np.sum(np.abs(diff)))


@dataclass(frozen=True)
class TvglConfig:
    """Solver settings.

    ``adaptive_step`` turns on residual balancing of ``admm_step``; the
    default fixed step keeps runs reproducible.
    """

    lam: float = 0.0
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    admm_step: float = 1.0
    max_admm_iters: int = 2000
    eps_abs: float = 1e-5
    eps_rel: float = 1e-4
    adaptive_step: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if not self.admm_step > 0:
            raise ValueError("admm_step must be positive")
        if self.max_admm_iters < 1:
            raise ValueError("max_admm_iters must be a positive integer")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ValueError("eps_abs and eps_rel must be positive")

    def scaled(self, factor: float) -> "TvglConfig":
        """Copy with ``lam`` and ``rho`` divided by ``factor``."""
        return replace(self, lam=self.lam / factor,
                       penalty=replace(self.penalty, rho=self.penalty.rho / factor))


@dataclass
class AdmmState:
    """Everything needed to resume ADMM; ``precision`` is the reported path."""

    precision: np.ndarray
    theta: np.ndarray
    z0: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    eta: float = 1.0

    @classmethod
    def from_path(cls, path: np.ndarray, eta: float = 1.0) -> "AdmmState":
        path = np.array(path, dtype=float)
        zeros_pair = np.zeros_like(path[1:])
        return cls(precision=path.copy(), theta=path.copy(), z0=path.copy(),
                   z1=path[:-1].copy(), z2=path[1:].copy(),
                   u0=np.zeros_like(path), u1=zeros_pair, u2=zeros_pair.copy(), eta=eta)

    @property
    def T(self) -> int:
        return self.precision.shape[0]

    def copy(self) -> "AdmmState":
        return AdmmState(*(getattr(self, f).copy() for f in
                           ("precision", "theta", "z0", "z1", "z2", "u0", "u1", "u2")),
                         eta=self.eta)

    def shifted(self, drop: int, length: int) -> "AdmmState":
        """Slide the state: drop ``drop`` leading steps and pad to ``length``.

        Padded steps copy the newest kept step; padded temporal pairs start at
        consensus with zero duals.
        """
        if not 0 <= drop < self.T or length < 1 or length < self.T - drop:
            raise ValueError(f"cannot shift a state of length {self.T} by {drop} to {length}")

        def pad(arr, n):
            kept = arr[drop:]
            extra = np.repeat(kept[-1:], n - len(kept), axis=0)
            return np.concatenate([kept, extra])

        precision = pad(self.precision, length)
        new = AdmmState(precision=precision, theta=pad(self.theta, length),
                        z0=pad(self.z0, length), z1=None, z2=None,
                        u0=pad(self.u0, length), u1=None, u2=None, eta=self.eta)
        pairs = self.T - 1 - drop
        z1 = self.z1[drop:drop + pairs]
        z2 = self.z2[drop:drop + pairs]
        u1 = self.u1[drop:drop + pairs]
        u2 = self.u2[drop:drop + pairs]
        missing = length - 1 - pairs
        if missing:
            fresh = AdmmState.from_path(precision[pairs:])
            z1 = np.concatenate([z1, fresh.z1])
            z2 = np.concatenate([z2, fresh.z2])
            u1 = np.concatenate([u1, fresh.u1])
            u2 = np.concatenate([u2, fresh.u2])
        new.z1, new.z2, new.u1, new.u2 = z1, z2, u1, u2
        return new


@dataclass
class TvglResult:
    precision: np.ndarray
    state: AdmmState
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    objective: float
    initial_objective: float
    returned: str  # "z0", "theta" or "init"


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def prox_logdet(S: np.ndarray, A: np.ndarray, eta) -> np.ndarray:
    """Minimizer of ``tr(S X) - logdet X + eta/2 ||X - A||_F^2``.

    Works on single matrices or stacks of shape ``(T, d, d)``; ``eta`` may be
    a scalar or one value per matrix. The result is always positive definite.
    """
    S = np.asarray(S, dtype=float)
    A = np.asarray(A, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    rhs = _sym(eta[..., None, None] * A - S) if eta.ndim else _sym(eta * A - S)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("non-finite input to prox_logdet")
    w, Q = np.linalg.eigh(rhs)
    e = eta[..., None] if eta.ndim else eta
    root = np.sqrt(w * w + 4.0 * e)
    # (w + root) / (2 eta) loses everything to cancellation when w << 0
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.where(w >= 0, (w + root) / (2.0 * e), 2.0 / (root - w))
    return (Q * xi[..., None, :]) @ np.swapaxes(Q, -1, -2)


def soft_threshold(a: np.ndarray, kappa) -> np.ndarray:
    return np.sign(a) * np.maximum(np.abs(a) - kappa, 0.0)


def prox_offdiag_l1(A: np.ndarray, kappa: float) -> np.ndarray:
    """Soft-threshold the off-diagonal entries of ``A`` (or of each matrix in a stack)."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    A = np.asarray(A, dtype=float)
    out = soft_threshold(A, kappa)
    d = A.shape[-1]
    idx = np.arange(d)
    out[..., idx, idx] = A[..., idx, idx]
    return out


def prox_temporal_pair(A1: np.ndarray, A2: np.ndarray, penalty: PenaltySpec, eta: float):
    """Minimize ``rho psi(Z2 - Z1) + eta/2 (||Z1 - A1||^2 + ||Z2 - A2||^2)``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    A1 = np.asarray(A1, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    delta = A2 - A1
    total = A1 + A2
    if penalty.kind == LAPLACIAN:
        diff = delta * (eta / (eta + 4.0 * penalty.rho))
    else:
        diff = soft_threshold(delta, 2.0 * penalty.rho / eta)
    return 0.5 * (total - diff), 0.5 * (total + diff)


def _logdet_pd(theta: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(theta)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("precision matrix is not positive definite") from exc
    return 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)


def offdiag_l1(theta: np.ndarray) -> np.ndarray:
    """Off-diagonal l1 norm of each matrix in a stack."""
    a = np.abs(theta)
    return a.sum(axis=(-2, -1)) - np.trace(a, axis1=-2, axis2=-1)


def tvgl_objective(S: np.ndarray, theta: np.ndarray, lam: float,
                   penalty: PenaltySpec) -> float:
    S = np.asarray(S, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if S.shape != theta.shape:
        raise ValueError(f"covariance path {S.shape} and precision path {theta.shape} differ")
    fit = np.einsum("tij,tji->", S, theta) - np.sum(_logdet_pd(theta))
    sparsity = lam * np.sum(offdiag_l1(theta))
    temporal = penalty.rho * penalty.psi(np.diff(theta, axis=0)) if len(theta) > 1 else 0.0
    return float(fit + sparsity + temporal)


def is_positive_definite(theta: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(theta)
    except np.linalg.LinAlgError:
        return False
    return True


def check_covariance_path(S: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 3 or S.shape[1] != S.shape[2] or S.shape[0] < 1:
        raise ValueError(f"expected a (T, d, d) covariance path, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("covariance path has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(S))))
    if np.max(np.abs(S - np.swapaxes(S, 1, 2))) > tol * scale:
        raise ValueError("covariance matrices must be symmetric")
    return S


def solve_tvgl(S: np.ndarray, config: TvglConfig = TvglConfig(),
               warm_start: Union[None, np.ndarray, AdmmState] = None) -> TvglResult:
    """Solve the time-varying graphical lasso for the covariance path ``S``.

    Parameters
    ----------
    S : ndarray, shape (T, d, d)
        Empirical covariances.
    config : TvglConfig
    warm_start : ndarray of shape (T, d, d) or AdmmState, optional
        Initial precision path, or a full solver state (primal, consensus and
        dual variables) from an earlier solve. Defaults to identities.

    Returns
    -------
    TvglResult
        ``precision`` is the sparse consensus iterate ``z0`` when every
        matrix in it is positive definite, otherwise the log-det iterate.
        If neither is positive definite (a diverged run), or the chosen path
        scores worse than the starting path, the starting path is returned
        instead (``returned == "init"``).
    """
    S = check_covariance_path(S)
    T, d, _ = S.shape
    if warm_start is None:
        state = AdmmState.from_path(np.broadcast_to(np.eye(d), (T, d, d)), eta=config.admm_step)
    elif isinstance(warm_start, AdmmState):
        state = warm_start.copy()
        if not config.adaptive_step:
            state.eta = config.admm_step
    else:
        state = AdmmState.from_path(warm_start, eta=config.admm_step)
    if state.precision.shape != S.shape:
        raise ValueError(f"warm start of shape {state.precision.shape} does not match {S.shape}")

    lam = config.lam
    penalty = config.penalty
    eta = state.eta
    init_path = state.precision.copy()
    init_obj = tvgl_objective(S, init_path, lam, penalty)

    theta, z0, z1, z2 = state.theta, state.z0, state.z1, state.z2
    u0, u1, u2 = state.u0, state.u1, state.u2
    divisor = np.ones(T)
    divisor[:-1] += 1
    divisor[1:] += 1
    count = theta.size + z1.size + z2.size
    sq = lambda a: float(np.vdot(a, a))

    converged = False
    rnorm = snorm = np.inf
    it = 0
    for it in range(1, config.max_admm_iters + 1):
        A = z0 - u0
        A[:-1] += z1 - u1
        A[1:] += z2 - u2
        A /= divisor[:, None, None]
        theta = _sym(prox_logdet(S, A, eta * divisor))

        z0_old, z1_old, z2_old = z0, z1, z2
        z0 = prox_offdiag_l1(theta + u0, lam / eta)
        if T > 1:
            z1, z2 = prox_temporal_pair(theta[:-1] + u1, theta[1:] + u2, penalty, eta)

        u0 = u0 + theta - z0
        u1 = u1 + theta[:-1] - z1
        u2 = u2 + theta[1:] - z2

        rnorm = np.sqrt(sq(theta - z0) + sq(theta[:-1] - z1) + sq(theta[1:] - z2))
        snorm = eta * np.sqrt(sq(z0 - z0_old) + sq(z1 - z1_old) + sq(z2 - z2_old))
        e_pri = np.sqrt(count) * config.eps_abs + config.eps_rel * max(
            np.sqrt(sq(theta) + sq(theta[:-1]) + sq(theta[1:])),
            np.sqrt(sq(z0) + sq(z1) + sq(z2)))
        e_dual = np.sqrt(count) * config.eps_abs + config.eps_rel * eta * np.sqrt(
            sq(u0) + sq(u1) + sq(u2))
        if rnorm <= e_pri and snorm <= e_dual:
            converged = True
            break

        if config.adaptive_step:
            new_eta = eta
            if rnorm > 10.0 * snorm:
                new_eta = 2.0 * eta
            elif snorm > 10.0 * rnorm:
                new_eta = eta / 2.0
            if new_eta != eta:
                u0, u1, u2 = (u * (eta / new_eta) for u in (u0, u1, u2))
                eta = new_eta

    if not converged:
        logger.warning("TVGL ADMM did not converge in %d iterations (r=%.3g, s=%.3g)",
                       config.max_admm_iters, rnorm, snorm)

    if is_positive_definite(z0):
        candidate, returned = z0, "z0"
    elif is_positive_definite(theta):
        candidate, returned = theta, "theta"
    else:
        logger.warning("TVGL ADMM iterates lost positive definiteness; keeping the initialization")
        candidate, returned = init_path, "init"
    obj = tvgl_objective(S, candidate, lam, penalty)
    if obj > init_obj:
        candidate, returned, obj = init_path, "init", init_obj

    final = AdmmState(precision=candidate.copy(), theta=theta, z0=z0, z1=z1, z2=z2,
                      u0=u0, u1=u1, u2=u2, eta=eta)
    return TvglResult(precision=candidate.copy(), state=final, iterations=it,
                      converged=converged, primal_residual=float(rnorm),
                      dual_residual=float(snorm), objective=obj,
                      initial_objective=init_obj, returned=returned)
