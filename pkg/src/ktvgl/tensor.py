"""Dense tensor primitives and the tensor time-series container.

Index conventions used throughout the package:

* tensors are plain C-ordered ``numpy`` arrays, so ``x.ravel()`` is the
  canonical vectorization (mode 0 slowest, last mode fastest);
* ``unfold(x, m)`` keeps the remaining modes in ascending order with the
  earlier ones varying slowest;
* Kronecker products list factors mode 0 first.

Under these conventions ``kron_list(mats) @ x.ravel()`` equals
``mode_product_all_except(x, mats).ravel()`` and the mode-m block structure
``K = Theta_m (x) G_m`` lines up with ``unfold(x, m)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np

DEFAULT_KRON_CAP = 4096


class KroneckerCapError(ValueError):
    """Raised when a Kronecker product would exceed the materialization cap."""


def _check_mode(ndim: int, m: int) -> None:
    if not 0 <= m < ndim:
        raise ValueError(f"mode {m} out of range for a tensor with {ndim} modes")


def unfold(x: np.ndarray, m: int) -> np.ndarray:
    """Mode-``m`` unfolding of ``x`` into a ``d_m x prod(d_l, l != m)`` matrix."""
    x = np.asarray(x)
    _check_mode(x.ndim, m)
    return np.moveaxis(x, m, 0).reshape(x.shape[m], -1)


def fold(mat: np.ndarray, m: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), m)
    rest = shape[:m] + shape[m + 1:]
    return np.moveaxis(np.asarray(mat).reshape((shape[m],) + rest), 0, m)


def mode_product(x: np.ndarray, mat: np.ndarray, m: int) -> np.ndarray:
    """``x x_m mat``: contract mode ``m`` of ``x`` with the columns of ``mat``."""
    x = np.asarray(x)
    _check_mode(x.ndim, m)
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[1] != x.shape[m]:
        raise ValueError(
            f"matrix of shape {mat.shape} cannot multiply mode {m} of size {x.shape[m]}")
    return np.moveaxis(np.tensordot(mat, x, axes=(1, m)), 0, m)


def mode_product_all_except(x: np.ndarray, mats: Sequence[Optional[np.ndarray]],
                            skip: Optional[int] = None,
                            order: Optional[Sequence[int]] = None) -> np.ndarray:
    """Apply ``mats[l]`` along every mode ``l != skip``.

    ``mats[skip]`` is ignored and may be ``None``. ``order`` permutes the
    application order, which only matters for floating-point rounding.
    """
    x = np.asarray(x, dtype=float)
    if len(mats) != x.ndim:
        raise ValueError(f"expected {x.ndim} matrices, got {len(mats)}")
    if skip is not None:
        _check_mode(x.ndim, skip)
    modes = range(x.ndim) if order is None else order
    out = x
    for l in modes:
        if l == skip:
            continue
        mat = np.asarray(mats[l], dtype=float)
        if mat.shape != (x.shape[l], x.shape[l]):
            raise ValueError(
                f"mode {l}: expected a {x.shape[l]}x{x.shape[l]} matrix, got {mat.shape}")
        out = mode_product(out, mat, l)
    return out


def batched_mode_products(x: np.ndarray, mats: Sequence[Optional[np.ndarray]],
                          skip: Optional[int] = None) -> np.ndarray:
    """Time-batched version of :func:`mode_product_all_except`.

    Parameters
    ----------
    x : ndarray, shape (T, n, d_0, ..., d_{M-1})
        ``n`` samples at each of ``T`` time steps.
    mats : list of ndarray or None
        ``mats[l]`` has shape ``(T, d_l, d_l)``; a different matrix is applied
        at each time step. ``mats[skip]`` is ignored.
    skip : int, optional
        Mode left untouched.
    """
    x = np.asarray(x, dtype=float)
    T, n = x.shape[:2]
    out = x
    for l, mat in enumerate(mats):
        if l == skip:
            continue
        ax = 2 + l
        moved = np.moveaxis(out, ax, -1)
        moved_shape = moved.shape
        flat = moved.reshape(T, -1, moved_shape[-1])
        # row-vector form: y_k = sum_j mat[k, j] x_j  <=>  y = x @ mat^T
        flat = flat @ np.swapaxes(np.asarray(mat, dtype=float), 1, 2)
        out = np.moveaxis(flat.reshape(moved_shape), -1, ax)
    return out


def kron_list(mats: Sequence[np.ndarray], cap: Optional[int] = DEFAULT_KRON_CAP) -> np.ndarray:
    """Left-to-right Kronecker product ``mats[0] (x) mats[1] (x) ...``.

    Raises :class:`KroneckerCapError` when the result dimension exceeds
    ``cap`` (``None`` disables the check).
    """
    if len(mats) == 0:
        raise ValueError("kron_list needs at least one matrix")
    mats = [np.atleast_2d(np.asarray(a, dtype=float)) for a in mats]
    rows = int(np.prod([a.shape[0] for a in mats]))
    cols = int(np.prod([a.shape[1] for a in mats]))
    if cap is not None and max(rows, cols) > cap:
        raise KroneckerCapError(
            f"Kronecker product of dimension {rows}x{cols} exceeds the cap of {cap}")
    return reduce(np.kron, mats)


@dataclass(frozen=True, eq=False)
class TensorSeries:
    """A tensor time series: ``T`` steps, each with ``n_t`` samples of one shape.

    ``samples[t]`` is an array of shape ``(n_t,) + shape``.
    """

    samples: tuple

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ValueError("a tensor series needs at least one time step")
        arrs = []
        shape = None
        for t, s in enumerate(self.samples):
            a = np.array(s, dtype=float)
            if a.ndim < 2:
                raise ValueError(f"step {t}: expected (n_t, d_1, ..., d_M), got shape {a.shape}")
            if a.shape[0] < 1:
                raise ValueError(f"step {t}: at least one sample is required")
            if shape is None:
                shape = a.shape[1:]
            elif a.shape[1:] != shape:
                raise ValueError(f"step {t}: sample shape {a.shape[1:]} differs from {shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"step {t}: non-finite values")
            a.setflags(write=False)
            arrs.append(a)
        if any(d < 1 for d in shape):
            raise ValueError(f"invalid tensor shape {shape}")
        object.__setattr__(self, "samples", tuple(arrs))

    @classmethod
    def from_array(cls, x: np.ndarray) -> "TensorSeries":
        """Build from an array of shape ``(T, n, d_1, ..., d_M)``."""
        x = np.asarray(x, dtype=float)
        return cls(tuple(x[t] for t in range(x.shape[0])))

    @classmethod
    def single(cls, x: np.ndarray) -> "TensorSeries":
        """One sample per step, from an array of shape ``(T, d_1, ..., d_M)``."""
        x = np.asarray(x, dtype=float)
        return cls.from_array(x[:, None])

    @property
    def shape(self) -> tuple:
        return self.samples[0].shape[1:]

    @property
    def T(self) -> int:
        return len(self.samples)

    @property
    def M(self) -> int:
        return len(self.shape)

    @property
    def n_per_step(self) -> tuple:
        return tuple(s.shape[0] for s in self.samples)

    @property
    def D(self) -> int:
        return int(np.prod(self.shape))

    def D_without(self, m: int) -> int:
        _check_mode(self.M, m)
        return self.D // self.shape[m]

    @property
    def is_uniform(self) -> bool:
        return len(set(self.n_per_step)) == 1

    def stacked(self) -> np.ndarray:
        """``(T, n, d_1, ..., d_M)`` array; only for a constant ``n_t``."""
        if not self.is_uniform:
            raise ValueError("samples per step differ; cannot stack")
        return np.stack(self.samples)

    def window(self, start: int, stop: int) -> "TensorSeries":
        return TensorSeries(self.samples[start:stop])

    def pooled(self) -> "TensorSeries":
        """All samples in a single time step."""
        return TensorSeries((np.concatenate(self.samples, axis=0),))


def flatten_series(x: TensorSeries) -> TensorSeries:
    """Replace every sample by its canonical vectorization (``M`` becomes 1)."""
    return TensorSeries(tuple(s.reshape(s.shape[0], -1) for s in x.samples))
