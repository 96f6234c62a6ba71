"""
Matrix types and the elementary transforms between costs, kernels and couplings.

Matrices are dense ``float64`` numpy arrays. Costs ``C`` and kernels ``K`` are
plain arrays validated on entry; a :class:`Coupling` additionally carries an
optional mask of unobserved entries, because missing data must never be
encoded as a sentinel value.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "Coupling",
    "Marginals",
    "ScalingPair",
    "coupling_values",
    "as_positive_matrix",
    "as_cost",
    "as_kernel",
    "kernel_from_cost",
    "cost_from_kernel",
    "normalize_columns",
    "normalize_rows",
    "renormalization_constant",
    "renormalize_for_p1",
]


def _as_matrix(M, name="matrix"):
    M = np.array(M, dtype=np.float64)
    if M.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {M.shape}")
    return M


def as_positive_matrix(M, name="matrix"):
    """Return ``M`` as a float array after checking it is finite and strictly positive."""
    M = _as_matrix(M, name)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if np.any(M <= 0):
        raise InvalidInputError(f"{name} must be strictly positive")
    return M


def as_cost(C, allow_negative=False):
    """Validate a cost matrix (finite, and non-negative unless ``allow_negative``)."""
    C = _as_matrix(C, "cost matrix")
    if not np.all(np.isfinite(C)):
        raise InvalidInputError("cost matrix has non-finite entries")
    if not allow_negative and np.any(C < 0):
        raise InvalidInputError("cost matrix has negative entries")
    return C


def as_kernel(K):
    return as_positive_matrix(K, "kernel")


@dataclass(frozen=True)
class Coupling:
    """An observed coupling ``T``, possibly with unobserved entries.

    Parameters
    ----------
    values : ndarray, shape (m, n)
        Observed joint frequencies or probabilities. Entries under ``mask``
        are ignored and stored as NaN.
    mask : ndarray of bool, shape (m, n), optional
        True where the entry was not observed.
    """

    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _as_matrix(self.values, "coupling")
        m, n = values.shape
        if m < 2 or n < 2:
            raise InvalidInputError(f"coupling must be at least 2x2, got {m}x{n}")
        mask = self.mask
        if mask is not None:
            mask = np.array(mask, dtype=bool)
            if mask.shape != values.shape:
                raise InvalidInputError("mask shape does not match coupling shape")
            if not mask.any():
                mask = None
        observed = values if mask is None else values[~mask]
        if not np.all(np.isfinite(observed)) or np.any(observed <= 0):
            raise InvalidInputError("observed coupling entries must be finite and > 0")
        if mask is not None:
            values = values.copy()
            values[mask] = np.nan
            mask.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_complete(self):
        return self.mask is None

    @property
    def missing(self):
        """List of ``(i, j)`` indices of unobserved entries."""
        if self.mask is None:
            return []
        return [tuple(int(v) for v in ij) for ij in np.argwhere(self.mask)]

    def dense(self):
        """Return the entries as a plain array; refuses masked couplings."""
        if self.mask is not None:
            raise InvalidInputError(
                f"coupling has {len(self.missing)} unobserved entries; "
                "use a missing-value workflow"
            )
        return np.array(self.values)

    def filled(self, value, index=None):
        """Return a complete coupling with the masked entry (or ``index``) set to ``value``."""
        if index is None:
            missing = self.missing
            if len(missing) != 1:
                raise InvalidInputError(f"expected exactly one missing entry, found {len(missing)}")
            index = missing[0]
        values = np.array(self.values)
        values[index] = value
        return Coupling(values)


def coupling_values(T):
    """Dense positive array from a :class:`Coupling` or array-like."""
    if isinstance(T, Coupling):
        return T.dense()
    return as_positive_matrix(T, "coupling")


class Marginals(NamedTuple):
    """Row and column marginals ``mu`` (length m) and ``nu`` (length n)."""

    mu: np.ndarray
    nu: np.ndarray

    @classmethod
    def of(cls, T):
        """Marginals of a positive matrix, normalized to total mass one."""
        T = coupling_values(T)
        total = T.sum()
        return cls(T.sum(axis=1) / total, T.sum(axis=0) / total)

    @classmethod
    def uniform(cls, m, n):
        return cls(np.full(m, 1.0 / m), np.full(n, 1.0 / n))

    def validate(self, atol=1e-12):
        mu = np.asarray(self.mu, dtype=np.float64)
        nu = np.asarray(self.nu, dtype=np.float64)
        for name, v in (("mu", mu), ("nu", nu)):
            if v.ndim != 1 or np.any(~np.isfinite(v)) or np.any(v <= 0):
                raise InvalidInputError(f"{name} must be a positive vector")
            if abs(v.sum() - 1.0) > atol:
                raise InvalidInputError(f"{name} must sum to 1 (sum={v.sum()!r})")
        return Marginals(mu, nu)


class ScalingPair(NamedTuple):
    """Positive diagonals with ``A = diag(d_row) @ B @ diag(d_col)``."""

    d_row: np.ndarray
    d_col: np.ndarray

    def apply(self, B):
        return self.d_row[:, None] * np.asarray(B) * self.d_col[None, :]


def kernel_from_cost(C, lam=1.0):
    """Entry-wise ``exp(-lam * C)``.

    Negative costs are accepted here (the result then has entries above one);
    only non-finite input is rejected.
    """
    if not lam > 0:
        raise InvalidInputError("lambda must be positive")
    C = as_cost(C, allow_negative=True)
    return np.exp(-lam * C)


def cost_from_kernel(K, lam=1.0, require_nonnegative=False):
    """Entry-wise ``-log(K) / lam``.

    Kernel entries above one give negative costs. That is allowed unless
    ``require_nonnegative`` is set, which is what callers with a non-negative
    cost prior should do.
    """
    if not lam > 0:
        raise InvalidInputError("lambda must be positive")
    K = as_kernel(K)
    if require_nonnegative and np.any(K > 1):
        raise InvalidInputError("kernel entries above 1 imply negative costs")
    return -np.log(K) / lam


def normalize_columns(M, nu=None):
    """``Col(M, nu) = M diag(nu / 1^T M)``: rescale columns to sum to ``nu`` (default ones)."""
    M = as_positive_matrix(M)
    target = np.ones(M.shape[1]) if nu is None else np.asarray(nu, dtype=np.float64)
    return M * (target / M.sum(axis=0))[None, :]


def normalize_rows(M, mu=None):
    """Row analogue of :func:`normalize_columns`."""
    M = as_positive_matrix(M)
    target = np.ones(M.shape[0]) if mu is None else np.asarray(mu, dtype=np.float64)
    return M * (target / M.sum(axis=1))[:, None]


def renormalization_constant(T, cost_sum=1.0, lam=1.0):
    """Scalar ``F`` such that the costs of ``T / F`` sum to ``cost_sum``.

    For ``lam = cost_sum = 1`` this is ``exp((1 + sum(log T)) / (m n))``.
    """
    T = coupling_values(T)
    return np.exp((lam * cost_sum + np.log(T).sum()) / T.size)


def renormalize_for_p1(T, cost_sum=1.0, lam=1.0):
    """Scale ``T`` by a constant so that ``-log(T/F)/lam`` sums to ``cost_sum``.

    Scalar multiples share all cross-ratios, so the result is a valid chain
    start on the same cost manifold.
    """
    T = coupling_values(T)
    return T / renormalization_constant(T, cost_sum, lam)
