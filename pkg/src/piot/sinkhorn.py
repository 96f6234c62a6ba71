"""
Forward entropy-regularized OT by Sinkhorn scaling.
"""

from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, InvalidInputError
from .matrix import Marginals, ScalingPair, as_kernel, coupling_values, kernel_from_cost

__all__ = ["SinkhornResult", "sinkhorn", "solve_eot", "is_on_manifold"]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


class SinkhornResult(NamedTuple):
    plan: np.ndarray
    scaling: ScalingPair
    iterations: int
    residual: float


def _logsumexp(a, axis):
    amax = a.max(axis=axis, keepdims=True)
    out = np.log(np.exp(a - amax).sum(axis=axis, keepdims=True)) + amax
    return np.squeeze(out, axis=axis)


def sinkhorn(K, marginals=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """(mu, nu)-Sinkhorn scaling of a positive kernel.

    Alternates row normalization to ``mu`` and column normalization to ``nu``.
    The scaling vectors are accumulated as logs, so kernels with entries far
    from one do not under- or overflow.

    Parameters
    ----------
    K : array-like, shape (m, n)
        Strictly positive kernel.
    marginals : Marginals, optional
        Target marginals; uniform when omitted.
    tol : float
        Stop once the L1 distance between the row sums and ``mu`` (measured
        after a column pass, when column sums are exact) is at most ``tol``.
    max_iter : int
        Maximum number of row+column passes.

    Returns
    -------
    SinkhornResult
        ``plan = diag(d_row) K diag(d_col)``, the scaling pair, the number of
        passes and the final residual.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` passes do not reach ``tol``. The exception carries the
        last iterate and residual.
    """
    K = as_kernel(K)
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    m, n = K.shape
    if marginals is None:
        marginals = Marginals.uniform(m, n)
    mu, nu = Marginals(*marginals).validate()
    if mu.shape != (m,) or nu.shape != (n,):
        raise InvalidInputError("marginal lengths do not match kernel shape")

    log_k = np.log(K)
    log_mu, log_nu = np.log(mu), np.log(nu)
    log_u = np.zeros(m)
    log_v = np.zeros(n)
    residual = np.inf
    for it in range(1, max_iter + 1):
        log_u = log_mu - _logsumexp(log_k + log_v[None, :], axis=1)
        log_v = log_nu - _logsumexp(log_k + log_u[:, None], axis=0)
        row_sums = np.exp(log_u + _logsumexp(log_k + log_v[None, :], axis=1))
        residual = float(np.abs(row_sums - mu).sum())
        if residual <= tol:
            break
    else:
        plan = np.exp(log_u[:, None] + log_k + log_v[None, :])
        raise ConvergenceError(
            f"Sinkhorn did not converge in {max_iter} iterations (residual {residual:.3e})",
            plan=plan,
            residual=residual,
            iterations=max_iter,
        )
    plan = np.exp(log_u[:, None] + log_k + log_v[None, :])
    return SinkhornResult(plan, ScalingPair(np.exp(log_u), np.exp(log_v)), it, residual)


def solve_eot(C, marginals=None, lam=1.0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Optimal entropic plan for cost ``C``: Sinkhorn scaling of ``exp(-lam C)``."""
    return sinkhorn(kernel_from_cost(C, lam), marginals, tol, max_iter)


def is_on_manifold(C, T, lam=1.0, tol=1e-9):
    """True when ``exp(-lam C)`` has the same basis cross-ratios as ``T``.

    Compared in log space, so ``tol`` is a relative tolerance on the ratios.
    """
    from .crossratio import log_basis_of_cost, log_basis

    T = coupling_values(T)
    C = np.asarray(C, dtype=np.float64)
    if C.shape != T.shape:
        raise InvalidInputError("cost and coupling shapes differ")
    diff = log_basis_of_cost(C, lam) - log_basis(T)
    return bool(np.max(np.abs(diff)) <= tol)
