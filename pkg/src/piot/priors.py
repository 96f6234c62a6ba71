"""
Prior log-densities over costs and kernels.

Three families are supported:

* ``p1``: a Dirichlet over the whole cost matrix divided by ``cost_sum``;
* ``p2``: independent Dirichlets over the columns of the kernel;
* ``gibbs``: ``-beta * ||gamma (C - C^T)||_F``, which favours symmetric costs.

Out-of-domain points get ``-inf``. Normalizing constants are dropped by
default since samplers only use differences; the ``*_normalized`` variants add
them back.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InvalidInputError
from .matrix import cost_from_kernel, normalize_columns

__all__ = [
    "PriorSpec",
    "log_prior_p1",
    "log_prior_p2",
    "log_prior_gibbs_sym",
    "log_prior_p1_normalized",
    "log_prior_p2_normalized",
    "PRIOR_KINDS",
]

PRIOR_KINDS = ("p1", "p2", "gibbs")
DOMAIN_TOL = 1e-8


def _alpha(alpha, shape):
    a = np.broadcast_to(np.asarray(alpha, dtype=np.float64), shape)
    if np.any(~np.isfinite(a)) or np.any(a <= 0):
        raise InvalidInputError("Dirichlet concentrations must be positive")
    return a


def log_prior_p1(C, alpha=1.0, cost_sum=1.0):
    """Unnormalized Dirichlet log-density of ``C / cost_sum``.

    Returns ``-inf`` when any cost is non-positive or the costs do not sum to
    ``cost_sum`` within 1e-8.
    """
    C = np.asarray(C, dtype=np.float64)
    a = _alpha(alpha, C.shape)
    if np.any(C <= 0) or abs(C.sum() - cost_sum) > DOMAIN_TOL:
        return -np.inf
    return float(np.sum((a - 1.0) * np.log(C / cost_sum)))


def log_prior_p1_normalized(C, alpha=1.0, cost_sum=1.0):
    """As :func:`log_prior_p1` but including the Dirichlet normalizer."""
    C = np.asarray(C, dtype=np.float64)
    a = _alpha(alpha, C.shape)
    val = log_prior_p1(C, a, cost_sum)
    return val + float(gammaln(a.sum()) - gammaln(a).sum())


def log_prior_p2(K, alpha=1.0):
    """Sum over columns of unnormalized Dirichlet log-densities.

    Returns ``-inf`` unless every column sums to one within 1e-8 and all
    entries lie in (0, 1).
    """
    K = np.asarray(K, dtype=np.float64)
    a = _alpha(alpha, K.shape)
    if np.any(K <= 0) or np.any(K >= 1) or np.any(np.abs(K.sum(axis=0) - 1.0) > DOMAIN_TOL):
        return -np.inf
    return float(np.sum((a - 1.0) * np.log(K)))


def log_prior_p2_normalized(K, alpha=1.0):
    K = np.asarray(K, dtype=np.float64)
    a = _alpha(alpha, K.shape)
    const = np.sum(gammaln(a.sum(axis=0)) - gammaln(a).sum(axis=0))
    return log_prior_p2(K, a) + float(const)


def log_prior_gibbs_sym(C, beta=1.0, gamma_weight=1.0):
    """``-beta * ||gamma_weight * (C - C^T)||_F`` for square ``C``."""
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InvalidInputError(f"Gibbs symmetric prior needs a square cost, got shape {C.shape}")
    return -beta * float(np.linalg.norm(gamma_weight * (C - C.T)))


@dataclass(frozen=True)
class PriorSpec:
    """Tagged prior description.

    Parameters
    ----------
    kind : {'p1', 'p2', 'gibbs'}
    alpha : float or ndarray
        Dirichlet concentrations (``p1``, ``p2``); scalars broadcast.
    beta, gamma_weight : float
        Gibbs strength and asymmetry weight (``gibbs``).
    cost_sum : float
        Required total of ``lam * C`` under ``p1``.
    """

    kind: str = "p1"
    alpha: object = 1.0
    beta: float = 1.0
    gamma_weight: float = 1.0
    cost_sum: float = 1.0
    _alpha_arr: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = str(self.kind).lower()
        aliases = {"p1_dirichlet_cost": "p1", "p2_column_dirichlet_kernel": "p2",
                   "gibbs_symmetric_cost": "gibbs"}
        kind = aliases.get(kind, kind)
        if kind not in PRIOR_KINDS:
            raise InvalidInputError(f"unknown prior kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        a = np.array(self.alpha, dtype=np.float64)
        if np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise InvalidInputError("alpha entries must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "_alpha_arr", a)
        if not self.beta > 0 or not self.gamma_weight > 0 or not self.cost_sum > 0:
            raise InvalidInputError("beta, gamma_weight and cost_sum must be positive")

    @property
    def alpha_array(self):
        return self._alpha_arr

    def alpha_for(self, shape):
        return np.ascontiguousarray(np.broadcast_to(self._alpha_arr, shape), dtype=np.float64)

    def log_density_kernel(self, K, lam=1.0):
        """Prior log-density of the state represented by kernel ``K``.

        ``p1`` and ``gibbs`` act on ``C = -log(K) / lam``; ``p2`` acts on the
        column-normalized kernel.
        """
        if self.kind == "p2":
            return log_prior_p2(normalize_columns(K), self._alpha_arr)
        C = cost_from_kernel(K, lam)
        if self.kind == "p1":
            return log_prior_p1(lam * C, self._alpha_arr, self.cost_sum)
        return log_prior_gibbs_sym(C, self.beta, self.gamma_weight)
