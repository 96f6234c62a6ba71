"""
Cross-ratio algebra for positive matrices.

For a positive matrix ``A`` the cross-ratio of rows ``i, j`` and columns
``k, l`` is ``a_ik a_jl / (a_il a_jk)``. Cross-ratios are exactly the
invariants of two-sided diagonal scaling, so they pin down the set of costs
that produce a given entropic plan. Everything here works with logs.

Indices are zero-based throughout.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InvalidInputError, NotEquivalentError
from .matrix import ScalingPair, as_positive_matrix, coupling_values

__all__ = [
    "CrossRatioBasis",
    "cross_ratio",
    "log_cross_ratio",
    "log_basis",
    "log_basis_of_cost",
    "basis",
    "basis_quadruples",
    "adjacent_quadruples",
    "quadruples_avoiding",
    "equation_matrix",
    "log_ratios",
    "cr_equivalent",
    "scaling_factors",
    "iot_distance",
]


def _check_quadruple(shape, i, j, k, l):
    m, n = shape
    for name, idx, bound in (("i", i, m), ("j", j, m), ("k", k, n), ("l", l, n)):
        if not 0 <= idx < bound:
            raise IndexError(f"index {name}={idx} out of range for shape {shape}")
    if i == j or k == l:
        raise InvalidInputError("cross-ratio needs i != j and k != l")


def cross_ratio(M, i, j, k, l):
    """``m_ik m_jl / (m_il m_jk)``."""
    M = np.asarray(M, dtype=np.float64)
    _check_quadruple(M.shape, i, j, k, l)
    vals = M[[i, j, i, j], [k, l, l, k]]
    if np.any(vals <= 0):
        raise InvalidInputError("cross-ratio needs positive entries")
    return float(vals[0] * vals[1] / (vals[2] * vals[3]))


def log_cross_ratio(M, i, j, k, l):
    M = np.asarray(M, dtype=np.float64)
    _check_quadruple(M.shape, i, j, k, l)
    L = np.log(M[[i, j, i, j], [k, l, l, k]])
    return float(L[0] + L[1] - L[2] - L[3])


def _anchored(L):
    # log r_{0,j,0,k} for j, k >= 1
    return L[0, 0] + L[1:, 1:] - L[0:1, 1:] - L[1:, 0:1]


def log_basis(M):
    """Logs of the anchored basis ``r_{0 j 0 k}``, shape ``(m-1, n-1)``."""
    return _anchored(np.log(as_positive_matrix(M)))


def log_basis_of_cost(C, lam=1.0):
    """Anchored log-basis of ``exp(-lam C)`` computed straight from the costs."""
    C = np.asarray(C, dtype=np.float64)
    return _anchored(-lam * C)


@dataclass(frozen=True)
class CrossRatioBasis:
    """The anchored basis ``{r_{0 j 0 k} : j >= 1, k >= 1}`` of an m x n matrix.

    ``values[j-1, k-1]`` holds ``r_{0 j 0 k}``. Every other cross-ratio is a
    product of basis entries, see :meth:`reconstruct`.
    """

    log_values: np.ndarray

    @property
    def values(self):
        return np.exp(self.log_values)

    @property
    def shape(self):
        p, q = self.log_values.shape
        return (p + 1, q + 1)

    def __len__(self):
        return self.log_values.size

    def _b(self, i, k):
        if i == 0 or k == 0:
            return 0.0
        return self.log_values[i - 1, k - 1]

    def reconstruct_log(self, i, j, k, l):
        _check_quadruple(self.shape, i, j, k, l)
        return self._b(i, k) + self._b(j, l) - self._b(i, l) - self._b(j, k)

    def reconstruct(self, i, j, k, l):
        """Any ``r_{ijkl}`` as ``r_{0i0k} r_{0j0l} / (r_{0i0l} r_{0j0k})``."""
        return float(np.exp(self.reconstruct_log(i, j, k, l)))


def basis(M):
    return CrossRatioBasis(log_basis(M))


def basis_quadruples(shape):
    """Quadruples ``(0, j, 0, k)`` of the anchored basis, row-major."""
    m, n = shape
    return [(0, j, 0, k) for j in range(1, m) for k in range(1, n)]


def adjacent_quadruples(shape):
    """Quadruples ``(i, i+1, k, k+1)``: the basis of neighbouring 2x2 minors."""
    m, n = shape
    return [(i, i + 1, k, k + 1) for i in range(m - 1) for k in range(n - 1)]


def quadruples_avoiding(shape, idx):
    """A basis in which exactly one cross-ratio involves entry ``idx``.

    Obtained from the adjacent basis after swapping row ``idx[0]`` with row 0
    and column ``idx[1]`` with column 0. The first quadruple returned is the
    one that touches ``idx``; the rest form the reduced basis.
    """
    m, n = shape
    rows = list(range(m))
    cols = list(range(n))
    r, c = idx
    rows[0], rows[r] = rows[r], rows[0]
    cols[0], cols[c] = cols[c], cols[0]
    quads = [(rows[i], rows[j], cols[k], cols[l]) for i, j, k, l in adjacent_quadruples(shape)]
    touching = [q for q in quads if idx in ((q[0], q[2]), (q[1], q[3]), (q[0], q[3]), (q[1], q[2]))]
    assert len(touching) == 1 and touching[0] == quads[0]
    return quads


def equation_matrix(shape, quadruples=None):
    """Coefficient matrix of the linear system ``N vec(C) = b`` cutting out the cost manifold.

    Row ``(i, j, k, l)`` has ``+1`` at ``(i, k), (j, l)`` and ``-1`` at
    ``(i, l), (j, k)``, and ``N vec(C) = -log r_{ijkl}(T) / lam``.
    """
    m, n = shape
    if quadruples is None:
        quadruples = basis_quadruples(shape)
    N = np.zeros((len(quadruples), m * n))
    for row, (i, j, k, l) in enumerate(quadruples):
        N[row, i * n + k] += 1
        N[row, j * n + l] += 1
        N[row, i * n + l] -= 1
        N[row, j * n + k] -= 1
    return N


def log_ratios(M, quadruples):
    L = np.log(as_positive_matrix(M))
    q = np.asarray(quadruples, dtype=int).reshape(-1, 4)
    i, j, k, l = q.T
    return L[i, k] + L[j, l] - L[i, l] - L[j, k]


def _pair(A, B):
    A = coupling_values(A) if not isinstance(A, np.ndarray) else as_positive_matrix(A)
    B = coupling_values(B) if not isinstance(B, np.ndarray) else as_positive_matrix(B)
    if A.shape != B.shape:
        raise InvalidInputError(f"shape mismatch: {A.shape} vs {B.shape}")
    return A, B


def cr_equivalent(A, B, tol=1e-9):
    """True when every basis cross-ratio of ``A`` and ``B`` agrees within ``tol`` in log space."""
    A, B = _pair(A, B)
    return bool(np.max(np.abs(log_basis(A) - log_basis(B))) <= tol)


def scaling_factors(A, B, tol=1e-9):
    """Positive diagonals with ``A = diag(d_row) B diag(d_col)``, gauge ``d_row[0] = 1``.

    Raises
    ------
    NotEquivalentError
        When the best log-additive fit leaves a residual above ``tol``.
    """
    A, B = _pair(A, B)
    L = np.log(A) - np.log(B)
    # least-squares split L_ij ~ x_i + y_j, then move the gauge into the columns
    x = L.mean(axis=1) - L.mean()
    y = L.mean(axis=0)
    x0 = x[0]
    x = x - x0
    y = y + x0
    residual = float(np.max(np.abs(L - x[:, None] - y[None, :])))
    if residual > tol:
        raise NotEquivalentError(
            f"matrices are not diagonally equivalent (log residual {residual:.3e})",
            residual=residual,
        )
    return ScalingPair(np.exp(x), np.exp(y))


def iot_distance(T1, T2, lam=1.0, convention="euclidean"):
    """Distance between the parallel cost manifolds of two couplings.

    ``euclidean``
        Minimum Euclidean distance between the two affine subspaces in cost
        space: ``sqrt(db^T (N N^T)^{-1} db)`` with ``N`` the equation matrix
        and ``db`` the difference of the right-hand sides.
    ``paper``
        Law-of-cosines combination of the raw log-ratio offsets over the
        adjacent basis, i.e. ``sqrt(d^T G d) / 2`` where ``G`` is the Gram
        matrix of the (norm-2) equation normals. For the 2x3 pair
        ``[[1,2,3],[2,3,1]]``, ``[[1,2,3],[3,2,1]]`` this gives ``sqrt(7) ln(3/2)``.

    Both scale as ``1 / lam``.
    """
    if not lam > 0:
        raise InvalidInputError("lambda must be positive")
    A, B = _pair(T1, T2)
    if convention == "euclidean":
        quads = basis_quadruples(A.shape)
        N = equation_matrix(A.shape, quads)
        db = log_ratios(B, quads) - log_ratios(A, quads)
        val = db @ np.linalg.solve(N @ N.T, db)
    elif convention == "paper":
        quads = adjacent_quadruples(A.shape)
        N = equation_matrix(A.shape, quads)
        d = log_ratios(B, quads) - log_ratios(A, quads)
        val = d @ (N @ N.T) @ d / 4.0
    else:
        raise InvalidInputError(f"unknown convention {convention!r}")
    return float(np.sqrt(max(val, 0.0))) / lam


def all_quadruples(shape):
    """Every ``(i, j, k, l)`` with ``i < j`` and ``k < l``."""
    m, n = shape
    return [(i, j, k, l) for i, j in combinations(range(m), 2) for k, l in combinations(range(n), 2)]
