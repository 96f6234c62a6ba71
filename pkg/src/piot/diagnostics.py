"""
Chain diagnostics, density estimates and plot-data export.
"""

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "autocorrelation",
    "select_lag",
    "running_average",
    "gaussian_kde",
    "kde_mode",
    "simplex_project",
    "write_xy_csv",
    "DEFAULT_BANDWIDTH",
]

DEFAULT_BANDWIDTH = 0.05
_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])


def _stack(samples):
    X = np.asarray(getattr(samples, "samples", samples), dtype=np.float64)
    if X.ndim < 1 or X.shape[0] == 0:
        raise InvalidInputError("need at least one sample")
    return X.reshape(X.shape[0], -1)


def autocorrelation(samples, max_lag):
    """Normalized autocorrelation ``R(t)`` of a matrix-valued chain.

    ``R(t) = sum_l <K_l - Kbar, K_{l+t} - Kbar> / ((N - t) sigma^2)`` with the
    element-wise mean ``Kbar`` and ``sigma^2`` the sum of element-wise
    variances, so ``R(0) = 1``.

    Parameters
    ----------
    samples : ChainOutput or array, shape (N, ...)
    max_lag : int
        Largest lag, ``1 <= max_lag < N``.

    Returns
    -------
    ndarray, shape (max_lag + 1,)
    """
    X = _stack(samples)
    N = X.shape[0]
    if not 1 <= max_lag < N:
        raise InvalidInputError(f"need 1 <= max_lag < N = {N}")
    D = X - X.mean(axis=0)
    var = float((D * D).sum(axis=1).mean())
    if var <= 0:
        raise InvalidInputError("chain has zero variance; autocorrelation undefined")
    R = np.empty(max_lag + 1)
    for t in range(max_lag + 1):
        R[t] = float(np.einsum("ij,ij->", D[: N - t], D[t:])) / ((N - t) * var)
    return R


def select_lag(R, threshold=np.exp(-1.0)):
    """Smallest ``t`` with ``|R(t)| <= threshold`` (default ``1/e``), or None."""
    hits = np.flatnonzero(np.abs(np.asarray(R)) <= threshold)
    return int(hits[0]) if hits.size else None


def running_average(samples, statistic="row_sums"):
    """Cumulative mean along the chain.

    ``statistic`` is ``'row_sums'`` (row sums of each sample), ``'entry'``
    (all entries) or a callable mapping one sample to an array.
    """
    X = np.asarray(getattr(samples, "samples", samples), dtype=np.float64)
    if X.shape[0] == 0:
        raise InvalidInputError("need at least one sample")
    if callable(statistic):
        S = np.array([np.asarray(statistic(x), dtype=np.float64) for x in X])
    elif statistic == "row_sums":
        S = X.sum(axis=-1) if X.ndim == 3 else X
    elif statistic == "entry":
        S = X
    else:
        raise InvalidInputError(f"unknown statistic {statistic!r}")
    counts = np.arange(1, S.shape[0] + 1).reshape((-1,) + (1,) * (S.ndim - 1))
    return np.cumsum(S, axis=0) / counts


def gaussian_kde(points, bandwidth=DEFAULT_BANDWIDTH, grid=None):
    """Gaussian kernel density estimate evaluated on ``grid``.

    ``f(x) = mean_k phi((x - p_k) / h) / h`` with a fixed bandwidth ``h``.
    """
    p = np.asarray(points, dtype=np.float64).ravel()
    if p.size == 0:
        raise InvalidInputError("KDE needs at least one point")
    if not bandwidth > 0:
        raise InvalidInputError("bandwidth must be positive")
    if grid is None:
        grid = np.linspace(p.min() - 4 * bandwidth, p.max() + 4 * bandwidth, 512)
    g = np.asarray(grid, dtype=np.float64)
    out = np.zeros(g.shape)
    norm = 1.0 / (p.size * bandwidth * np.sqrt(2 * np.pi))
    # chunk over points to bound memory
    for start in range(0, p.size, 4096):
        z = (g.ravel()[:, None] - p[None, start : start + 4096]) / bandwidth
        out += np.exp(-0.5 * z * z).sum(axis=1).reshape(g.shape)
    return out * norm


def kde_mode(points, bandwidth=DEFAULT_BANDWIDTH, grid=None):
    """Grid location of the KDE maximum."""
    p = np.asarray(points, dtype=np.float64).ravel()
    if grid is None:
        grid = np.linspace(p.min() - bandwidth, p.max() + bandwidth, 2001)
    grid = np.asarray(grid, dtype=np.float64)
    return float(grid[np.argmax(gaussian_kde(p, bandwidth, grid))])


def simplex_project(columns):
    """Map positive 3-vectors to 2-D points in an equilateral triangle.

    Each vector is normalized to barycentric coordinates; vertex ``e_1``
    maps to ``(0, 0)``, ``e_2`` to ``(1, 0)`` and ``e_3`` to ``(1/2, sqrt(3)/2)``.
    """
    V = np.asarray(columns, dtype=np.float64)
    single = V.ndim == 1
    V = np.atleast_2d(V)
    if V.shape[-1] != 3:
        raise InvalidInputError("simplex_project expects 3-vectors")
    if np.any(V < 0) or np.any(V.sum(axis=-1) <= 0):
        raise InvalidInputError("vectors must be non-negative and non-zero")
    B = V / V.sum(axis=-1, keepdims=True)
    P = B @ _TRIANGLE
    return P[0] if single else P


def write_xy_csv(path, x, y, names=("x", "y"), meta=None):
    """Two-or-more-column plot data with ``#`` metadata lines and a header."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != x.shape[0]:
        raise InvalidInputError("x and y lengths differ")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in (meta or {}).items():
            fh.write(f"# {key}: {val}\n")
        cols = list(names)
        if len(cols) < 1 + y.shape[1]:
            cols = [cols[0]] + [f"{cols[1]}_{k}" for k in range(y.shape[1])]
        fh.write(",".join(cols) + "\n")
        for xi, row in zip(x, y):
            fh.write(",".join(format(float(v), ".17g") for v in (xi, *row)) + "\n")
