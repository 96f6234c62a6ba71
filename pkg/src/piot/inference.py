"""
Workflows for noisy and incomplete couplings.

The samplers explore the cost manifold of one fixed coupling. Observation
noise and missing entries are handled here by running one chain per
plausible completion or perturbation and pooling the samples with equal
weights, then mapping pooled costs back to couplings by forward Sinkhorn.
"""

from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .crossratio import equation_matrix, iot_distance, quadruples_avoiding
from .errors import ConfigError, InvalidInputError
from .matrix import Coupling, Marginals, coupling_values
from .samplers import ChainOutput, run_chains
from .sinkhorn import sinkhorn

__all__ = [
    "gaussian_noise_posterior",
    "perturbation_noises",
    "bounded_noise_offsets",
    "bounded_noise_distance_bound",
    "noise_angle_sine",
    "PredictionResult",
    "predict_missing",
    "predict_from_mean_cost",
    "submatrix_support_feasible",
    "submatrix_rhs",
    "missing_column_segment",
    "is_collinear",
]

# stream index reserved for auxiliary draws (perturbations, fills)
_AUX_STREAM = 2**32
EPS_POS = 1e-9


def _aux_rng(seed, tag):
    ss = np.random.SeedSequence(int(seed), spawn_key=(_AUX_STREAM, tag))
    return np.random.Generator(np.random.Philox(ss))


def perturbation_noises(t, sigma, n_mix, seed):
    """``n_mix`` draws of ``N(0, sigma^2)``, redrawn while ``t + eps <= 0``."""
    rng = _aux_rng(seed, 0)
    out = np.empty(n_mix)
    for k in range(n_mix):
        e = sigma * rng.standard_normal()
        while t + e <= 0:
            e = sigma * rng.standard_normal()
        out[k] = e
    return out


def gaussian_noise_posterior(T, idx, sigma, n_mix, prior, cfg, kind="metromc",
                             noises=None, threads=1, return_noises=False):
    """Pooled posterior for a coupling with Gaussian noise on one entry.

    One chain runs on each ``T + eps_k e_idx`` and the samples are
    concatenated in component order. All components share stream index 0, so
    with ``sigma = 0`` the pool is ``n_mix`` copies of one chain.

    Parameters
    ----------
    T : Coupling or array-like
    idx : (int, int)
        Noisy entry.
    sigma : float
        Noise standard deviation.
    n_mix : int
        Number of mixture components.
    prior, cfg, kind
        Passed to the sampler.
    noises : sequence of float, optional
        Explicit perturbations; overrides ``sigma`` and ``n_mix``.
    threads : int
        Chains run concurrently on this many threads.

    Returns
    -------
    ChainOutput, or (ChainOutput, ndarray) with ``return_noises``
    """
    T = coupling_values(T)
    idx = tuple(int(v) for v in idx)
    if noises is None:
        if sigma < 0 or n_mix < 1:
            raise InvalidInputError("sigma must be >= 0 and n_mix >= 1")
        noises = perturbation_noises(T[idx], sigma, n_mix, cfg.seed)
    noises = np.asarray(noises, dtype=np.float64)
    if np.any(T[idx] + noises <= 0):
        raise InvalidInputError("a perturbation makes the noisy entry non-positive")
    tasks = []
    for e in noises:
        Ti = T.copy()
        Ti[idx] += e
        tasks.append((Ti, prior, cfg, kind, 0))
    pooled = ChainOutput.pool(run_chains(tasks, threads))
    return (pooled, noises) if return_noises else pooled


def bounded_noise_offsets(samples, pairs=((0, 1, 0, 1), (0, 1, 1, 2))):
    """Per-sample ``(c_ik + c_jl) - (c_il + c_jk)`` for each quadruple ``(i, j, k, l)``.

    Along a chain these equal ``-log r_ijkl(T) / lam`` for the coupling the
    chain was run on, so each series is constant.

    Returns
    -------
    ndarray, shape (len(pairs), n_samples)
    """
    C = samples.costs if isinstance(samples, ChainOutput) else np.asarray(samples)
    out = []
    for i, j, k, l in pairs:
        out.append(C[:, i, k] + C[:, j, l] - C[:, i, l] - C[:, j, k])
    return np.array(out)


def _permute_to_origin(M, idx):
    r, c = idx
    rows = list(range(M.shape[0]))
    cols = list(range(M.shape[1]))
    rows[0], rows[r] = rows[r], rows[0]
    cols[0], cols[c] = cols[c], cols[0]
    return M[np.ix_(rows, cols)]


def noise_angle_sine(shape, idx=(0, 0)):
    """Sine of the angle between the one equation normal that involves
    ``idx`` and the span of the other equation normals.
    """
    quads = quadruples_avoiding(shape, idx)
    N = equation_matrix(shape, quads)
    n1, rest = N[0], N[1:]
    if rest.shape[0] == 0:
        return 1.0
    coef, *_ = np.linalg.lstsq(rest.T, n1, rcond=None)
    perp = n1 - rest.T @ coef
    return float(np.linalg.norm(perp) / np.linalg.norm(n1))


def bounded_noise_distance_bound(T, a, idx=(0, 0), lam=1.0):
    """Bound on the distance between cost manifolds of ``T`` perturbed by at most ``a`` at ``idx``.

    The bound is ``log((t + a) / (t - a)) / sin(theta) / lam``. ``check``
    reports whether the extreme pair ``T - a e_idx``, ``T + a e_idx`` respects
    it under both distance conventions (``idx`` moved to the top-left corner
    first, which only relabels rows and columns).

    Returns
    -------
    (float, bool)
    """
    T = coupling_values(T)
    idx = tuple(int(v) for v in idx)
    t = T[idx]
    if not 0 <= a < t:
        raise InvalidInputError(f"need 0 <= a < T[idx] = {t!r}")
    sin_theta = noise_angle_sine(T.shape, idx)
    bound = float(np.log((t + a) / (t - a)) / sin_theta / lam)
    if a == 0:
        return 0.0, True
    P = _permute_to_origin(T, idx)
    lo, hi = P.copy(), P.copy()
    lo[0, 0] -= a
    hi[0, 0] += a
    slack = 1e-12 * max(bound, 1.0)
    check = all(iot_distance(lo, hi, lam, conv) <= bound + slack for conv in ("paper", "euclidean"))
    return bound, bool(check)


class PredictionResult(NamedTuple):
    coupling: Coupling
    mean_cost: np.ndarray
    pooled: ChainOutput
    fills: np.ndarray


def predict_from_mean_cost(samples, marg, lam=1.0, total=1.0):
    """Forward plan of the element-wise mean sampled cost.

    Parameters
    ----------
    samples : ChainOutput or ndarray of costs, shape (N, m, n)
    marg : Marginals
        Observed marginals (probabilities).
    total : float
        Mass of the returned coupling, e.g. the observed count total.
    """
    C = samples.costs if isinstance(samples, ChainOutput) else np.asarray(samples, dtype=np.float64)
    if C.ndim != 3 or C.shape[0] == 0:
        raise InvalidInputError("need a non-empty stack of cost matrices")
    C_mean = C.mean(axis=0)
    res = sinkhorn(np.exp(-lam * C_mean), Marginals(*marg))
    return Coupling(res.plan * total)


def predict_missing(T, fill_low, fill_high, n_fill, prior, cfg, lam=None, kind="metromc",
                    totals=None, threads=1, fills=None):
    """Predict the single unobserved entry of ``T``.

    For each of ``n_fill`` uniform fills in ``[fill_low, fill_high)`` a chain
    runs on the completed coupling; the pooled costs are averaged and pushed
    through Sinkhorn with the observed marginals.

    Parameters
    ----------
    T : Coupling
        Exactly one masked entry.
    totals : (row_totals, col_totals), optional
        Observed marginals in data units. When omitted they come from ``T``
        completed with the midpoint of the fill range.
    fills : sequence of float, optional
        Explicit fill values, overriding the uniform draw.

    Returns
    -------
    PredictionResult
        Predicted coupling in data units, the mean cost, the pooled chains
        and the fills used.
    """
    if not isinstance(T, Coupling):
        raise InvalidInputError("predict_missing needs a Coupling with a mask")
    missing = T.missing
    if len(missing) != 1:
        raise ConfigError(f"expected exactly one missing entry, found {len(missing)}")
    idx = missing[0]
    if not 0 < fill_low < fill_high:
        raise InvalidInputError("need 0 < fill_low < fill_high")
    lam = cfg.lam if lam is None else lam
    if fills is None:
        fills = _aux_rng(cfg.seed, 1).uniform(fill_low, fill_high, n_fill)
    fills = np.asarray(fills, dtype=np.float64)
    tasks = [(T.filled(f).dense(), prior, cfg, kind, 0) for f in fills]
    pooled = ChainOutput.pool(run_chains(tasks, threads))
    if totals is None:
        ref = T.filled(0.5 * (fill_low + fill_high)).dense()
        rows, cols = ref.sum(axis=1), ref.sum(axis=0)
    else:
        rows, cols = (np.asarray(v, dtype=np.float64) for v in totals)
    total = rows.sum()
    marg = Marginals(rows / total, cols / cols.sum())
    C_mean = pooled.costs.mean(axis=0)
    pred = predict_from_mean_cost(C_mean[None], marg, lam, total)
    return PredictionResult(pred, C_mean, pooled, fills)


def submatrix_rhs(T, row_subset, col_subset, d_row_s, d_col_s):
    """Right-hand side ``1/d_col_s - 1^T D_row_s T_s`` of the extension system."""
    T = coupling_values(T)
    rs = np.asarray(row_subset, dtype=int)
    cs = np.asarray(col_subset, dtype=int)
    d_row_s = np.asarray(d_row_s, dtype=np.float64)
    d_col_s = np.asarray(d_col_s, dtype=np.float64)
    if d_row_s.shape != rs.shape or d_col_s.shape != cs.shape:
        raise InvalidInputError("scaling vectors must match the subset sizes")
    Ts = T[np.ix_(rs, cs)]
    return 1.0 / d_col_s - d_row_s @ Ts


def submatrix_support_feasible(T, row_subset, col_subset, d_row_s, d_col_s, eps_pos=EPS_POS):
    """Whether ``diag(d_row_s) T_s diag(d_col_s)`` extends to a kernel in the P2 support.

    Decides if ``x T_rest = 1/d_col_s - 1^T D_row_s T_s`` has a solution with
    every ``x_i >= eps_pos``, where ``T_rest`` holds the rows outside
    ``row_subset`` restricted to ``col_subset``. Solved as an LP feasibility
    problem.
    """
    T = coupling_values(T)
    m, n = T.shape
    rs = sorted(set(int(i) for i in row_subset))
    cs = sorted(set(int(j) for j in col_subset))
    if len(rs) != len(row_subset) or len(cs) != len(col_subset):
        raise InvalidInputError("subsets contain duplicates")
    if not (0 < len(rs) < m) or not (0 < len(cs) <= n):
        raise InvalidInputError("row subset must be proper and column subset non-empty")
    if any(not 0 <= i < m for i in rs) or any(not 0 <= j < n for j in cs):
        raise InvalidInputError("subset index out of range")
    d_row_s = np.asarray(d_row_s, dtype=np.float64)
    d_col_s = np.asarray(d_col_s, dtype=np.float64)
    if d_row_s.shape != (len(rs),) or d_col_s.shape != (len(cs),):
        raise InvalidInputError("scaling vectors must match the subset sizes")
    d_row_s = d_row_s[np.argsort(row_subset)]
    d_col_s = d_col_s[np.argsort(col_subset)]
    if np.any(d_row_s <= 0) or np.any(d_col_s <= 0):
        raise InvalidInputError("scaling factors must be positive")
    rhs = submatrix_rhs(T, rs, cs, d_row_s, d_col_s)
    if np.any(rhs <= 0):
        return False
    rest = [i for i in range(m) if i not in rs]
    A = T[np.ix_(rest, cs)].T
    # scale rows so the equality tolerance is relative
    scale = np.maximum(np.abs(A).max(axis=1), np.abs(rhs))
    res = linprog(np.zeros(len(rest)), A_eq=A / scale[:, None], b_eq=rhs / scale,
                  bounds=[(eps_pos, None)] * len(rest), method="highs")
    return bool(res.status == 0)


def missing_column_segment(T, k_ref, t_range=(0.0, 10.0), n_points=1000, ref_col=None):
    """Points of the column containing the missing entry, as the entry sweeps ``t_range``.

    With ``d_i = k_ref_i / t_{i,ref_col}`` every completion ``t`` maps to the
    simplex point ``d * t_col / sum(d * t_col)``. Values are taken at the
    midpoints of ``n_points`` equal cells of ``t_range``.

    Returns
    -------
    ndarray, shape (n_points, m)
    """
    if not isinstance(T, Coupling) or len(T.missing) != 1:
        raise InvalidInputError("need a Coupling with exactly one missing entry")
    r, c = T.missing[0]
    V = np.array(T.values)
    m, n = V.shape
    if ref_col is None:
        ref_col = next(j for j in range(n) if j != c)
    if ref_col == c:
        raise InvalidInputError("reference column must be fully observed")
    k_ref = np.asarray(k_ref, dtype=np.float64)
    if k_ref.shape != (m,) or np.any(k_ref <= 0):
        raise InvalidInputError("k_ref must be a positive vector of length m")
    low, high = t_range
    if not 0 <= low < high:
        raise InvalidInputError("need 0 <= low < high")
    d = k_ref / V[:, ref_col]
    t = low + (high - low) * (np.arange(n_points) + 0.5) / n_points
    cols = np.repeat(V[:, c][None, :], n_points, axis=0)
    cols[:, r] = t
    pts = d[None, :] * cols
    return pts / pts.sum(axis=1, keepdims=True)


def is_collinear(points, tol=1e-10):
    """Centered point cloud has numerical rank at most one (``s2 / s1 <= tol``)."""
    P = np.asarray(points, dtype=np.float64)
    s = np.linalg.svd(P - P.mean(axis=0), compute_uv=False)
    if s[0] == 0:
        return True
    return bool(s[1] / s[0] <= tol)
