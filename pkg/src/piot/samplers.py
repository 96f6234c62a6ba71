"""
Posterior samplers over the cost manifold of an observed coupling.

Two samplers are provided:

``metromc``
    Metropolis with two-sided diagonal proposals
    ``K' = diag(exp(e_r)) K diag(exp(e_c))``. Diagonal scaling keeps every
    cross-ratio of ``K``, so the likelihood ratio is identically one and the
    acceptance ratio is the prior ratio.
``mhmc``
    Metropolis-Hastings that rescales one row per step (cyclic schedule) with
    a row-sum-dependent log-normal step ``sigma = sigma0 * s**gamma + delta``.
    The prior (P2) is evaluated on the column-normalized state.

Chains are driven by compiled loops in :mod:`piot._kernels`; the numpy step
functions :func:`metromc_step` and :func:`mhmc_step` are the readable
reference and are tested to agree with the compiled path draw for draw.

Random numbers come from numpy's counter-based Philox generator. Chain ``k``
of a run with seed ``s`` uses ``SeedSequence(s, spawn_key=(k,))``, split into
one stream for normals and one for uniforms, so results do not depend on how
many chains run concurrently or in what order they finish.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .errors import ConfigError, InvalidInputError
from .matrix import Coupling, coupling_values, normalize_columns, renormalize_for_p1
from .priors import PriorSpec

__all__ = [
    "ChainConfig",
    "ChainOutput",
    "ChainStreams",
    "metromc_step",
    "mhmc_step",
    "initial_state",
    "p1_interior_start",
    "run_chain",
    "run_chains",
    "write_trace_csv",
    "write_trace_jsonl",
    "write_metadata_json",
    "SAMPLER_KINDS",
]

SAMPLER_KINDS = ("metromc", "mhmc")
BLOCK = 1 << 15
_KIND_CODE = {"p1": _kernels.PRIOR_P1, "p2": _kernels.PRIOR_P2, "gibbs": _kernels.PRIOR_GIBBS}


@dataclass(frozen=True)
class ChainConfig:
    """Sampler hyperparameters.

    Parameters
    ----------
    sigma : float
        MetroMC proposal standard deviation of each log-scaling factor.
    sigma0, gamma, delta : float
        MHMC step ``sigma = sigma0 * s**gamma + delta`` for row sum ``s``.
    burn_in, n_samples, lag : int
        Discarded steps, recorded samples, and steps between records.
    seed : int
        Root seed (0 <= seed < 2**64).
    constrained_p1 : bool
        Draw ``m + n - 1`` normals and fix the last column factor so the
        total cost is unchanged.
    reject_kernel_ge_one : bool
        Reject MetroMC proposals with any kernel entry >= 1 (negative cost).
    preserve_diagonal : bool
        Square MetroMC only: use ``e_c = -e_r`` so diagonal kernel entries
        never move.
    lam : float
        Entropic regularization linking costs and kernels, ``K = exp(-lam C)``.
    """

    sigma: float = 0.02
    sigma0: float = 0.5
    gamma: float = 3.0
    delta: float = 1.0
    burn_in: int = 10_000
    n_samples: int = 10_000
    lag: int = 100
    seed: int = 0
    constrained_p1: bool = False
    reject_kernel_ge_one: bool = False
    preserve_diagonal: bool = False
    lam: float = 1.0

    def __post_init__(self):
        for name in ("burn_in", "n_samples", "lag", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ConfigError(f"{name} must be an integer", key=name)
            object.__setattr__(self, name, int(v))
        if self.lag < 1:
            raise ConfigError("lag must be >= 1", key="lag")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1", key="n_samples")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0", key="burn_in")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must lie in [0, 2**64)", key="seed")
        for name in ("sigma", "sigma0", "delta", "gamma"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0", key=name)
            object.__setattr__(self, name, v)
        if not self.lam > 0:
            raise ConfigError("lam must be positive", key="lam")
        if self.constrained_p1 and self.preserve_diagonal:
            raise ConfigError("constrained_p1 and preserve_diagonal are exclusive",
                              key="preserve_diagonal")

    @property
    def total_steps(self):
        return self.burn_in + self.n_samples * self.lag

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ChainOutput:
    """Result of one chain (or a pooled set of chains).

    ``log_kernels[k]`` is the log of the k-th recorded kernel. For MHMC and
    for the P2 prior it is the column-normalized kernel. ``trace_row_sums``
    holds the row sums of the working state at each record.
    """

    log_kernels: np.ndarray
    acceptance_rate: float
    trace_row_sums: np.ndarray
    seed_used: int
    kind: str = "metromc"
    lam: float = 1.0
    chain_index: int = 0
    config: Optional[ChainConfig] = None
    prior: Optional[PriorSpec] = None
    component_rates: tuple = field(default=())

    def __post_init__(self):
        for name in ("log_kernels", "trace_row_sums"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise InvalidInputError("acceptance rate outside [0, 1]")

    @property
    def samples(self):
        """Recorded kernels, shape ``(n_samples, m, n)``."""
        return np.exp(self.log_kernels)

    @property
    def costs(self):
        """Recorded costs ``-log(K) / lam``."""
        return -self.log_kernels / self.lam

    def __len__(self):
        return self.log_kernels.shape[0]

    @staticmethod
    def pool(outputs):
        """Concatenate chains in the given order with equal weight per sample."""
        outputs = list(outputs)
        if not outputs:
            raise InvalidInputError("nothing to pool")
        total = sum(len(o) for o in outputs)
        rate = sum(o.acceptance_rate * len(o) for o in outputs) / total
        first = outputs[0]
        return ChainOutput(
            np.concatenate([o.log_kernels for o in outputs]),
            float(rate),
            np.concatenate([o.trace_row_sums for o in outputs]),
            first.seed_used,
            first.kind,
            first.lam,
            first.chain_index,
            first.config,
            first.prior,
            tuple(o.acceptance_rate for o in outputs),
        )


class ChainStreams:
    """Independent normal and uniform Philox streams for one chain."""

    def __init__(self, seed, chain_index=0):
        root = np.random.SeedSequence(int(seed), spawn_key=(int(chain_index),))
        normal_ss, uniform_ss = root.spawn(2)
        self.normal = np.random.Generator(np.random.Philox(normal_ss))
        self.uniform = np.random.Generator(np.random.Philox(uniform_ss))

    def block(self, size, width):
        z = self.normal.standard_normal((size, width)) if width else self.normal.standard_normal(size)
        u = self.uniform.random(size)
        return z, u


def _check_kind(kind):
    if kind not in SAMPLER_KINDS:
        raise ConfigError(f"unknown sampler kind {kind!r}", key="kind")


def _check_prior(prior, kind, shape, cfg):
    if not isinstance(prior, PriorSpec):
        raise ConfigError("prior must be a PriorSpec")
    if kind == "mhmc" and prior.kind != "p2":
        raise ConfigError("mhmc samples the column-normalized kernel and needs the p2 prior",
                          key="prior.kind")
    if kind == "metromc" and prior.kind == "p1" and not cfg.constrained_p1:
        raise ConfigError("the p1 prior needs chain.constrained_p1 = true "
                          "(unconstrained proposals leave its domain)", key="constrained_p1")
    if (prior.kind == "gibbs" or cfg.preserve_diagonal) and shape[0] != shape[1]:
        raise ConfigError("gibbs prior and preserve_diagonal need a square coupling")
    try:
        prior.alpha_for(shape)
    except ValueError as exc:
        raise ConfigError(f"alpha does not broadcast to {shape}", key="prior.alpha") from exc


def _width(cfg, shape, kind):
    m, n = shape
    if kind == "mhmc":
        return 0
    if cfg.preserve_diagonal:
        return m
    if cfg.constrained_p1:
        return m + n - 1
    return m + n


def p1_interior_start(K0, cost_sum):
    """Diagonal rescaling of ``K0`` whose smallest cost ``-log k_ij`` is largest.

    The total ``-sum(log K)`` stays at ``cost_sum``. Solves
    ``max t  s.t.  c0_ij + a_i + b_j >= t,  n sum(a) + m sum(b) = 0``.

    Raises
    ------
    InvalidInputError
        When no rescaling has all costs positive (empty P1 support).
    """
    c0 = -np.log(np.asarray(K0, dtype=np.float64))
    m, n = c0.shape
    nv = m + n + 1
    A = np.zeros((m * n, nv))
    for i in range(m):
        for j in range(n):
            A[i * n + j, i] = -1.0
            A[i * n + j, m + j] = -1.0
    A[:, -1] = 1.0
    eq = np.concatenate([np.full(m, float(n)), np.full(n, float(m)), [0.0]])[None, :]
    bounds = [(0.0, 0.0)] + [(None, None)] * (m + n - 1) + [(None, cost_sum / (m * n))]
    obj = np.zeros(nv)
    obj[-1] = -1.0
    res = linprog(obj, A_ub=A, b_ub=c0.ravel(), A_eq=eq, b_eq=[0.0], bounds=bounds, method="highs")
    if res.status != 0 or not res.x[-1] > 0:
        raise InvalidInputError(
            f"the p1 support is empty: no diagonal rescaling of this coupling has all costs "
            f"positive with total {cost_sum}; increase prior.cost_sum")
    a, b = res.x[:m], res.x[m : m + n]
    c = c0 + a[:, None] + b[None, :]
    # remove the LP's rounding from the total with a constant shift
    c -= (c.sum() - cost_sum) / (m * n)
    return np.exp(-c)


def initial_state(T, prior, cfg, kind="metromc"):
    """Chain start ``K0`` derived from the observed coupling.

    P1 chains start at ``T / F`` with ``-sum(log K0) = cost_sum``; when that
    point has a non-positive cost the start moves to
    :func:`p1_interior_start`. P2 MetroMC chains start at ``Col(T)``;
    ``preserve_diagonal`` chains at ``T diag(1/diag T)`` so every diagonal
    cost is zero; otherwise at ``T`` itself.
    """
    T = coupling_values(T)
    if kind == "metromc":
        if prior.kind == "p1":
            K0 = renormalize_for_p1(T, cost_sum=prior.cost_sum, lam=1.0)
            if K0.max() >= 1.0:
                K0 = p1_interior_start(K0, prior.cost_sum)
            return K0
        if prior.kind == "p2":
            return normalize_columns(T)
        if cfg.preserve_diagonal:
            return T / np.diag(T)[None, :]
    return np.array(T)


def _log_prior_np(L, prior, lam):
    am1 = prior.alpha_for(L.shape) - 1.0
    return _kernels.log_prior.py_func(L, _KIND_CODE[prior.kind], am1, lam, prior.cost_sum,
                                      prior.beta, prior.gamma_weight)


def metromc_step(K, prior, cfg, rng=None, *, z=None, u=None):
    """One MetroMC step from kernel ``K``.

    Parameters
    ----------
    K : ndarray
        Current kernel.
    prior : PriorSpec
    cfg : ChainConfig
    rng : ChainStreams or numpy Generator, optional
        Source of the draws when ``z`` and ``u`` are not given.
    z, u : optional
        Standard normals (length ``m + n``, ``m + n - 1`` or ``m`` depending on
        the mode) and one uniform.

    Returns
    -------
    (ndarray, bool)
        Next kernel and whether the proposal was accepted.
    """
    K = np.asarray(K, dtype=np.float64)
    m, n = K.shape
    width = _width(cfg, K.shape, "metromc")
    z, u = _draws(rng, z, u, width)
    er = cfg.sigma * z[:m]
    if cfg.preserve_diagonal:
        ec = -er[:n]
    else:
        ec = np.empty(n)
        ec[: n - 1] = cfg.sigma * z[m : m + n - 1]
        if cfg.constrained_p1:
            ec[n - 1] = -(n * er.sum() + m * ec[: n - 1].sum()) / m
        else:
            ec[n - 1] = cfg.sigma * z[m + n - 1]
    L = np.log(K)
    Lp = L + er[:, None] + ec[None, :]
    if cfg.reject_kernel_ge_one and Lp.max() >= 0.0:
        return K, False
    cur = _log_prior_np(L, prior, cfg.lam)
    new = _log_prior_np(Lp, prior, cfg.lam)
    if new == -np.inf:
        return K, False
    if not (new >= cur or u < np.exp(new - cur)):
        return K, False
    Kp = np.exp(Lp)
    if prior.kind == "p2":
        Kp = normalize_columns(Kp)
    return Kp, True


def mhmc_step(K, prior, cfg, rng=None, *, row=0, w_scale=None, z=None, u=None):
    """One MHMC step rescaling row ``row`` of the working state ``K``.

    The target on the un-normalized working state is the P2 density of
    ``Col(K)`` times ``exp(-sum_i s_i / w_scale_i)`` (row sums ``s``), which
    keeps the overall scale from drifting without changing the distribution
    of ``Col(K)``. ``w_scale`` defaults to all ones.

    Returns
    -------
    (ndarray, bool)
        Next working state (not column-normalized) and the accept flag.
    """
    K = np.asarray(K, dtype=np.float64)
    m, _ = K.shape
    w_scale = np.ones(m) if w_scale is None else np.asarray(w_scale, dtype=np.float64)
    z, u = _draws(rng, z, u, 1)
    z = float(np.ravel(z)[0])
    am1 = prior.alpha_for(K.shape) - 1.0
    L = np.log(K)
    s = K[row].sum()
    sig = cfg.sigma0 * s**cfg.gamma + cfg.delta
    eps = sig * z
    sigp = cfg.sigma0 * (s * np.exp(eps)) ** cfg.gamma + cfg.delta
    Lp = L.copy()
    Lp[row] += eps
    cur = _kernels.mhmc_log_target.py_func(L, w_scale, am1)
    new = _kernels.mhmc_log_target.py_func(Lp, w_scale, am1)
    log_a = mhmc_log_acceptance(cur, new, eps, sig, sigp)
    if new > -np.inf and (log_a >= 0.0 or u < np.exp(log_a)):
        return np.exp(Lp), True
    return K, False


def mhmc_log_acceptance(log_target, log_target_new, eps, sig, sig_new):
    """``log A`` for a log-normal row step of size ``eps``.

    ``Q(s'|s)`` is the normal density of ``log(s'/s)`` at scale ``sig``
    divided by ``s'``, and the reverse move uses ``sig_new``.
    """
    log_q_fwd = -0.5 * (eps / sig) ** 2 - np.log(sig) - eps
    log_q_rev = -0.5 * (eps / sig_new) ** 2 - np.log(sig_new)
    return (log_target_new - log_target) + log_q_rev - log_q_fwd


def _draws(rng, z, u, width):
    if z is None or u is None:
        if rng is None:
            raise InvalidInputError("pass either rng or explicit draws z and u")
        if isinstance(rng, ChainStreams):
            zz = rng.normal.standard_normal(max(width, 1))
            uu = rng.uniform.random()
        else:
            zz = rng.standard_normal(max(width, 1))
            uu = rng.random()
        z = zz if z is None else z
        u = uu if u is None else u
    return np.asarray(z, dtype=np.float64), float(u)


def run_chain(T, prior, cfg, kind="metromc", chain_index=0, engine="compiled"):
    """Run one chain and collect ``cfg.n_samples`` thinned samples.

    Parameters
    ----------
    T : Coupling or array-like
        Observed (complete) coupling.
    prior : PriorSpec
    cfg : ChainConfig
    kind : {'metromc', 'mhmc'}
    chain_index : int
        Stream index under ``cfg.seed``; distinct chains of one run must use
        distinct indices.
    engine : {'compiled', 'python'}
        ``python`` replays the same draws through the numpy step functions.
        It is slow and meant for cross-checking.

    Returns
    -------
    ChainOutput
    """
    _check_kind(kind)
    if isinstance(T, Coupling) and not T.is_complete:
        raise InvalidInputError("run_chain needs a complete coupling")
    T = coupling_values(T)
    _check_prior(prior, kind, T.shape, cfg)
    K0 = initial_state(T, prior, cfg, kind)
    m, n = K0.shape
    start_prior = (_kernels.mhmc_log_target.py_func(np.log(K0), K0.sum(axis=1), prior.alpha_for(K0.shape) - 1.0)
                   if kind == "mhmc" else _log_prior_np(np.log(K0), prior, cfg.lam))
    if not np.isfinite(start_prior):
        raise InvalidInputError(
            "initial state lies outside the prior support")
    width = _width(cfg, K0.shape, kind)
    streams = ChainStreams(cfg.seed, chain_index)
    samples = np.zeros((cfg.n_samples, m, n))
    row_sums = np.zeros((cfg.n_samples, m))
    am1 = prior.alpha_for(K0.shape) - 1.0
    w_scale = K0.sum(axis=1)
    L = np.log(K0)
    accepted = 0
    total = cfg.total_steps
    start = 0
    while start < total:
        size = min(BLOCK, total - start)
        z, u = streams.block(size, width)
        if engine == "compiled":
            accepted += _compiled_block(kind, L, z, u, start, cfg, prior, am1, w_scale,
                                        samples, row_sums)
        elif engine == "python":
            accepted += _python_block(kind, L, z, u, start, cfg, prior, w_scale,
                                      samples, row_sums)
        else:
            raise ConfigError(f"unknown engine {engine!r}")
        start += size
    rate = accepted / (cfg.n_samples * cfg.lag)
    return ChainOutput(samples, rate, row_sums, cfg.seed, kind, cfg.lam, chain_index, cfg, prior)


def _compiled_block(kind, L, z, u, start, cfg, prior, am1, w_scale, samples, row_sums):
    if kind == "metromc":
        return _kernels.metromc_block(
            L, z, u, start, cfg.sigma, cfg.constrained_p1, cfg.reject_kernel_ge_one,
            cfg.preserve_diagonal, prior.kind == "p2", _KIND_CODE[prior.kind], am1,
            cfg.lam, prior.cost_sum, prior.beta, prior.gamma_weight,
            cfg.burn_in, cfg.lag, cfg.n_samples, samples, row_sums)
    return _kernels.mhmc_block(
        L, z, u, start, cfg.sigma0, cfg.gamma, cfg.delta, w_scale, am1,
        cfg.burn_in, cfg.lag, cfg.n_samples, samples, row_sums)


def _python_block(kind, L, z, u, start, cfg, prior, w_scale, samples, row_sums):
    m, n = L.shape
    K = np.exp(L)
    accepted = 0
    for b in range(u.shape[0]):
        step = start + b
        if kind == "metromc":
            K, ok = metromc_step(K, prior, cfg, z=z[b], u=u[b])
        else:
            K, ok = mhmc_step(K, prior, cfg, row=step % m, w_scale=w_scale, z=z[b], u=u[b])
        accepted += ok and step >= cfg.burn_in
        k = step - cfg.burn_in + 1
        if k > 0 and k % cfg.lag == 0 and k // cfg.lag <= cfg.n_samples:
            idx = k // cfg.lag - 1
            row_sums[idx] = K.sum(axis=1)
            samples[idx] = np.log(normalize_columns(K) if kind == "mhmc" else K)
    L[:, :] = np.log(K)
    return accepted


def run_chains(tasks, threads=1):
    """Run several chains, possibly concurrently, and return them in task order.

    ``tasks`` is a sequence of ``(T, prior, cfg, kind)`` tuples, optionally
    with a fifth element giving the stream index (default: the task's
    position). Output order and content do not depend on ``threads``.
    """
    tasks = list(tasks)
    if threads < 1:
        raise ConfigError("threads must be >= 1", key="threads")

    def one(k):
        T, prior, cfg, kind, *rest = tasks[k]
        return run_chain(T, prior, cfg, kind, chain_index=rest[0] if rest else k)

    if threads == 1 or len(tasks) <= 1:
        return [one(k) for k in range(len(tasks))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(len(tasks))))


def _fmt(x):
    return format(float(x), ".17g")


def _metadata(output, extra=None):
    from . import __version__

    meta = {
        "tool": "piot",
        "version": __version__,
        "kind": output.kind,
        "seed": output.seed_used,
        "chain_index": output.chain_index,
        "acceptance_rate": output.acceptance_rate,
        "n_samples": len(output),
        "shape": list(output.log_kernels.shape[1:]),
        "lam": output.lam,
    }
    if output.component_rates:
        meta["component_rates"] = list(output.component_rates)
    if output.config is not None:
        meta["config"] = output.config.to_dict()
    if output.prior is not None:
        meta["prior"] = {
            "kind": output.prior.kind,
            "alpha": np.asarray(output.prior.alpha_array).tolist(),
            "beta": output.prior.beta,
            "gamma_weight": output.prior.gamma_weight,
            "cost_sum": output.prior.cost_sum,
        }
    if extra:
        meta.update(extra)
    return meta


def write_trace_csv(output, path, what="kernel", extra=None):
    """One flattened (row-major) matrix per line after ``#`` metadata lines."""
    data = output.samples if what == "kernel" else output.costs
    m, n = data.shape[1:]
    meta = _metadata(output, extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in ("tool", "version", "kind", "seed", "acceptance_rate", "lam"):
            fh.write(f"# {key}: {meta[key]}\n")
        if "command" in meta:
            fh.write(f"# command: {meta['command']}\n")
        fh.write(",".join(f"{what[0]}_{i + 1}_{j + 1}" for i in range(m) for j in range(n)) + "\n")
        for mat in data:
            fh.write(",".join(_fmt(v) for v in mat.ravel()) + "\n")


def write_trace_jsonl(output, path, what="kernel"):
    data = output.samples if what == "kernel" else output.costs
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, mat in enumerate(data):
            rec = {"index": k, what: [[float(v) for v in row] for row in mat]}
            fh.write(json.dumps(rec) + "\n")


def write_metadata_json(output, path, extra=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_metadata(output, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")
