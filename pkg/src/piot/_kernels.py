"""
Compiled inner loops for the samplers.

Each function advances one chain through a block of pre-drawn random numbers,
mutating the log-kernel ``L`` in place. Keeping the random numbers outside
makes the loops pure functions of their inputs, so the numpy reference steps
in :mod:`piot.samplers` can replay the same draws.
"""

import math

import numpy as np
from numba import njit

PRIOR_P1 = 0
PRIOR_P2 = 1
PRIOR_GIBBS = 2


@njit(cache=True, nogil=True)
def log_prior(L, kind, am1, lam, cost_sum, beta, gw):
    """Prior log-density of the state with log-kernel ``L``.

    ``am1`` holds ``alpha - 1``. P1 acts on ``-L`` (that is ``lam * C``), P2 on
    the column-normalized kernel and the Gibbs prior on ``C = -L / lam``.
    """
    m, n = L.shape
    if kind == PRIOR_P1:
        total = 0.0
        for i in range(m):
            for j in range(n):
                if L[i, j] >= 0.0:
                    return -np.inf
                total -= L[i, j]
        if abs(total - cost_sum) > 1e-8:
            return -np.inf
        acc = 0.0
        for i in range(m):
            for j in range(n):
                acc += am1[i, j] * math.log(-L[i, j] / cost_sum)
        return acc
    elif kind == PRIOR_P2:
        acc = 0.0
        for j in range(n):
            mx = L[0, j]
            for i in range(1, m):
                if L[i, j] > mx:
                    mx = L[i, j]
            s = 0.0
            for i in range(m):
                s += math.exp(L[i, j] - mx)
            lse = mx + math.log(s)
            for i in range(m):
                v = L[i, j] - lse
                if v >= 0.0 or math.exp(v) <= 0.0:
                    return -np.inf
                acc += am1[i, j] * v
        return acc
    else:
        sq = 0.0
        for i in range(m):
            for j in range(i + 1, n):
                d = gw * (L[j, i] - L[i, j]) / lam
                sq += 2.0 * d * d
        return -beta * math.sqrt(sq)


@njit(cache=True, nogil=True)
def metromc_block(L, z, u, start, sigma, constrained, reject_ge_one, preserve_diag,
                  normalize_cols, kind, am1, lam, cost_sum, beta, gw,
                  burn_in, lag, n_samples, samples, row_sums):
    """Run ``len(u)`` MetroMC steps starting at global step ``start``.

    ``z`` has ``m + n`` columns; in constrained mode the last one is ignored
    and replaced by the dependent value. Returns the number of accepted steps
    taken after burn-in.
    """
    m, n = L.shape
    er = np.empty(m)
    ec = np.empty(n)
    Lp = np.empty_like(L)
    cur = log_prior(L, kind, am1, lam, cost_sum, beta, gw)
    acc_post = 0
    for b in range(u.shape[0]):
        step = start + b
        for i in range(m):
            er[i] = sigma * z[b, i]
        if preserve_diag:
            for j in range(n):
                ec[j] = -er[j]
        else:
            for j in range(n):
                ec[j] = sigma * z[b, m + j]
            if constrained:
                # n * sum(er) + m * sum(ec) = 0 keeps the cost total fixed
                s = 0.0
                for i in range(m):
                    s += n * er[i]
                for j in range(n - 1):
                    s += m * ec[j]
                ec[n - 1] = -s / m
        mx = -np.inf
        for i in range(m):
            for j in range(n):
                v = L[i, j] + er[i] + ec[j]
                Lp[i, j] = v
                if v > mx:
                    mx = v
        accepted = False
        if not (reject_ge_one and mx >= 0.0):
            new = log_prior(Lp, kind, am1, lam, cost_sum, beta, gw)
            if new > -np.inf:
                if new >= cur:
                    accepted = True
                else:
                    accepted = u[b] < math.exp(new - cur)
        if accepted:
            if normalize_cols:
                for j in range(n):
                    cmx = Lp[0, j]
                    for i in range(1, m):
                        if Lp[i, j] > cmx:
                            cmx = Lp[i, j]
                    s = 0.0
                    for i in range(m):
                        s += math.exp(Lp[i, j] - cmx)
                    lse = cmx + math.log(s)
                    for i in range(m):
                        Lp[i, j] -= lse
            L[:, :] = Lp
            cur = new
            if step >= burn_in:
                acc_post += 1
        _record(L, step, burn_in, lag, n_samples, samples, row_sums)
    return acc_post


@njit(cache=True, nogil=True)
def _record(L, step, burn_in, lag, n_samples, samples, row_sums):
    k = step - burn_in + 1
    if k > 0 and k % lag == 0:
        idx = k // lag - 1
        if idx < n_samples:
            m, n = L.shape
            for i in range(m):
                s = 0.0
                for j in range(n):
                    samples[idx, i, j] = L[i, j]
                    s += math.exp(L[i, j])
                row_sums[idx, i] = s
    return


@njit(cache=True, nogil=True)
def mhmc_log_target(L, w_scale, am1):
    """P2 log-prior of ``Col(exp(L))`` minus the total relative row mass."""
    m, n = L.shape
    lp = log_prior(L, PRIOR_P2, am1, 1.0, 1.0, 1.0, 1.0)
    mass = 0.0
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += math.exp(L[i, j])
        mass += s / w_scale[i]
    return lp - mass


@njit(cache=True, nogil=True)
def mhmc_block(L, z, u, start, sigma0, gamma, delta, w_scale, am1,
               burn_in, lag, n_samples, samples, row_sums):
    """Run ``len(u)`` MHMC steps (cyclic rows) from global step ``start``.

    The working state is the un-normalized ``exp(L)``; ``w_scale`` holds the
    initial row sums, so ``s_i / w_scale[i]`` is the row's scale relative to
    the start. Samples are stored as log of the column-normalized kernel.
    """
    m, n = L.shape
    saved = np.empty(n)
    cur = mhmc_log_target(L, w_scale, am1)
    acc_post = 0
    for b in range(u.shape[0]):
        step = start + b
        i = step % m
        s = 0.0
        for j in range(n):
            s += math.exp(L[i, j])
        sig = sigma0 * s ** gamma + delta
        eps = sig * z[b]
        sp = s * math.exp(eps)
        sigp = sigma0 * sp ** gamma + delta
        for j in range(n):
            saved[j] = L[i, j]
            L[i, j] += eps
        new = mhmc_log_target(L, w_scale, am1)
        # lognormal proposal density in s, so log q ratio carries the Jacobian eps
        log_a = (new - cur) + eps
        log_a += -0.5 * (eps / sigp) ** 2 - math.log(sigp)
        log_a -= -0.5 * (eps / sig) ** 2 - math.log(sig)
        accepted = new > -np.inf and (log_a >= 0.0 or u[b] < math.exp(log_a))
        if accepted:
            cur = new
            if step >= burn_in:
                acc_post += 1
        else:
            for j in range(n):
                L[i, j] = saved[j]
        k = step - burn_in + 1
        if k > 0 and k % lag == 0:
            idx = k // lag - 1
            if idx < n_samples:
                for r in range(m):
                    rs = 0.0
                    for j in range(n):
                        rs += math.exp(L[r, j])
                    row_sums[idx, r] = rs
                for j in range(n):
                    cmx = L[0, j]
                    for r in range(1, m):
                        if L[r, j] > cmx:
                            cmx = L[r, j]
                    cs = 0.0
                    for r in range(m):
                        cs += math.exp(L[r, j] - cmx)
                    lse = cmx + math.log(cs)
                    for r in range(m):
                        samples[idx, r, j] = L[r, j] - lse
    return acc_post
