"""
Command-line interface.

    piot sinkhorn KERNEL.csv [--mu F] [--nu F] [--lam L] [--tol T] [--cost]
    piot infer COUPLING.csv CONFIG [--threads N]
    piot predict COUPLING.csv CONFIG --mode {noisy,missing} [--truth F] [--threads N]
    piot distance A.csv B.csv [--lam L] [--convention {euclidean,paper}]

Exit status: 0 on success, 1 on numerical failure (non-convergence), 2 on
invalid input or configuration.
"""

import argparse
import json
import os
import shlex
import sys

import numpy as np

from . import __version__
from .crossratio import iot_distance
from .diagnostics import autocorrelation, running_average, select_lag, write_xy_csv
from .errors import ConfigError, ConvergenceError, PIOTError
from .inference import gaussian_noise_posterior, predict_from_mean_cost, predict_missing
from .io import read_config, read_coupling, read_matrix, read_vector, write_matrix
from .matrix import Marginals, kernel_from_cost
from .priors import PriorSpec
from .samplers import (
    ChainConfig,
    run_chains,
    write_metadata_json,
    write_trace_csv,
    write_trace_jsonl,
)
from .sinkhorn import sinkhorn

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2

_CHAIN_FIELDS = ("sigma", "sigma0", "gamma", "delta", "burn_in", "n_samples", "lag", "seed",
                 "constrained_p1", "reject_kernel_ge_one", "preserve_diagonal", "lam")


def _command_line(argv):
    # --threads never changes results, so it is left out to keep outputs identical
    kept, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--threads":
            skip = True
            continue
        if a.startswith("--threads="):
            continue
        kept.append(a)
    return "piot " + " ".join(shlex.quote(a) for a in kept)


def _with_line(cfg, key, exc):
    """Re-raise a validation error with the config line of ``key``."""
    return ConfigError(exc.reason, line=cfg.get("__lines__", {}).get(key), key=key)


def build_chain_config(cfg):
    kwargs = {f: cfg[f"chain.{f}"] for f in _CHAIN_FIELDS if f"chain.{f}" in cfg}
    try:
        return ChainConfig(**kwargs)
    except ConfigError as exc:
        raise _with_line(cfg, f"chain.{exc.key}", exc) from None


def build_prior(cfg):
    alpha = cfg.get("prior.alpha", 1.0)
    if "prior.alpha_file" in cfg:
        alpha, _ = read_matrix(cfg["prior.alpha_file"])
    kwargs = {"kind": cfg.get("prior.kind", "p1"), "alpha": alpha}
    for f in ("beta", "gamma_weight", "cost_sum"):
        if f"prior.{f}" in cfg:
            kwargs[f] = cfg[f"prior.{f}"]
    try:
        return PriorSpec(**kwargs)
    except (ValueError, TypeError) as exc:
        key = next((k for k in ("prior.kind", "prior.alpha") if k in cfg), "prior.kind")
        raise ConfigError(str(exc), line=cfg.get("__lines__", {}).get(key), key=key) from None


def _sampler_kind(cfg):
    kind = cfg.get("sampler.kind", "metromc")
    if kind not in ("metromc", "mhmc"):
        raise ConfigError("sampler.kind must be metromc or mhmc",
                          line=cfg["__lines__"].get("sampler.kind"), key="sampler.kind")
    return kind


def _outdir(cfg, default):
    path = cfg.get("output.dir", default)
    os.makedirs(path, exist_ok=True)
    return path


def _meta(argv, seed=None):
    meta = {"tool": f"piot {__version__}", "command": _command_line(argv)}
    if seed is not None:
        meta["seed"] = seed
    return meta


def cmd_sinkhorn(args, argv):
    M, _ = read_matrix(args.matrix, header=args.header)
    K = kernel_from_cost(M, args.lam) if args.cost else M
    m, n = K.shape
    mu = read_vector(args.mu) if args.mu else np.full(m, 1.0 / m)
    nu = read_vector(args.nu) if args.nu else np.full(n, 1.0 / n)
    marg = Marginals(mu / mu.sum(), nu / nu.sum())
    res = sinkhorn(K, marg, tol=args.tol, max_iter=args.max_iter)
    meta = _meta(argv)
    meta["iterations"] = res.iterations
    meta["residual"] = format(res.residual, ".6e")
    write_matrix(args.output, res.plan, meta)
    return EXIT_OK


def _write_trace(out, path_base, output, fmt, what, meta):
    if fmt == "jsonl":
        write_trace_jsonl(output, path_base + ".jsonl", what)
    elif fmt == "csv":
        write_trace_csv(output, path_base + ".csv", what, extra=meta)
    else:
        raise ConfigError("output.format must be csv or jsonl", key="output.format")


def cmd_infer(args, argv):
    cfg = read_config(args.config)
    T = read_coupling(args.coupling, header=args.header, allow_missing=False)
    prior = build_prior(cfg)
    chain = build_chain_config(cfg)
    kind = _sampler_kind(cfg)
    n_chains = cfg.get("chain.n_chains", 1)
    if n_chains < 1:
        raise ConfigError("n_chains must be >= 1", line=cfg["__lines__"].get("chain.n_chains"),
                          key="chain.n_chains")
    outputs = run_chains([(T, prior, chain, kind)] * n_chains, threads=args.threads)
    out = _outdir(cfg, "piot_out")
    fmt = cfg.get("output.format", "csv")
    what = cfg.get("output.what", "kernel")
    if what not in ("kernel", "cost"):
        raise ConfigError("output.what must be kernel or cost", key="output.what")
    meta = _meta(argv, chain.seed)
    report = {"chains": []}
    for k, o in enumerate(outputs):
        suffix = "" if n_chains == 1 else f"_{k}"
        _write_trace(out, os.path.join(out, "samples" + suffix), o, fmt, what, meta)
        max_lag = min(cfg.get("output.max_lag", 100), len(o) - 1)
        entry = {"chain_index": k, "acceptance_rate": o.acceptance_rate}
        if max_lag >= 1:
            try:
                R = autocorrelation(o, max_lag)
                write_xy_csv(os.path.join(out, f"autocorrelation{suffix}.csv"), np.arange(R.size), R,
                             ("t", "R"), meta)
                lag = select_lag(R)
                entry["decorrelation_lag_samples"] = lag
                entry["decorrelation_lag_steps"] = None if lag is None else lag * chain.lag
            except PIOTError as exc:
                entry["autocorrelation"] = str(exc)
        ra = running_average(o.trace_row_sums, "entry")
        write_xy_csv(os.path.join(out, f"running_average{suffix}.csv"), np.arange(1, len(o) + 1), ra,
                     ("sample", "row_sum"), meta)
        write_metadata_json(o, os.path.join(out, f"metadata{suffix}.json"),
                            {"command": meta["command"], "diagnostics": entry})
        report["chains"].append(entry)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _idx(cfg, key):
    raw = cfg.get(key)
    try:
        i, j = (int(v) for v in raw)
    except (TypeError, ValueError):
        raise ConfigError("expected a 1-based (row, col) pair", line=cfg["__lines__"].get(key), key=key) from None
    return i - 1, j - 1


def _report(path, rows, meta):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in meta.items():
            fh.write(f"# {key}: {val}\n")
        fh.write("i,j,truth,predicted,delta_pct\n")
        for i, j, truth, pred, ref in rows:
            delta = "" if truth is None else format(100.0 * (pred - truth) / ref, ".6g")
            truth_s = "" if truth is None else format(truth, ".17g")
            fh.write(f"{i + 1},{j + 1},{truth_s},{format(pred, '.17g')},{delta}\n")


def cmd_predict(args, argv):
    cfg = read_config(args.config)
    T = read_coupling(args.coupling, header=args.header, allow_missing=True)
    truth_file = args.truth or cfg.get("predict.truth_file")
    truth = read_coupling(truth_file, allow_missing=False).dense() if truth_file else None
    prior = build_prior(cfg)
    chain = build_chain_config(cfg)
    kind = _sampler_kind(cfg)
    out = _outdir(cfg, "piot_predict")
    meta = _meta(argv, chain.seed)
    if args.mode == "missing":
        if len(T.missing) != 1:
            raise ConfigError(f"missing mode needs exactly one empty field, found {len(T.missing)}")
        low, high = cfg.get("fill.low"), cfg.get("fill.high")
        if low is None or high is None:
            raise ConfigError("missing mode needs fill.low and fill.high", key="fill.low")
        totals = None if truth is None else (truth.sum(axis=1), truth.sum(axis=0))
        res = predict_missing(T, low, high, cfg.get("fill.n", 100), prior, chain, kind=kind,
                              totals=totals, threads=args.threads)
        pred, C_mean, pooled = res.coupling, res.mean_cost, res.pooled
        idx = T.missing[0]
        ref = 0.5 * (low + high)
    else:
        if not T.is_complete:
            raise ConfigError("noisy mode needs a complete coupling")
        idx = _idx(cfg, "noise.idx")
        Tv = T.dense()
        pooled = gaussian_noise_posterior(Tv, idx, cfg.get("noise.sigma", 0.0), cfg.get("noise.n_mix", 10),
                                          prior, chain, kind, noises=cfg.get("noise.values"),
                                          threads=args.threads)
        total = Tv.sum()
        pred = predict_from_mean_cost(pooled, Marginals.of(Tv), chain.lam, total)
        C_mean = pooled.costs.mean(axis=0)
        ref = None if truth is None else truth[idx]
    write_matrix(os.path.join(out, "predicted.csv"), pred.values, meta)
    write_matrix(os.path.join(out, "mean_cost.csv"), C_mean, meta)
    rows = [(idx[0], idx[1], None if truth is None else float(truth[idx]), float(pred.values[idx]), ref)]
    _report(os.path.join(out, "report.csv"), rows, meta)
    with open(os.path.join(out, "report.csv"), encoding="utf-8") as fh:
        sys.stdout.write("".join(l for l in fh if not l.startswith("#")))
    summary = {"acceptance_rate": pooled.acceptance_rate, "component_rates": list(pooled.component_rates)}
    with open(os.path.join(out, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump({**meta, **summary, "mode": args.mode}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def cmd_distance(args, argv):
    A, _ = read_matrix(args.a, header=args.header)
    B, _ = read_matrix(args.b, header=args.header)
    if A.shape != B.shape:
        raise ConfigError(f"dimension mismatch: {A.shape} vs {B.shape}")
    print(format(iot_distance(A, B, args.lam, args.convention), ".12g"))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="piot", description="Probabilistic inverse optimal transport.")
    p.add_argument("--version", action="version", version=f"piot {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sinkhorn", help="forward entropic OT plan of a kernel (or cost)")
    s.add_argument("matrix")
    s.add_argument("--mu")
    s.add_argument("--nu")
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=100_000)
    s.add_argument("--cost", action="store_true", help="input is a cost matrix, use exp(-lam C)")
    s.add_argument("--header", action="store_true")
    s.add_argument("-o", "--output", default="-")
    s.set_defaults(func=cmd_sinkhorn)

    s = sub.add_parser("infer", help="sample the cost posterior of a coupling")
    s.add_argument("coupling")
    s.add_argument("config")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--header", action="store_true")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("predict", help="predict a noisy or missing entry")
    s.add_argument("coupling")
    s.add_argument("config")
    s.add_argument("--mode", choices=("noisy", "missing"), required=True)
    s.add_argument("--truth")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--header", action="store_true")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("distance", help="distance between the cost manifolds of two couplings")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--convention", choices=("euclidean", "paper"), default="euclidean")
    s.add_argument("--header", action="store_true")
    s.set_defaults(func=cmd_distance)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("piot: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args, argv)
    except ConvergenceError as exc:
        print(f"piot: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PIOTError, ValueError, OSError) as exc:
        print(f"piot: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
