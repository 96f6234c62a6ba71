"""
Probabilistic inverse optimal transport.

Given an observed coupling ``T``, describe and sample the costs ``C`` whose
entropic optimal transport plan is ``T``.
"""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, InvalidInputError, NotEquivalentError, PIOTError
from .matrix import (
    Coupling,
    Marginals,
    ScalingPair,
    cost_from_kernel,
    kernel_from_cost,
    normalize_columns,
    normalize_rows,
    renormalization_constant,
    renormalize_for_p1,
)
from .sinkhorn import SinkhornResult, is_on_manifold, sinkhorn, solve_eot
from .crossratio import CrossRatioBasis, basis, cr_equivalent, cross_ratio, iot_distance, scaling_factors
from .priors import PriorSpec, log_prior_gibbs_sym, log_prior_p1, log_prior_p2
from .samplers import ChainConfig, ChainOutput, metromc_step, mhmc_step, run_chain, run_chains
