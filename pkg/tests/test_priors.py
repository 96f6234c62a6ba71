import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import dirichlet

from piot.data import GAUSSIAN_NOISE_ALPHA, GAUSSIAN_NOISE_COST
from piot.errors import InvalidInputError
from piot.matrix import normalize_columns
from piot.priors import (
    PriorSpec,
    log_prior_gibbs_sym,
    log_prior_p1,
    log_prior_p1_normalized,
    log_prior_p2,
    log_prior_p2_normalized,
)


def unit_sum(rng, shape):
    C = rng.uniform(0.1, 1, shape)
    return C / C.sum()


class TestP1:
    def test_flat_alpha_constant(self, rng):
        vals = {log_prior_p1(unit_sum(rng, (3, 3))) for _ in range(5)}
        assert vals == {0.0}

    def test_domain(self, rng):
        C = unit_sum(rng, (2, 3)) * 0.9
        assert log_prior_p1(C) == -np.inf
        C = unit_sum(rng, (2, 3))
        C[0, 0], C[0, 1] = -0.01, C[0, 1] + C[0, 0] + 0.01
        assert log_prior_p1(C) == -np.inf

    def test_toeplitz_ratio(self):
        C = GAUSSIAN_NOISE_COST / GAUSSIAN_NOISE_COST.sum()
        Cp = C.copy()
        Cp[0, 1] += 0.01
        Cp[2, 2] -= 0.01
        a = GAUSSIAN_NOISE_ALPHA
        val = log_prior_p1(C, a)
        assert np.isfinite(val)
        direct = sum((a.flat[k] - 1) * (np.log(Cp.flat[k]) - np.log(C.flat[k])) for k in range(9))
        assert log_prior_p1(Cp, a) - val == pytest.approx(direct, abs=1e-10)

    def test_normalized_matches_scipy(self, rng):
        a = rng.uniform(0.5, 3, (2, 3))
        C = unit_sum(rng, (2, 3)) * 4.0
        got = log_prior_p1_normalized(C, a, cost_sum=4.0)
        assert got == pytest.approx(dirichlet.logpdf((C / 4.0).ravel(), a.ravel()), abs=1e-10)


class TestP2:
    def test_uniform_flat(self, rng):
        K = np.full((3, 3), 1 / 3)
        other = normalize_columns(rng.uniform(0.1, 1, (3, 3)))
        assert log_prior_p2(K) - log_prior_p2(other) == 0.0

    def test_domain(self):
        K = np.full((3, 3), 1 / 3)
        K[0, 1] += 0.1
        assert log_prior_p2(K) == -np.inf

    def test_alpha_two_ratio(self):
        a = np.array([0.5, 0.3, 0.2])[:, None]
        b = np.full((3, 1), 1 / 3)
        assert log_prior_p2(a, 2.0) - log_prior_p2(b, 2.0) == pytest.approx(np.log(0.03 * 27), abs=1e-12)
        # direct pdf oracle
        ratio = dirichlet.pdf(a.ravel(), [2, 2, 2]) / dirichlet.pdf(b.ravel(), [2, 2, 2])
        assert np.exp(log_prior_p2(a, 2.0) - log_prior_p2(b, 2.0)) == pytest.approx(ratio, rel=1e-12)

    def test_normalized_matches_scipy(self, rng):
        a = rng.uniform(0.5, 3, (3, 2))
        K = normalize_columns(rng.uniform(0.1, 1, (3, 2)))
        expected = sum(dirichlet.logpdf(K[:, j], a[:, j]) for j in range(2))
        assert log_prior_p2_normalized(K, a) == pytest.approx(expected, abs=1e-10)

    @given(arrays(np.float64, 3, elements=st.floats(1e-3, 1e3)))
    def test_row_rescaling_in_domain(self, d):
        T = np.array([[0.2, 0.1, 0.05], [0.1, 0.2, 0.1], [0.05, 0.1, 0.1]])
        assert np.isfinite(log_prior_p2(normalize_columns(d[:, None] * T), 1.5))


class TestGibbs:
    def test_symmetric_zero(self, rng):
        A = rng.uniform(0, 1, (4, 4))
        assert log_prior_gibbs_sym(A + A.T, 3.0) == 0.0

    def test_single_pair(self):
        a, beta, g = 0.7, 2.5, 1.3
        C = np.zeros((3, 3))
        C[0, 2] = a
        assert log_prior_gibbs_sym(C, beta, g) == pytest.approx(-beta * g * a * np.sqrt(2), rel=1e-14)

    def test_linear_in_beta(self, rng):
        C = rng.uniform(0, 1, (3, 3))
        assert log_prior_gibbs_sym(C, 2.0) == pytest.approx(2 * log_prior_gibbs_sym(C, 1.0), rel=1e-15)

    def test_non_square(self):
        with pytest.raises(InvalidInputError):
            log_prior_gibbs_sym(np.ones((2, 3)))

    @given(arrays(np.float64, (4, 4), elements=st.floats(-5, 5)))
    def test_transpose_invariant(self, C):
        assert log_prior_gibbs_sym(C, 1.7, 0.3) == log_prior_gibbs_sym(C.T, 1.7, 0.3)


class TestPriorSpec:
    def test_aliases_and_validation(self):
        assert PriorSpec("P1_dirichlet_cost").kind == "p1"
        assert PriorSpec("gibbs_symmetric_cost").kind == "gibbs"
        with pytest.raises(InvalidInputError):
            PriorSpec("p3")
        with pytest.raises(InvalidInputError):
            PriorSpec("p2", alpha=[[1.0, 0.0]])
        with pytest.raises(InvalidInputError):
            PriorSpec("p1", cost_sum=0)

    def test_density_dispatch(self, rng):
        K = rng.uniform(0.1, 0.9, (3, 3))
        spec = PriorSpec("p2", alpha=2.0)
        assert spec.log_density_kernel(K) == log_prior_p2(normalize_columns(K), 2.0)
        g = PriorSpec("gibbs", beta=4.0, gamma_weight=0.5)
        assert g.log_density_kernel(K, 2.0) == pytest.approx(
            log_prior_gibbs_sym(-np.log(K) / 2.0, 4.0, 0.5), rel=1e-14)

    @given(st.floats(0.1, 5), st.integers(0, 1000))
    def test_constant_invariance(self, alpha, seed):
        g = np.random.default_rng(seed)
        a = np.full((2, 3), alpha)
        C1, C2 = unit_sum(g, (2, 3)), unit_sum(g, (2, 3))
        d_raw = log_prior_p1(C1, a) - log_prior_p1(C2, a)
        d_norm = log_prior_p1_normalized(C1, a) - log_prior_p1_normalized(C2, a)
        assert d_raw == pytest.approx(d_norm, abs=1e-9)
