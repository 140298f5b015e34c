import math
import statistics

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnmm.evaluation import (MONTE_CARLO, SIMPSON, IseResult, ise_mc, ise_simpson_1d,
                             mean_log_likelihood, padded_interval, relative_ise_reduction,
                             welch_t_test)
from dnmm.integration import DomainBox
from dnmm.synthdata import FtMixture


def uniform01(x):
    return np.where((x[:, 0] >= 0) & (x[:, 0] <= 1), 1.0, 0.0)


def half_step(x):
    return np.where((x[:, 0] >= 0) & (x[:, 0] <= 0.5), 2.0, 0.0)


GUMBEL_A = FtMixture((1.0,), (1.0,), (0.4,))
GUMBEL_B = FtMixture((1.0,), (1.3,), (0.6,))


def trapezoid_ise(p, q, a, b, nodes=10**6):
    x = np.linspace(a, b, nodes)
    sq = (p(x) - q(x)) ** 2
    h = (b - a) / (nodes - 1)
    return h * (sq.sum() - 0.5 * (sq[0] + sq[-1]))


def welch_by_hand(a, b):
    ma, mb = statistics.fmean(a), statistics.fmean(b)
    va, vb = statistics.variance(a) / len(a), statistics.variance(b) / len(b)
    t = (ma - mb) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    # two-sided tail of Student's t through the regularized incomplete beta
    p = float(mpmath.betainc(df / 2, 0.5, 0, df / (df + t * t), regularized=True))
    return t, df, p


# -- ISE ----------------------------------------------------------------


def test_identical_densities_have_zero_ise():
    assert ise_simpson_1d(GUMBEL_A, GUMBEL_A, (0, 5)).value == 0.0
    box = DomainBox([0.0], [5.0])
    assert ise_mc(GUMBEL_A, GUMBEL_A, box, 1000, np.random.default_rng(0)).value == 0.0


def test_uniform_against_half_step():
    result = ise_simpson_1d(uniform01, half_step, (0.0, 1.0), 2001)
    assert result.value == pytest.approx(1.0, rel=0.02)
    assert result.method == SIMPSON and result.count == 2001 and result.stderr is None


def test_gumbels_match_dense_trapezoid():
    reference = trapezoid_ise(GUMBEL_A.pdf, GUMBEL_B.pdf, -2.0, 8.0)
    value = ise_simpson_1d(GUMBEL_A, GUMBEL_B, (-2.0, 8.0), 4001).value
    assert value == pytest.approx(reference, rel=1e-6)


def test_simpson_rejects_bad_node_counts():
    for nodes in (2000, 1, 2):
        with pytest.raises(ValueError, match="odd"):
            ise_simpson_1d(GUMBEL_A, GUMBEL_B, (0, 1), nodes)


def test_monte_carlo_agrees_with_simpson():
    box = DomainBox([-2.0], [8.0])
    mc = ise_mc(GUMBEL_A, GUMBEL_B, box, 10**5, np.random.default_rng(1))
    quad = ise_simpson_1d(GUMBEL_A, GUMBEL_B, (-2.0, 8.0), 4001)
    assert mc.method == MONTE_CARLO and mc.stderr > 0
    assert abs(mc.value - quad.value) < 3 * mc.stderr


def test_monte_carlo_constant_integrand():
    box = DomainBox([0.0, 0.0], [1.0, 1.0])
    one = lambda x: np.ones(len(x))
    zero = lambda x: np.zeros(len(x))
    result = ise_mc(one, zero, box, 10**5, np.random.default_rng(2))
    assert result.value == 1.0 and result.stderr == 0.0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-1, 1), scale=st.floats(0.2, 2))
def test_ise_symmetric_and_nonnegative(seed, shift, scale):
    p = GUMBEL_A
    q = FtMixture((1.0,), (1.0 + shift,), (0.4 * scale,))
    a = ise_simpson_1d(p, q, (-3, 9), 1001).value
    b = ise_simpson_1d(q, p, (-3, 9), 1001).value
    assert a == b and a >= 0
    box = DomainBox([-3.0], [9.0])
    c = ise_mc(p, q, box, 500, np.random.default_rng(seed)).value
    d = ise_mc(q, p, box, 500, np.random.default_rng(seed)).value
    assert c == d and c >= 0


def test_ise_result_invariants():
    with pytest.raises(ValueError):
        IseResult(-1.0, SIMPSON, 3)
    with pytest.raises(ValueError):
        IseResult(1.0, MONTE_CARLO, 10)
    with pytest.raises(ValueError):
        IseResult(1.0, SIMPSON, 3, stderr=0.1)


def test_padded_interval():
    assert padded_interval([0.0, 10.0, 4.0]) == (-1.5, 11.5)


# -- likelihood ---------------------------------------------------------


def test_uniform_density_log_likelihood():
    data = np.random.default_rng(3).uniform(0, 4, size=(20, 1))
    value, floored = mean_log_likelihood(lambda x: np.full(len(x), 0.25), data)
    assert value == pytest.approx(-math.log(4.0), rel=1e-15) and not floored


def test_log_likelihood_floor_is_flagged():
    value, floored = mean_log_likelihood(lambda x: np.array([0.5, 0.0]), np.zeros((2, 1)))
    assert floored
    assert value == pytest.approx(0.5 * (math.log(0.5) + math.log(1e-300)), rel=1e-15)


def test_log_likelihood_three_point_hand_sum():
    data = np.array([[0.5], [1.0], [2.5]])
    expected = (math.log(GUMBEL_A.pdf(0.5)) + math.log(GUMBEL_A.pdf(1.0))
                + math.log(GUMBEL_A.pdf(2.5))) / 3
    assert mean_log_likelihood(GUMBEL_A, data)[0] == pytest.approx(expected, rel=1e-14)


def test_log_likelihood_needs_data():
    with pytest.raises(ValueError):
        mean_log_likelihood(GUMBEL_A, np.empty((0, 1)))


# -- relative reduction -------------------------------------------------


def test_relative_reduction_values():
    assert relative_ise_reduction(0.3, 0.3) == 0.0
    assert relative_ise_reduction(1.0, 0.9044) == pytest.approx(9.56, abs=1e-10)
    assert relative_ise_reduction(IseResult(2.0, SIMPSON, 3), IseResult(0.0, SIMPSON, 3)) == 100.0
    assert relative_ise_reduction(1.0, 1.5) == -50.0
    with pytest.raises(ValueError):
        relative_ise_reduction(0.0, 1.0)


# -- Welch --------------------------------------------------------------


def test_welch_identical_samples():
    result = welch_t_test([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])
    assert result.t == 0.0 and result.p_value == 1.0


def test_welch_large_separation():
    result = welch_t_test([1.0, 2.0, 3.0, 4.0], [11.0, 12.0, 13.0, 14.0])
    assert result.p_value < 0.01


def test_welch_worked_example():
    a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4]
    b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4]
    t, df, p = welch_by_hand(a, b)
    result = welch_t_test(a, b)
    assert result.t == pytest.approx(t, rel=1e-12)
    assert result.df == pytest.approx(df, rel=1e-12)
    assert result.p_value == pytest.approx(p, rel=1e-10)
    # rounded figures of the published worked example
    assert round(result.t, 2) == -2.46 and round(result.p_value, 3) == 0.021


@settings(max_examples=30, deadline=None)
@given(a=st.lists(st.floats(-100, 100), min_size=2, max_size=12),
       b=st.lists(st.floats(-100, 100), min_size=2, max_size=12))
def test_welch_matches_hand_arithmetic(a, b):
    if statistics.variance(a) < 1e-6 or statistics.variance(b) < 1e-6:
        return
    t, df, p = welch_by_hand(a, b)
    result = welch_t_test(a, b)
    assert result.t == pytest.approx(t, rel=1e-9, abs=1e-12)
    assert result.df == pytest.approx(df, rel=1e-9)
    assert result.p_value == pytest.approx(p, rel=1e-8, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-1e3, 1e3))
def test_welch_shift_invariant(seed, shift):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=8), rng.normal(0.5, 2.0, size=11)
    r1 = welch_t_test(a, b)
    r2 = welch_t_test(a + shift, b + shift)
    assert r2.t == pytest.approx(r1.t, rel=1e-9, abs=1e-9)
    assert r2.df == pytest.approx(r1.df, rel=1e-9)
    assert r2.p_value == pytest.approx(r1.p_value, rel=1e-8, abs=1e-12)


def test_welch_degenerate_inputs():
    with pytest.raises(ValueError):
        welch_t_test([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        welch_t_test([1.0, 1.0], [1.0, 2.0])
