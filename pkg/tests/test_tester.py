import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpt.algebra import enumerate_multi_indices
from tpt.distributions import DiscreteDistribution, gauss_hermite_product, sample_gaussian
from tpt.errors import SizeError
from tpt.tester import (
    OVERFLOW_LIMIT,
    double_factorial,
    empirical_moments,
    gaussian_moment,
    moment_slack,
    required_samples,
    tamm_accept,
    theory_parameters,
)

DERIVED = json.loads((Path(__file__).parent / "fixtures" / "derived.json").read_text())


def test_double_factorial():
    assert [double_factorial(a) for a in range(-1, 8)] == [1, 1, 1, 2, 3, 8, 15, 48, 105]


def test_gaussian_moment_examples():
    assert gaussian_moment((1, 0)) == 0.0
    assert gaussian_moment((2, 2)) == 1.0
    assert gaussian_moment((4, 0)) == 3.0
    assert gaussian_moment((6, 2, 0)) == 15.0


def test_gaussian_moment_monte_carlo():
    X = sample_gaussian(2, 10**6, 99)
    for alpha, want in [((2, 2), 1.0), ((4, 0), 3.0)]:
        mono = X[:, 0] ** alpha[0] * X[:, 1] ** alpha[1]
        assert abs(mono.mean() - want) <= 4 * mono.std() / 1e3


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 8), min_size=1, max_size=5), st.randoms(use_true_random=False))
def test_gaussian_moment_symmetries(alpha, rnd):
    perm = list(alpha)
    rnd.shuffle(perm)
    assert gaussian_moment(tuple(perm)) == gaussian_moment(tuple(alpha))
    if any(a % 2 for a in alpha):
        assert gaussian_moment(tuple(alpha)) == 0.0


# -- empirical moments -------------------------------------------------------------------


def test_empirical_moments_examples():
    t = empirical_moments([[1.0], [-1.0]], 2)
    assert t.values().tolist() == [1.0, 0.0, 1.0]
    assert empirical_moments([[2.0]], 2).values().tolist() == [1.0, 2.0, 4.0]
    assert len(empirical_moments(np.zeros((3, 3)), 4)) == math.comb(7, 4)


def test_empirical_moments_empty():
    with pytest.raises(ValueError):
        empirical_moments(np.zeros((0, 2)), 2)


def test_empirical_moments_gaussian():
    X = sample_gaussian(2, 10**5, 4)
    t = empirical_moments(X, 3)
    for alpha in enumerate_multi_indices(2, 3):
        assert abs(t[alpha] - gaussian_moment(alpha)) < 0.05


def test_empirical_moments_order_independent_sum():
    # compensated accumulation: a permuted sample gives the same table to 1e-12
    X = sample_gaussian(2, 3 * 10**5, 8) * 3
    a = empirical_moments(X, 4).values()
    b = empirical_moments(X[::-1], 4).values()
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


# -- tester --------------------------------------------------------------------------------


def test_tamm_accepts_replicated_quadrature():
    D = gauss_hermite_product(1, 4)
    # weights of the 4-node rule are irrational; replicate to large counts and test
    # at a slack that absorbs the rounding of the weights to counts
    counts = np.round(D.weights * 10**6).astype(int)
    pts = np.repeat(D.points, counts, axis=0)
    rounding = moment_slack(DiscreteDistribution.from_counts(pts), 5)[0]
    v = tamm_accept(pts, 5, max(1e-6, 2 * rounding))
    assert v.accepted


def test_tamm_accepts_exact_counts():
    # +-1 with equal counts has moments 1, 0, 1, 0 exactly up to degree 3
    pts = np.array([[1.0], [-1.0]] * 5)
    assert tamm_accept(pts, 3, 1e-6).accepted
    assert not tamm_accept(pts, 4, 1e-6).accepted


def test_tamm_rejects_zeros():
    v = tamm_accept(np.zeros((10, 1)), 2, 0.5)
    assert not v.accepted
    assert v.worst_index == (2,)
    assert v.worst_deviation == 1.0
    assert v.m == 10


def test_tamm_tie_is_accept():
    v = tamm_accept(np.zeros((4, 1)), 2, 1.0)
    assert v.accepted and v.worst_deviation == 1.0


def test_tamm_worst_index_first_in_grlex():
    # both (2, 0) and (0, 2) deviate by 1; the earlier one in graded-lex order is reported
    v = tamm_accept(np.zeros((5, 2)), 2, 0.1)
    assert v.worst_index == (2, 0)


def test_tamm_rejects_bad_eta():
    with pytest.raises(ValueError):
        tamm_accept(np.zeros((3, 1)), 2, 0.0)


def test_verdict_json_keys():
    d = tamm_accept(np.zeros((4, 1)), 2, 0.5).to_dict()
    assert set(d) == {"accepted", "worst_alpha", "worst_dev", "k", "eta", "m"}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(0.01, 5.0), st.floats(1.0, 3.0))
def test_tamm_monotone(seed, k, eta, factor):
    X = sample_gaussian(2, 200, seed)
    v = tamm_accept(X, k, eta)
    if v.accepted:
        assert tamm_accept(X, k, eta * factor).accepted
        for k2 in range(1, k):
            assert tamm_accept(X, k2, eta).accepted


def test_tamm_is_label_blind():
    # the tester takes points only; the verdict cannot depend on labels
    X = sample_gaussian(2, 500, 3)
    v = tamm_accept(X, 3, 0.3)
    assert tamm_accept(X.copy(), 3, 0.3) == v


# -- moment slack --------------------------------------------------------------------------


def test_moment_slack_examples():
    assert moment_slack(gauss_hermite_product(1, 3), 5)[0] <= 1e-9
    assert moment_slack(gauss_hermite_product(1, 2), 4) == (pytest.approx(2.0), (4,))
    assert moment_slack(DiscreteDistribution.point_mass([0.0]), 2) == (1.0, (2,))


def test_moment_slack_cost_cap():
    with pytest.raises(SizeError):
        moment_slack(gauss_hermite_product(3, 10), 6, cap=10**4)


# -- sample size and theory parameters ----------------------------------------------------------


def test_required_samples_examples():
    assert required_samples(1, 1, 1.0).m == 2
    assert required_samples(2, 2, 0.1).m == 6400
    base = required_samples(2, 3, 0.2).m
    assert required_samples(2, 3, 0.1).m == 4 * base


def test_required_samples_desk_values():
    for key, want in DERIVED["required_samples_c001"].items():
        n, k = map(int, key.split(","))
        assert required_samples(n, k, 0.2, c=0.01).m == want


def test_required_samples_overflow_is_data():
    s = required_samples(10, 30, 1e-6)
    assert s.overflow
    assert s.m == OVERFLOW_LIMIT
    assert s.log10_m == pytest.approx(30 * math.log10(600) + 12)


def test_theory_parameters_d1():
    tp = theory_parameters(1, 0.5)
    assert tp.k == 268435456 and not tp.k_overflow
    assert tp.eta_underflow
    assert tp.samples.overflow
    assert tp.log10_eta == pytest.approx(-268435456 * math.log10(268435456))


def test_theory_parameters_power_law():
    a = theory_parameters(1, 0.5, n=2)
    b = theory_parameters(1, 0.25, n=2)
    assert b.log10_k - a.log10_k == pytest.approx(28 * math.log10(2), rel=1e-12)


def test_theory_parameters_d2():
    tp = theory_parameters(2, 0.9)
    assert math.isfinite(tp.log10_k) and math.isfinite(tp.log10_eta)
    assert tp.to_dict()["m_overflow"]


def test_theory_parameters_argument_checks():
    with pytest.raises(ValueError):
        theory_parameters(1, 1.5)
    with pytest.raises(ValueError):
        theory_parameters(0, 0.5)
