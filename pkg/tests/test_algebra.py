import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpt.algebra import (
    PRUNE_TOL,
    Polynomial,
    enumerate_multi_indices,
    poly_coeff_norms,
    poly_compose_linear,
    poly_eval,
    poly_multilinearize,
    poly_normalize,
)
from tpt.errors import DimensionError, NormalizationError


def brute_indices(n, k):
    return {a for a in itertools.product(range(k + 1), repeat=n) if sum(a) <= k}


# -- multi-indices ---------------------------------------------------------------


def test_enumerate_small_cases():
    assert enumerate_multi_indices(1, 2) == [(0,), (1,), (2,)]
    assert enumerate_multi_indices(2, 1) == [(0, 0), (1, 0), (0, 1)]
    assert len(enumerate_multi_indices(3, 2)) == math.comb(5, 2) == 10


@pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 5) for k in range(7)])
def test_enumerate_matches_brute_force(n, k):
    got = enumerate_multi_indices(n, k)
    assert len(got) == math.comb(n + k, k)
    assert len(set(got)) == len(got)
    assert set(got) == brute_indices(n, k)
    degrees = [sum(a) for a in got]
    assert degrees == sorted(degrees)


def test_enumerate_rejects_bad_arguments():
    with pytest.raises(ValueError):
        enumerate_multi_indices(0, 2)
    with pytest.raises(ValueError):
        enumerate_multi_indices(2, -1)


# -- construction and evaluation ---------------------------------------------------


def test_no_zero_coefficients_stored():
    p = Polynomial(2, {(1, 0): 1.0, (0, 1): 0.0, (2, 0): 0.0})
    assert p.terms == {(1, 0): 1.0}


def test_zero_polynomial_has_degree_zero():
    z = Polynomial(3)
    assert z.is_zero()
    assert z.degree == 0
    assert poly_eval(z, [1.0, 2.0, 3.0]) == 0.0


def test_poly_eval_examples():
    assert poly_eval(Polynomial(2, {(1, 1): 1.0}), [2, 3]) == 6.0
    assert poly_eval(Polynomial(1, {(0,): 1.0, (2,): 2.0}), [3]) == 19.0


def test_poly_eval_dimension_mismatch():
    with pytest.raises(DimensionError):
        poly_eval(Polynomial(2, {(1, 0): 1.0}), [1.0])


def test_bad_multi_index_length():
    with pytest.raises(DimensionError):
        Polynomial(2, {(1,): 1.0})


def test_vectorized_evaluate_agrees_with_poly_eval():
    rng = np.random.default_rng(3)
    p = Polynomial.from_coefficients(3, 4, rng.standard_normal(math.comb(7, 4)))
    X = rng.standard_normal((50, 3))
    got = p.evaluate(X)
    want = np.array([poly_eval(p, x) for x in X])
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_arithmetic():
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    p = (x + y) * (x - y)
    assert p.terms == {(2, 0): 1.0, (0, 2): -1.0}
    assert (p - p).is_zero()
    assert (2 * x).terms == {(1, 0): 2.0}


# -- normalization and norms -----------------------------------------------------------


def test_normalize_examples():
    assert poly_normalize(Polynomial(1, {(1,): 3.0})).terms == {(1,): 1.0}
    p = poly_normalize(Polynomial(2, {(1, 0): 1.0, (0, 1): 1.0}))
    np.testing.assert_allclose(list(p.terms.values()), [1 / math.sqrt(2)] * 2, rtol=1e-15)
    q = poly_normalize(Polynomial(2, {(0, 0): 2.0, (1, 1): 2.0}))
    np.testing.assert_allclose(list(q.terms.values()), [1 / math.sqrt(2)] * 2, rtol=1e-15)


def test_normalize_zero_raises():
    with pytest.raises(NormalizationError):
        poly_normalize(Polynomial(2))


def test_coeff_norms_examples():
    l1, l2 = poly_coeff_norms(Polynomial(2, {(1, 0): 1.0, (0, 1): -1.0}))
    assert l1 == 2.0
    assert l2 == pytest.approx(math.sqrt(2), rel=1e-15)
    assert poly_coeff_norms(Polynomial(3)) == (0.0, 0.0)


# -- composition ------------------------------------------------------------------


def test_compose_examples():
    q = poly_compose_linear(Polynomial(1, {(2,): 1.0}), [[1.0, 1.0]])
    assert q.terms == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}
    p = Polynomial(1, {(1,): 1.0})
    assert poly_compose_linear(p, [[1.0]]) == p
    r = poly_compose_linear(Polynomial(2, {(1, 1): 1.0}), [[1, 0], [0, 2]])
    assert r.terms == {(1, 1): 2.0}


def test_compose_dimension_mismatch():
    with pytest.raises(DimensionError):
        poly_compose_linear(Polynomial(2, {(1, 0): 1.0}), [[1.0, 0.0]])


# -- multilinearization -------------------------------------------------------------


def test_multilinearize_drops_cubes():
    q = Polynomial(1, {(3,): 1.0, (1,): 1.0})
    assert poly_multilinearize(q).terms == {(1,): 1.0}


def test_multilinearize_squares_become_one():
    # only the variables with exponent exactly one survive
    q = Polynomial(2, {(2, 1): 5.0})
    assert poly_multilinearize(q).terms == {(0, 1): 5.0}


def test_multilinearize_accumulates():
    q = Polynomial(2, {(2, 0): 1.0, (0, 2): 2.0, (0, 0): 0.5, (1, 1): 1.0})
    assert poly_multilinearize(q).terms == {(0, 0): 3.5, (1, 1): 1.0}


def test_multilinear_untouched():
    q = Polynomial(3, {(1, 1, 0): 2.0, (0, 0, 1): -1.0, (0, 0, 0): 4.0})
    assert poly_multilinearize(q) == q


# -- serialization ---------------------------------------------------------------------


def test_json_round_trip_and_order():
    p = Polynomial(2, {(0, 2): 1.0, (1, 0): -0.5, (0, 0): 0.1, (2, 0): 3.0})
    data = json.loads(p.to_json())
    assert data["n"] == 2
    assert [t["alpha"] for t in data["terms"]] == [[0, 0], [1, 0], [2, 0], [0, 2]]
    assert Polynomial.from_json(p.to_json()) == p
    assert Polynomial.from_json(p.to_json()).to_json() == p.to_json()


# -- properties ---------------------------------------------------------------------------


@st.composite
def sparse_polys(draw, n=None, max_deg=4):
    n = draw(st.integers(1, 4)) if n is None else n
    alphas = draw(st.lists(st.tuples(*[st.integers(0, max_deg)] * n), max_size=6))
    coefs = draw(st.lists(st.floats(-5, 5, allow_nan=False), min_size=len(alphas), max_size=len(alphas)))
    # arithmetic prunes below PRUNE_TOL, so keep raw inputs above it
    return Polynomial(n, {a: c for a, c in zip(alphas, coefs) if sum(a) <= max_deg and abs(c) >= PRUNE_TOL})


@settings(max_examples=100, deadline=None)
@given(sparse_polys())
def test_compose_identity_is_exact(p):
    assert poly_compose_linear(p, np.eye(p.n)) == p


@settings(max_examples=100, deadline=None)
@given(sparse_polys())
def test_multilinearize_idempotent(p):
    once = poly_multilinearize(p)
    assert once.is_multilinear()
    assert poly_multilinearize(once) == once


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_coefficient_bound_homogeneous_multilinear(n, d, seed):
    # at most n^d monomials, so l1 <= n^(d/2) l2
    if d > n:
        d = n
    rng = np.random.default_rng(seed)
    monos = [a for a in enumerate_multi_indices(n, d) if sum(a) == d and max(a) <= 1]
    p = poly_normalize(Polynomial(n, dict(zip(monos, rng.standard_normal(len(monos))))))
    l1, l2 = poly_coeff_norms(p)
    assert abs(l2 - 1) < 1e-12
    assert l1 <= n ** (d / 2) + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_coefficient_norms_cauchy_schwarz(n, d, seed):
    rng = np.random.default_rng(seed)
    p = poly_normalize(Polynomial.from_coefficients(n, d, rng.standard_normal(math.comb(n + d, d))))
    l1, l2 = poly_coeff_norms(p)
    assert l1 <= math.sqrt(len(p)) * l2 + 1e-12


def test_general_normalized_poly_can_exceed_n_to_half_d():
    # why the n^(d/2) bound needs homogeneity: (1 + x)/sqrt2 has l1 = sqrt2 > 1
    p = poly_normalize(Polynomial(1, {(0,): 1.0, (1,): 1.0}))
    assert poly_coeff_norms(p)[0] == pytest.approx(math.sqrt(2))


@settings(max_examples=100, deadline=None)
@given(sparse_polys(n=2, max_deg=3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_compose_then_evaluate(p, n_out, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((p.n, n_out))
    y = rng.standard_normal(n_out)
    q = poly_compose_linear(p, A)
    assert q.degree <= p.degree
    want = poly_eval(p, A @ y)
    scale = max(1.0, sum(abs(c) for c in p.terms.values()) * (1 + np.abs(A @ y).max()) ** p.degree)
    assert abs(poly_eval(q, y) - want) <= 1e-9 * scale
