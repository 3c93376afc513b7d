import json
import math
from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from tpt.algebra import Polynomial
from tpt.errors import DimensionError
from tpt.signapprox import (
    SUITE,
    SUITE_COLUMNS,
    QuadratureGrid,
    SignApproxProblem,
    best_sign_l1,
    impossibility_suite,
    onesided_lsl_verify,
    orthonormal_basis,
    pushforward_l1_objective,
    suite_to_csv,
    x_space_grid,
)

FIXTURES = Path(__file__).parent / "fixtures"
DERIVED = json.loads((FIXTURES / "derived.json").read_text())
ORACLE = json.loads((FIXTURES / "signapprox_oracle.json").read_text())["errors"]
IDENTITY = Polynomial.univariate([0.0, 1.0])
# package grid (4096 nodes) against the oracle grid (16384 nodes, other panel size and solver)
ORACLE_TOL = 1e-4


def test_grid_integrates_gaussian_moments():
    x, w = x_space_grid(SUITE["deg6"])
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)
    assert math.fsum(w * x**4) == pytest.approx(3.0, abs=1e-11)


def test_grid_validation():
    with pytest.raises(ValueError):
        QuadratureGrid(nodes=32)
    with pytest.raises(ValueError):
        QuadratureGrid(R=math.inf)
    assert QuadratureGrid(nodes=512).refined().nodes == 1024


def test_objective_examples():
    zero = Polynomial.univariate([0.0])
    one = Polynomial.univariate([1.0])
    assert pushforward_l1_objective(SUITE["cube"], zero) == pytest.approx(1.0, abs=1e-12)
    assert pushforward_l1_objective(IDENTITY, one) == pytest.approx(1.0, abs=1e-12)
    # |x - sign x| has kinks at +-1 that are not panel breaks, so the grid
    # error is O(h^2) rather than spectral; it must shrink under refinement
    want = DERIVED["e_abs_x_minus_sign"]
    errs = [abs(pushforward_l1_objective(IDENTITY, IDENTITY, QuadratureGrid(nodes=n)) - want) for n in (4096, 16384)]
    assert errs[0] <= 1e-5
    assert errs[1] <= errs[0] / 8


def test_best_constant_is_one():
    res = best_sign_l1(SignApproxProblem(IDENTITY, 0))
    assert res.error == pytest.approx(1.0, abs=1e-9)
    scan = [pushforward_l1_objective(IDENTITY, Polynomial.univariate([c])) for c in np.linspace(-2, 2, 81)]
    assert min(scan) >= 1.0 - 1e-12


def test_gaussian_degree_15():
    res = best_sign_l1(SignApproxProblem(IDENTITY, 15))
    assert res.error <= 0.25
    assert res.error == pytest.approx(ORACLE["identity"]["15"], abs=ORACLE_TOL)
    assert res.grid_residual < 1e-3
    assert res.gap <= 1e-6


def test_cube_floor_against_gaussian():
    g = best_sign_l1(SignApproxProblem(IDENTITY, 15)).error
    c = best_sign_l1(SignApproxProblem(SUITE["cube"], 15)).error
    assert c >= 2 * g


@pytest.mark.parametrize("scale", [0.5, 2.0])
@pytest.mark.parametrize("name,D", [("cubic3", 8), ("cube", 6)])
def test_error_invariant_under_rescaling(name, D, scale):
    p = SUITE[name]
    base = best_sign_l1(SignApproxProblem(p, D)).error
    scaled = best_sign_l1(SignApproxProblem(p * scale, D)).error
    assert scaled == pytest.approx(base, abs=1e-8)


def test_error_within_bounds():
    for name in SUITE:
        res = best_sign_l1(SignApproxProblem(SUITE[name], 4))
        assert 0.0 <= res.error <= 1.0 + 1e-12


def test_returned_q_reproduces_error_at_low_degree():
    res = best_sign_l1(SignApproxProblem(SUITE["cubic3"], 5))
    assert res.q.degree <= 5
    assert pushforward_l1_objective(SUITE["cubic3"], res.q) == pytest.approx(res.error, abs=1e-7)


def test_orthonormal_basis_and_monomial_conversion():
    x, w = x_space_grid(SUITE["cubic3"], QuadratureGrid(nodes=1024))
    y = P.polyval(x, SUITE["cubic3"].univariate_coefficients())
    B = orthonormal_basis(y, w * w, 6)
    mu = w * w / np.sum(w * w)
    np.testing.assert_allclose((B.Q * mu[:, None]).T @ B.Q, np.eye(7), atol=1e-10)
    beta = np.arange(1.0, 8.0)
    np.testing.assert_allclose(P.polyval(y, B.monomial(beta)), B.Q @ beta, rtol=1e-8, atol=1e-8)


def test_problem_validation():
    with pytest.raises(ValueError):
        SignApproxProblem(IDENTITY, 31)
    with pytest.raises(DimensionError):
        SignApproxProblem(Polynomial(2, {(1, 0): 1.0}), 3)


def test_suite_rows_and_csv():
    rows = impossibility_suite([0, 2], QuadratureGrid(nodes=512), suite=["linear", "cube"])
    assert [(r["p_id"], r["degree"]) for r in rows] == [("linear", 0), ("linear", 2), ("cube", 0), ("cube", 2)]
    text = suite_to_csv(rows)
    assert text.splitlines()[0] == ",".join(SUITE_COLUMNS)
    assert len(text.splitlines()) == 5
    with pytest.raises(ValueError):
        impossibility_suite([3, 1])


def test_suite_parallel_matches_serial():
    grid = QuadratureGrid(nodes=512)
    a = impossibility_suite([1, 3], grid, suite=["cubic3"], workers=1)
    b = impossibility_suite([1, 3], grid, suite=["cubic3"], workers=2)
    assert a == b


@pytest.mark.parametrize("D", [3, 8])
def test_suite_values_against_oracle(D):
    for name in SUITE:
        res = best_sign_l1(SignApproxProblem(SUITE[name], D))
        assert res.error == pytest.approx(ORACLE[name][str(D)], abs=ORACLE_TOL), name


# -- one-sided LSL -------------------------------------------------------------------------------


def test_onesided_certificate_degree_six():
    C, holds = onesided_lsl_verify(SUITE["deg6"], 0.45)
    assert holds
    assert C == pytest.approx(DERIVED["lsl_deg6_gamma045_range_1e4_1"], rel=1e-9)


def test_onesided_certificate_fails_for_gaussian():
    C, holds = onesided_lsl_verify(IDENTITY, 0.45, range_=(-1e3, 1.0))
    assert not holds


def test_onesided_needs_small_gamma():
    with pytest.raises(ValueError):
        onesided_lsl_verify(SUITE["deg6"], 0.5)
