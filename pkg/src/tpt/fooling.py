"""Fooling gaps, the Gaussian-block lift and the multilinear surrogate ``p_delta``.

Expectations against a finite distribution are exact sums over its support.
Gaussian expectations are Monte Carlo estimates carrying a 99% half-width,
so every fooling claim is checked up to a stated estimator error.

Lifted coordinates are laid out block by block: ``x_hat[i * N + j]`` is
``X_hat_{i,j} = X_i / sqrt(N) + Z^{(i)}_j``, so ``sum_j x_hat[i*N + j] / sqrt(N)``
recovers ``X_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from tpt.algebra import Polynomial, enumerate_multi_indices, poly_coeff_norms, poly_compose_linear, poly_multilinearize
from tpt.distributions import (
    DiscreteDistribution,
    GaussianBlockSpec,
    make_rng,
    sample_gaussian,
    sample_gaussian_block,
    spawn_seeds,
)
from tpt.errors import DimensionError, NormalizationError, SizeError
from tpt.learner import sign_pm
from tpt.tester import gaussian_moment, moment_slack

Z99 = 2.58
#: cap on support x monomial evaluations
EVAL_CAP = 10**8
_MC_CHUNK = 1 << 18


def _check_dim(p: Polynomial, n: int) -> None:
    if p.n != n:
        raise DimensionError(f"polynomial has {p.n} variables, distribution has dimension {n}")


def ptf_expectation_discrete(p: Polynomial, D: DiscreteDistribution) -> float:
    """``sum_j w_j sign(p(x_j))`` over the support, with ``sign(0) = +1``."""
    _check_dim(p, D.n)
    # dividing by the total keeps a constant sign at exactly +-1
    return math.fsum(D.weights * sign_pm(p.evaluate(D.points))) / math.fsum(D.weights)


def ptf_expectation_gaussian(p: Polynomial, m: int, seed) -> tuple[float, float]:
    """Monte Carlo ``E sign(p(Y))``, ``Y ~ N(0, I_n)``, with half-width ``2.58 / sqrt(m)``."""
    if m < 1000:
        raise ValueError("use at least 1000 Monte Carlo samples")
    rng = make_rng(seed)
    total = 0
    done = 0
    while done < m:
        b = min(_MC_CHUNK, m - done)
        total += int(np.sum(sign_pm(p.evaluate(rng.standard_normal((b, p.n)))), dtype=np.int64))
        done += b
    return total / m, Z99 / math.sqrt(m)


@dataclass(frozen=True)
class FoolingReport:
    ptf_id: str
    gap: float
    slack: float
    k: int
    estimator_error: float
    discrete_value: float
    gaussian_value: float

    def to_dict(self) -> dict:
        return {
            "ptf_id": self.ptf_id,
            "gap": self.gap,
            "slack": self.slack,
            "k": self.k,
            "estimator_error": self.estimator_error,
            "discrete_value": self.discrete_value,
            "gaussian_value": self.gaussian_value,
        }


def fooling_gap(p: Polynomial, D: DiscreteDistribution, m: int, seed, k: int | None = None, ptf_id: str = "") -> FoolingReport:
    """``|E_D sign(p) - E_N sign(p)|`` with the Gaussian side estimated from ``m`` draws.

    ``k`` is the degree at which the moment slack of ``D`` is reported; it
    defaults to ``deg p``.
    """
    _check_dim(p, D.n)
    k = p.degree if k is None else k
    disc = ptf_expectation_discrete(p, D)
    est, hw = ptf_expectation_gaussian(p, m, seed)
    slack, _ = moment_slack(D, k)
    return FoolingReport(ptf_id, abs(disc - est), slack, k, hw, disc, est)


# -- lift ------------------------------------------------------------------------


def hat_lift(points, N: int, seed) -> np.ndarray:
    """Lift ``(m, n)`` points to ``(m, n N)`` with an independent centered block per coordinate."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = pts.shape
    Z = sample_gaussian_block(GaussianBlockSpec(N), m * n, seed).reshape(m, n, N)
    return (pts[:, :, None] / math.sqrt(N) + Z).reshape(m, n * N)


def averaging_map(n: int, N: int) -> np.ndarray:
    """The ``n x nN`` matrix of ``phi``: ``x_i = sum_j x_hat_{i,j} / sqrt(N)``."""
    A = np.zeros((n, n * N))
    for i in range(n):
        A[i, i * N : (i + 1) * N] = 1.0 / math.sqrt(N)
    return A


def build_p_delta(p: Polynomial, N: int, cap: int = EVAL_CAP) -> Polynomial:
    """Multilinearize ``p(phi(x_hat))``, a polynomial in ``n N`` variables."""
    if N < 1:
        raise ValueError("N must be positive")
    if (p.n * N) ** p.degree > cap:
        raise SizeError(f"(nN)^d = {(p.n * N) ** p.degree} exceeds the cost cap {cap}")
    return poly_multilinearize(poly_compose_linear(p, averaging_map(p.n, N)))


@dataclass(frozen=True, eq=False)
class LiftResult:
    N: int
    lifted_points: np.ndarray
    p_delta: Polynomial | None


def lift(points, N: int, seed, p: Polynomial | None = None) -> LiftResult:
    lifted = hat_lift(points, N, seed)
    return LiftResult(N, lifted, None if p is None else build_p_delta(p, N))


def verify_pdelta_closeness(p: Polynomial, N: int, delta: float, trials: int, seed) -> float:
    """Fraction of Gaussian draws with ``|p(X) - p_delta(X_hat)| > delta``."""
    _, l2 = poly_coeff_norms(p)
    if abs(l2 - 1.0) > 1e-9:
        raise NormalizationError("p must have unit l2 coefficient norm")
    if trials < 100:
        raise ValueError("use at least 100 trials")
    pd = build_p_delta(p, N)
    s_pts, s_lift = spawn_seeds(seed, 2)
    X = sample_gaussian(p.n, trials, s_pts)
    Xh = hat_lift(X, N, s_lift)
    diff = np.abs(p.evaluate(X) - pd.evaluate(Xh))
    return float(np.mean(diff > delta))


@dataclass(frozen=True)
class LiftSlack:
    estimate: float  # worst lifted moment deviation, Monte Carlo over the blocks
    bound: float  # (2k)^(k/2) * slack(D) + half_width
    half_width: float
    base_slack: float

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "bound": self.bound, "half_width": self.half_width, "base_slack": self.base_slack}


def lift_slack_check(D: DiscreteDistribution, N: int, k: int, mc_samples: int, seed, cap: int = EVAL_CAP) -> LiftSlack:
    """Estimate the lifted distribution's moment slack at degree ``k``.

    The outer expectation over ``D`` is exact; for each support point the
    block average is a Monte Carlo mean over ``mc_samples`` shared block
    draws.  The half-width is a Bonferroni-corrected 99% interval taken
    over all lifted moments at once, with the per-point standard errors
    added (no independence is assumed between support points).
    """
    n = D.n
    dim = n * N
    indices = enumerate_multi_indices(dim, k)
    if D.size * mc_samples * len(indices) > cap:
        raise SizeError("lift slack check exceeds the cost cap")
    Z = sample_gaussian_block(GaussianBlockSpec(N), mc_samples * n, seed).reshape(mc_samples, n, N)
    means = np.zeros(len(indices))
    sds = np.zeros(len(indices))
    for x, w in zip(D.points, D.weights):
        lifted = (x[None, :, None] / math.sqrt(N) + Z).reshape(mc_samples, dim)
        for a, alpha in enumerate(indices):
            mono = np.ones(mc_samples)
            for v, e in enumerate(alpha):
                if e:
                    mono = mono * lifted[:, v] ** e
            means[a] += w * mono.mean()
            sds[a] += w * mono.std(ddof=1) / math.sqrt(mc_samples)
    dev = np.abs(means - np.array([gaussian_moment(al) for al in indices]))
    z = norm.ppf(1 - 0.01 / (2 * len(indices)))
    half = float(z * np.max(sds))
    base, _ = moment_slack(D, k)
    bound = (2 * k) ** (k / 2) * base + half
    return LiftSlack(float(np.max(dev)), bound, half, base)


def carbery_wright_probability(p: Polynomial, eps: float, m: int, seed) -> float:
    """Monte Carlo ``P(|p(Y)| < eps)`` for ``Y ~ N(0, I_n)``."""
    Y = sample_gaussian(p.n, m, seed)
    return float(np.mean(np.abs(p.evaluate(Y)) < eps))


def random_multilinear(n: int, d: int, seed) -> Polynomial:
    """Normalized multilinear polynomial with Gaussian coefficients on all monomials of degree <= d."""
    rng = make_rng(seed)
    terms = {a: rng.standard_normal() for a in enumerate_multi_indices(n, d) if max(a, default=0) <= 1}
    p = Polynomial(n, terms)
    _, l2 = poly_coeff_norms(p)
    return p / l2
